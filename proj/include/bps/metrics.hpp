#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "bps/core.hpp"

namespace bps {

// Normalized Shannon entropy, log base K, with 0 log 0 = 0. Uniform maps to
// 1, point masses to 0.
inline double entropy(const ProbabilityVector& dist) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.k(); ++i) {
    const double p = dist[i];
    if (p > 0.0) acc += p * std::log(p);
  }
  return -acc / std::log(static_cast<double>(dist.k()));
}

// Entropy-based uncertainty split of a second-order prediction, in
// normalized-entropy units.
struct UncertaintyTriple {
  double total = 0.0;      // entropy of the vertex mean
  double aleatoric = 0.0;  // mean entropy of the vertices
  double epistemic = 0.0;  // total - aleatoric (>= 0 by concavity)
};

inline UncertaintyTriple uncertainty_decomposition(
    const SecondOrderPrediction& prediction) {
  UncertaintyTriple triple;
  triple.total = entropy(vertex_mean(prediction));
  double acc = 0.0;
  for (const auto& v : prediction.vertices()) acc += entropy(v);
  triple.aleatoric = acc / static_cast<double>(prediction.m());
  triple.epistemic = triple.total - triple.aleatoric;
  return triple;
}

struct SummaryMetrics {
  double marginal_coverage = 0.0;              // mean b_{i, y_i}
  double mean_set_size = 0.0;                  // mean sum_j b_{ij}
  std::optional<double> conditional_coverage;  // mean b_i . p_i, oracles given
};

inline SummaryMetrics summary_metrics(
    const std::vector<BernoulliParams>& params_list,
    const std::vector<int>& labels,
    const std::vector<ProbabilityVector>& oracles = {}) {
  if (params_list.empty())
    throw validation_error("summary_metrics: empty input");
  if (labels.size() != params_list.size())
    throw validation_error("summary_metrics: labels/params length mismatch");
  if (!oracles.empty() && oracles.size() != params_list.size())
    throw validation_error("summary_metrics: oracles/params length mismatch");

  SummaryMetrics out;
  double marg = 0.0, size = 0.0, cond = 0.0;
  for (std::size_t i = 0; i < params_list.size(); ++i) {
    const auto& b = params_list[i];
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= b.k())
      throw validation_error("summary_metrics: label out of range");
    marg += b[static_cast<std::size_t>(labels[i])];
    size += expected_size(b);
    if (!oracles.empty()) cond += expected_coverage(b, oracles[i]);
  }
  const double n = static_cast<double>(params_list.size());
  out.marginal_coverage = marg / n;
  out.mean_set_size = size / n;
  if (!oracles.empty()) out.conditional_coverage = cond / n;
  return out;
}

struct GroupwiseCoverage {
  double worst = 0.0;
  std::map<int, double> per_group;  // group id -> mean true-label inclusion
};

// min over groups of the mean true-label inclusion probability.
inline GroupwiseCoverage groupwise_worst_coverage(
    const std::vector<BernoulliParams>& params_list,
    const std::vector<int>& labels, const std::vector<int>& group_ids) {
  if (params_list.empty())
    throw validation_error("groupwise_worst_coverage: empty input");
  if (labels.size() != params_list.size() ||
      group_ids.size() != params_list.size())
    throw validation_error("groupwise_worst_coverage: length mismatch");
  std::map<int, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < params_list.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= params_list[i].k())
      throw validation_error("groupwise_worst_coverage: label out of range");
    auto& slot = acc[group_ids[i]];
    slot.first += params_list[i][static_cast<std::size_t>(labels[i])];
    slot.second += 1;
  }
  GroupwiseCoverage out;
  out.worst = std::numeric_limits<double>::infinity();
  for (const auto& [gid, slot] : acc) {
    const double mean = slot.first / static_cast<double>(slot.second);
    out.per_group[gid] = mean;
    out.worst = std::min(out.worst, mean);
  }
  return out;
}

// Size-stratified groups: expected set size rounded half-up to the nearest
// integer. Sizes are real-valued for randomized sets, so rounding keeps the
// strata comparable with deterministic baselines.
inline std::vector<int> ssc_groups(
    const std::vector<BernoulliParams>& params_list) {
  if (params_list.empty()) throw validation_error("ssc_groups: empty input");
  std::vector<int> ids;
  ids.reserve(params_list.size());
  for (const auto& b : params_list)
    ids.push_back(static_cast<int>(std::floor(expected_size(b) + 0.5)));
  return ids;
}

struct EuscGroups {
  std::vector<int> ids;
  int bins_used = 0;
  bool reduced = false;  // fewer records than requested bins
};

// Equal-frequency bins of the epistemic-uncertainty values, ranked with ties
// broken by record index.
inline EuscGroups eusc_groups(const std::vector<double>& eu_values,
                              int n_bins = 10) {
  if (eu_values.empty()) throw validation_error("eusc_groups: empty input");
  if (n_bins < 1) throw validation_error("eusc_groups: need at least one bin");
  const std::size_t n = eu_values.size();
  EuscGroups out;
  out.bins_used = static_cast<int>(std::min<std::size_t>(n_bins, n));
  out.reduced = out.bins_used != n_bins;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (eu_values[a] != eu_values[b]) return eu_values[a] < eu_values[b];
    return a < b;
  });
  out.ids.assign(n, 0);
  for (std::size_t rank = 0; rank < n; ++rank) {
    out.ids[order[rank]] = static_cast<int>(
        (rank * static_cast<std::size_t>(out.bins_used)) / n);
  }
  return out;
}

enum class BinningMode { kEqualWidth, kEqualCount };

struct Heatmap {
  int bins = 0;
  BinningMode mode = BinningMode::kEqualWidth;
  std::vector<double> au_edges;  // bins + 1 boundaries, ascending
  std::vector<double> eu_edges;
  std::vector<int> counts;            // row-major: au_bin * bins + eu_bin
  std::vector<double> mean_coverage;  // NaN marks an empty cell

  int count_at(int au_bin, int eu_bin) const {
    return counts[static_cast<std::size_t>(au_bin * bins + eu_bin)];
  }
  double coverage_at(int au_bin, int eu_bin) const {
    return mean_coverage[static_cast<std::size_t>(au_bin * bins + eu_bin)];
  }
};

namespace detail {

inline std::vector<double> equal_width_edges(double lo, double hi, int bins) {
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int e = 0; e <= bins; ++e)
    edges[static_cast<std::size_t>(e)] =
        lo + (hi - lo) * static_cast<double>(e) / static_cast<double>(bins);
  return edges;
}

inline int width_bin(double v, double lo, double hi, int bins) {
  if (hi <= lo) return 0;
  const double scaled = (v - lo) / (hi - lo) * static_cast<double>(bins);
  return std::clamp(static_cast<int>(scaled), 0, bins - 1);
}

// Bin by rank (ties by index); also reports approximate boundary values.
inline std::vector<int> count_bins(const std::vector<double>& values, int bins,
                                   std::vector<double>& edges) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  std::vector<int> ids(n, 0);
  for (std::size_t rank = 0; rank < n; ++rank)
    ids[order[rank]] =
        static_cast<int>((rank * static_cast<std::size_t>(bins)) / n);
  edges.assign(static_cast<std::size_t>(bins) + 1, 0.0);
  edges.front() = values[order.front()];
  edges.back() = values[order.back()];
  for (int e = 1; e < bins; ++e) {
    const std::size_t boundary_rank =
        (static_cast<std::size_t>(e) * n) / static_cast<std::size_t>(bins);
    edges[static_cast<std::size_t>(e)] = values[order[boundary_rank]];
  }
  return ids;
}

}  // namespace detail

// 2-D binning of aleatoric vs epistemic uncertainty with per-cell count and
// mean true-label inclusion probability. Default bins are equal width over
// the observed ranges; equal-count binning is available behind the mode flag.
// Empty cells carry NaN coverage.
inline Heatmap au_eu_heatmap(const std::vector<UncertaintyTriple>& triples,
                             const std::vector<BernoulliParams>& params_list,
                             const std::vector<int>& labels,
                             int bins_per_axis = 10,
                             BinningMode mode = BinningMode::kEqualWidth) {
  if (triples.empty()) throw validation_error("au_eu_heatmap: empty input");
  if (params_list.size() != triples.size() || labels.size() != triples.size())
    throw validation_error("au_eu_heatmap: length mismatch");
  if (bins_per_axis < 1)
    throw validation_error("au_eu_heatmap: need at least one bin per axis");

  const std::size_t n = triples.size();
  std::vector<double> au(n), eu(n);
  for (std::size_t i = 0; i < n; ++i) {
    au[i] = triples[i].aleatoric;
    eu[i] = triples[i].epistemic;
  }

  Heatmap map;
  map.bins = bins_per_axis;
  map.mode = mode;
  std::vector<int> au_bin(n), eu_bin(n);
  if (mode == BinningMode::kEqualWidth) {
    const auto [au_lo, au_hi] = std::minmax_element(au.begin(), au.end());
    const auto [eu_lo, eu_hi] = std::minmax_element(eu.begin(), eu.end());
    map.au_edges = detail::equal_width_edges(*au_lo, *au_hi, bins_per_axis);
    map.eu_edges = detail::equal_width_edges(*eu_lo, *eu_hi, bins_per_axis);
    for (std::size_t i = 0; i < n; ++i) {
      au_bin[i] = detail::width_bin(au[i], *au_lo, *au_hi, bins_per_axis);
      eu_bin[i] = detail::width_bin(eu[i], *eu_lo, *eu_hi, bins_per_axis);
    }
  } else {
    au_bin = detail::count_bins(au, bins_per_axis, map.au_edges);
    eu_bin = detail::count_bins(eu, bins_per_axis, map.eu_edges);
  }

  const auto cells = static_cast<std::size_t>(bins_per_axis) *
                     static_cast<std::size_t>(bins_per_axis);
  map.counts.assign(cells, 0);
  std::vector<double> acc(cells, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= params_list[i].k())
      throw validation_error("au_eu_heatmap: label out of range");
    const auto cell = static_cast<std::size_t>(au_bin[i] * bins_per_axis +
                                               eu_bin[i]);
    map.counts[cell] += 1;
    acc[cell] += params_list[i][static_cast<std::size_t>(labels[i])];
  }
  map.mean_coverage.assign(cells, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < cells; ++c) {
    if (map.counts[c] > 0)
      map.mean_coverage[c] = acc[c] / static_cast<double>(map.counts[c]);
  }
  return map;
}

}  // namespace bps

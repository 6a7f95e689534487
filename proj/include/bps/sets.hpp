#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "bps/core.hpp"
#include "bps/lp.hpp"

namespace bps {

// Which set construction a pipeline runs.
enum class Method { kBps, kAps };

// Inclusion probabilities of the smallest randomized set covering every
// distribution in the credal set at level t.
inline BernoulliParams bps_params(const SecondOrderPrediction& prediction,
                                  double t) {
  return solve_bps(prediction, t).params;
}

// Per-label inclusion probabilities of the APS randomized set at threshold
// tau: 1 above the boundary rank, the fractional remainder at the boundary,
// 0 below. Identical to the fractional knapsack on the same distribution.
inline BernoulliParams aps_params(const ProbabilityVector& dist, double tau) {
  return solve_fractional_knapsack(dist, tau).params;
}

// Outcome of one randomized APS draw.
struct ApsDecision {
  int boundary_rank = 0;  // L(pi, tau), 1-based
  int include_top = 0;    // L-1 or L depending on the draw
  double u = 0.0;

  friend bool operator==(const ApsDecision&, const ApsDecision&) = default;
};

// One APS draw: labels ranked by descending probability (ascending index on
// ties); the top L-1 labels are kept when u falls below the removal
// threshold, otherwise the top L. A boundary label with zero probability
// (reachable only through rounding dust at tau = 1) is never removed.
inline std::pair<LabelSet, ApsDecision> aps_set(const ProbabilityVector& dist,
                                                double tau, double u) {
  if (!std::isfinite(tau) || tau < 0.0 || tau > 1.0)
    throw validation_error("aps_set: tau must lie in [0, 1]");
  if (!std::isfinite(u) || u < 0.0 || u > 1.0)
    throw validation_error("aps_set: u must lie in [0, 1]");
  const std::size_t k = dist.k();
  std::vector<std::size_t> rank(k);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });

  std::size_t boundary = 0;  // 1-based rank L
  double cum = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    cum += dist[rank[r]];
    if (cum >= tau) {
      boundary = r + 1;
      break;
    }
  }
  double removal_threshold = 0.0;
  if (boundary == 0) {
    // The cumulative sum fell a rounding error short of tau = 1: treat the
    // last positive-mass rank as the boundary and never remove it, so
    // zero-probability labels stay excluded.
    boundary = 1;
    for (std::size_t r = 0; r < k; ++r) {
      if (dist[rank[r]] > 0.0) boundary = r + 1;
    }
    removal_threshold = 0.0;
  } else {
    const double boundary_prob = dist[rank[boundary - 1]];
    double cum_through = 0.0;
    for (std::size_t r = 0; r < boundary; ++r) cum_through += dist[rank[r]];
    removal_threshold =
        boundary_prob > 0.0 ? (cum_through - tau) / boundary_prob : 0.0;
  }

  const int include_top =
      u <= removal_threshold ? static_cast<int>(boundary) - 1
                             : static_cast<int>(boundary);
  std::vector<int> members;
  for (int r = 0; r < include_top; ++r)
    members.push_back(static_cast<int>(rank[static_cast<std::size_t>(r)]));
  return {LabelSet(std::move(members), k),
          ApsDecision{static_cast<int>(boundary), include_top, u}};
}

// Sets at the nominal level 1 - alpha, skipping any calibration. APS on a
// second-order input is applied to the arithmetic mean of the stored
// vertices.
inline BernoulliParams nominal_params(const SecondOrderPrediction& prediction,
                                      double alpha, Method method) {
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 1.0)
    throw validation_error("nominal_params: alpha must lie in (0, 1)");
  const double t = 1.0 - alpha;
  if (method == Method::kBps) return bps_params(prediction, t);
  return aps_params(vertex_mean(prediction), t);
}

// Method-dispatched parameter construction at an explicit coverage target.
inline BernoulliParams params_at(const SecondOrderPrediction& prediction,
                                 double t, Method method) {
  if (method == Method::kBps) return bps_params(prediction, t);
  return aps_params(vertex_mean(prediction), t);
}

}  // namespace bps

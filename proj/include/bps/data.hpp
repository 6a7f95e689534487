#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bps/core.hpp"
#include "bps/credal.hpp"
#include "bps/metrics.hpp"
#include "bps/rng.hpp"

namespace bps {

// A keyed collection of records sharing one K, plus free-form provenance.
struct Dataset {
  int k = 0;
  std::vector<DatasetRecord> records;
  std::map<std::string, std::string> meta;
};

namespace detail {

inline validation_error line_error(const std::string& context, std::size_t line,
                                   const std::string& what) {
  std::ostringstream oss;
  oss << context << " line " << line << ": " << what;
  return validation_error(oss.str());
}

inline std::map<std::string, std::string> parse_meta(const nlohmann::json& j,
                                                     const std::string& context,
                                                     std::size_t line) {
  std::map<std::string, std::string> meta;
  if (!j.is_object()) throw line_error(context, line, "meta must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string())
      throw line_error(context, line, "meta values must be strings");
    meta[key] = value.get<std::string>();
  }
  return meta;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Reads the line-oriented prediction format:
//   header:  {"k": K, "meta": {...}}
//   record:  {"id": "...", "preds": [[K reals] x m], "label": int?,
//             "oracle": [K reals]?, "meta": {...}?}
// Blank lines are skipped. Every row is validated through the core
// constructors; malformed rows report their line number.
inline Dataset load_predictions(std::istream& in,
                                const std::string& context = "predictions") {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw detail::line_error(context, line_no, e.what());
    }
    if (!j.is_object())
      throw detail::line_error(context, line_no, "expected a JSON object");

    if (!header_seen) {
      if (!j.contains("k") || !j["k"].is_number_integer())
        throw detail::line_error(context, line_no, "header needs integer \"k\"");
      ds.k = j["k"].get<int>();
      if (ds.k < 2)
        throw detail::line_error(context, line_no, "k must be at least 2");
      if (j.contains("meta"))
        ds.meta = detail::parse_meta(j["meta"], context, line_no);
      header_seen = true;
      continue;
    }

    try {
      if (!j.contains("id") || !j["id"].is_string())
        throw validation_error("record needs string \"id\"");
      std::string id = j["id"].get<std::string>();
      if (id.empty()) throw validation_error("record id must be nonempty");
      if (!seen_ids.insert(id).second)
        throw validation_error("duplicate id \"" + id + "\"");
      if (!j.contains("preds") || !j["preds"].is_array() || j["preds"].empty())
        throw validation_error("record needs nonempty \"preds\" array");

      std::vector<ProbabilityVector> vertices;
      for (const auto& row : j["preds"]) {
        auto probs = row.get<std::vector<double>>();
        if (probs.size() != static_cast<std::size_t>(ds.k))
          throw validation_error("prediction row length differs from header k");
        vertices.emplace_back(std::move(probs));
      }
      DatasetRecord rec{std::move(id), SecondOrderPrediction(std::move(vertices)),
                        std::nullopt, std::nullopt, {}};
      if (j.contains("label") && !j["label"].is_null()) {
        if (!j["label"].is_number_integer())
          throw validation_error("label must be an integer");
        const int label = j["label"].get<int>();
        if (label < 0 || label >= ds.k)
          throw validation_error("label out of range");
        rec.label = label;
      }
      if (j.contains("oracle") && !j["oracle"].is_null()) {
        auto probs = j["oracle"].get<std::vector<double>>();
        if (probs.size() != static_cast<std::size_t>(ds.k))
          throw validation_error("oracle length differs from header k");
        rec.oracle = ProbabilityVector(std::move(probs));
      }
      if (j.contains("meta"))
        rec.meta = detail::parse_meta(j["meta"], context, line_no);
      ds.records.push_back(std::move(rec));
    } catch (const validation_error& e) {
      throw detail::line_error(context, line_no, e.what());
    } catch (const nlohmann::json::exception& e) {
      throw detail::line_error(context, line_no, e.what());
    }
  }
  if (!header_seen)
    throw validation_error(context + ": missing header line");
  return ds;
}

inline void write_predictions(std::ostream& out, const Dataset& ds) {
  nlohmann::json header;
  header["k"] = ds.k;
  header["meta"] = ds.meta;
  out << header.dump() << "\n";
  for (const auto& rec : ds.records) {
    nlohmann::json j;
    j["id"] = rec.id;
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& v : rec.prediction.vertices()) preds.push_back(v.probs());
    j["preds"] = std::move(preds);
    if (rec.label) j["label"] = *rec.label;
    if (rec.oracle) j["oracle"] = rec.oracle->probs();
    if (!rec.meta.empty()) j["meta"] = rec.meta;
    out << j.dump() << "\n";
  }
  if (!out) throw io_error("write_predictions: stream failure");
}

inline Dataset load_predictions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return load_predictions(in, path);
}

inline void write_predictions_file(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  write_predictions(out, ds);
}

// b-vector output: one {"id": ..., "b": [...]} line per record.
inline void write_params(std::ostream& out, const std::vector<std::string>& ids,
                         const std::vector<BernoulliParams>& params_list) {
  if (ids.size() != params_list.size())
    throw validation_error("write_params: ids/params length mismatch");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    nlohmann::json j;
    j["id"] = ids[i];
    j["b"] = params_list[i].values();
    out << j.dump() << "\n";
  }
  if (!out) throw io_error("write_params: stream failure");
}

inline std::pair<std::vector<std::string>, std::vector<BernoulliParams>>
load_params(std::istream& in, const std::string& context = "params") {
  std::vector<std::string> ids;
  std::vector<BernoulliParams> params_list;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (!j.contains("id") || !j["id"].is_string() || !j.contains("b"))
        throw validation_error("expected {\"id\", \"b\"}");
      std::string id = j["id"].get<std::string>();
      if (!seen.insert(id).second)
        throw validation_error("duplicate id \"" + id + "\"");
      BernoulliParams b(j["b"].get<std::vector<double>>());
      if (!params_list.empty() && b.k() != params_list.front().k())
        throw validation_error("inconsistent b length");
      ids.push_back(std::move(id));
      params_list.push_back(std::move(b));
    } catch (const validation_error& e) {
      throw detail::line_error(context, line_no, e.what());
    } catch (const nlohmann::json::exception& e) {
      throw detail::line_error(context, line_no, e.what());
    }
  }
  return {std::move(ids), std::move(params_list)};
}

// Flat key-value metrics document, pretty-printed with sorted keys.
inline void write_metrics(std::ostream& out, const nlohmann::json& doc) {
  out << doc.dump(2) << "\n";
  if (!out) throw io_error("write_metrics: stream failure");
}

inline void write_heatmap_csv(std::ostream& out, const Heatmap& map) {
  out << "au_bin,eu_bin,au_lo,au_hi,eu_lo,eu_hi,count,mean_cvg\n";
  for (int a = 0; a < map.bins; ++a) {
    for (int e = 0; e < map.bins; ++e) {
      out << a << ',' << e << ','
          << detail::format_double(map.au_edges[static_cast<std::size_t>(a)]) << ','
          << detail::format_double(map.au_edges[static_cast<std::size_t>(a) + 1]) << ','
          << detail::format_double(map.eu_edges[static_cast<std::size_t>(e)]) << ','
          << detail::format_double(map.eu_edges[static_cast<std::size_t>(e) + 1]) << ','
          << map.count_at(a, e) << ',';
      const double cvg = map.coverage_at(a, e);
      if (map.count_at(a, e) > 0) out << detail::format_double(cvg);
      out << "\n";
    }
  }
  if (!out) throw io_error("write_heatmap_csv: stream failure");
}

// Seeded uniform shuffle followed by a contiguous partition. Fractions must
// be positive and sum to 1; realized sizes miss the exact fractions by less
// than one record each.
inline std::vector<Dataset> split(const Dataset& ds,
                                  const std::vector<double>& fractions,
                                  std::uint64_t seed) {
  if (ds.records.empty()) throw validation_error("split: empty dataset");
  if (fractions.empty()) throw validation_error("split: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw validation_error("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw validation_error("split: fractions must sum to 1");

  const std::size_t n = ds.records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_index(i + 1);
    std::swap(order[i], order[j]);
  }

  std::vector<std::size_t> boundaries;
  double cum = 0.0;
  for (std::size_t part = 0; part + 1 < fractions.size(); ++part) {
    cum += fractions[part];
    auto b = static_cast<std::size_t>(
        std::floor(cum * static_cast<double>(n) + 0.5));
    if (!boundaries.empty()) b = std::max(b, boundaries.back());
    boundaries.push_back(std::min(b, n));
  }
  boundaries.push_back(n);

  std::vector<Dataset> parts;
  std::size_t lo = 0;
  for (std::size_t b : boundaries) {
    Dataset part;
    part.k = ds.k;
    part.meta = ds.meta;
    for (std::size_t i = lo; i < b; ++i)
      part.records.push_back(ds.records[order[i]]);
    parts.push_back(std::move(part));
    lo = b;
  }
  return parts;
}

// Synthetic benchmark with valid credal sets: flat-Dirichlet centers, TV-ball
// vertices as the second-order prediction, an oracle sampled inside each
// ball, and a label drawn from the oracle. Returns the vertex dataset and a
// parallel single-vertex dataset holding the centers (the first-order input
// the APS baseline consumes).
inline std::pair<Dataset, Dataset> gen_tv_synthetic(int n, int k, double d,
                                                    std::uint64_t seed) {
  if (n < 1) throw validation_error("gen_tv_synthetic: n must be positive");
  if (k < 2) throw validation_error("gen_tv_synthetic: k must be at least 2");
  if (!std::isfinite(d) || d <= 0.0 || d >= 1.0)
    throw validation_error("gen_tv_synthetic: d must lie in (0, 1)");

  const std::map<std::string, std::string> meta{
      {"source", "gen_tv_synthetic"},
      {"n", std::to_string(n)},
      {"k", std::to_string(k)},
      {"d", detail::format_double(d)},
      {"seed", std::to_string(seed)}};
  Dataset vertices_ds{k, {}, meta};
  Dataset centers_ds{k, {}, meta};
  centers_ds.meta["variant"] = "centers";

  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    ProbabilityVector center(rng.dirichlet_flat(static_cast<std::size_t>(k)));
    TvBall ball(center, d);
    SecondOrderPrediction vertices = tv_ball_vertices(ball);
    ProbabilityVector oracle = sample_in_tv_ball(ball, rng);
    const int label = static_cast<int>(rng.categorical(oracle.probs()));

    char id[16];
    std::snprintf(id, sizeof(id), "r%06d", i);
    vertices_ds.records.push_back(
        DatasetRecord{id, std::move(vertices), label, oracle, {}});
    centers_ds.records.push_back(
        DatasetRecord{id, SecondOrderPrediction({center}), label, oracle, {}});
  }
  return {std::move(vertices_ds), std::move(centers_ds)};
}

// Synthetic classification task with a rare feature group: x1 = 1 with
// probability 1/20 and -8 otherwise, x2..x10 standard normal, class scores
// linear in x with a fixed Gaussian coefficient matrix drawn once per
// dataset. Scores are mapped through a softmax to obtain the conditional
// label law -- the plain score normalization is undefined for the negative
// scores this construction produces, and the substitution is recorded in the
// dataset meta. Records carry the oracle as a single-vertex prediction, the
// feature vector, and the x1 group in their meta.
inline Dataset gen_aps_synthetic(int n, int k, std::uint64_t seed) {
  if (n < 1) throw validation_error("gen_aps_synthetic: n must be positive");
  if (k < 2) throw validation_error("gen_aps_synthetic: k must be at least 2");
  constexpr int kFeatures = 10;

  Dataset ds;
  ds.k = k;
  ds.meta = {{"source", "gen_aps_synthetic"},
             {"n", std::to_string(n)},
             {"k", std::to_string(k)},
             {"seed", std::to_string(seed)},
             {"z_normalization", "softmax"}};

  Rng rng(seed);
  std::vector<double> beta(static_cast<std::size_t>(kFeatures) *
                           static_cast<std::size_t>(k));
  for (auto& c : beta) c = rng.normal();

  std::vector<double> x(kFeatures), z(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    x[0] = rng.uniform() < 0.05 ? 1.0 : -8.0;
    for (int f = 1; f < kFeatures; ++f) x[static_cast<std::size_t>(f)] = rng.normal();

    for (int j = 0; j < k; ++j) {
      double acc = 0.0;
      for (int f = 0; f < kFeatures; ++f)
        acc += beta[static_cast<std::size_t>(f) * static_cast<std::size_t>(k) +
                    static_cast<std::size_t>(j)] *
               x[static_cast<std::size_t>(f)];
      z[static_cast<std::size_t>(j)] = acc;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double norm = 0.0;
    for (double& v : z) {
      v = std::exp(v - zmax);
      norm += v;
    }
    std::vector<double> probs(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) probs[j] = z[j] / norm;
    ProbabilityVector oracle(std::move(probs));
    const int label = static_cast<int>(rng.categorical(oracle.probs()));

    char id[16];
    std::snprintf(id, sizeof(id), "r%06d", i);
    std::string features;
    for (int f = 0; f < kFeatures; ++f) {
      if (f) features += ',';
      features += detail::format_double(x[static_cast<std::size_t>(f)]);
    }
    DatasetRecord rec{id, SecondOrderPrediction({oracle}), label, oracle, {}};
    rec.meta["x1_group"] = x[0] == 1.0 ? "1" : "-8";
    rec.meta["x"] = std::move(features);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// FNV-1a digest of a byte string, as 16 hex characters. Used to stamp
// calibration documents with the identity of their input.
inline std::string digest_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bps

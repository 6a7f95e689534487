#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bps/rng.hpp"

namespace bps {

// Thrown when inputs violate a documented precondition or invariant.
class validation_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown for stream/file failures; carries path or line context.
class io_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Default tolerance for accepting float drift in externally produced
// probability vectors (softmax exports, ensemble means, ...).
inline constexpr double kDefaultSimplexTol = 1e-6;

// L-infinity threshold below which two credal-set vertices are one vertex.
inline constexpr double kVertexDedupTol = 1e-12;

// Feasibility slack used for coverage constraints across the library.
inline constexpr double kCoverageSlack = 1e-9;

// A point on the (K-1)-simplex: K label probabilities, K >= 2.
//
// Construction clamps entries that drifted slightly outside [0, 1] and
// renormalizes the sum to 1 when it is off by more than accumulated rounding,
// so that constructing from an already-valid vector is an exact no-op.
class ProbabilityVector {
 public:
  explicit ProbabilityVector(std::vector<double> raw,
                             double tol = kDefaultSimplexTol) {
    if (raw.size() < 2)
      throw validation_error("probability vector needs at least 2 entries");
    if (!(tol > 0.0))
      throw validation_error("probability vector tolerance must be positive");
    double sum = 0.0;
    for (double x : raw) {
      if (!std::isfinite(x))
        throw validation_error("probability vector entry is not finite");
      if (x < -tol)
        throw validation_error("probability vector entry below -tol");
      sum += x;
    }
    if (std::abs(sum - 1.0) > tol)
      throw validation_error("probability vector sum deviates from 1 beyond tol");
    for (double& x : raw) x = std::clamp(x, 0.0, 1.0);
    double clamped_sum = 0.0;
    for (double x : raw) clamped_sum += x;
    // Skip the division when the sum is already 1 up to accumulated rounding;
    // this makes construction idempotent.
    const double renorm_skip =
        4.0 * static_cast<double>(raw.size()) * std::numeric_limits<double>::epsilon();
    if (std::abs(clamped_sum - 1.0) > renorm_skip) {
      for (double& x : raw) x /= clamped_sum;
    }
    probs_ = std::move(raw);
  }

  std::size_t k() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

  friend bool operator==(const ProbabilityVector&,
                         const ProbabilityVector&) = default;

 private:
  std::vector<double> probs_;
};

inline ProbabilityVector make_probability_vector(std::vector<double> raw,
                                                 double tol = kDefaultSimplexTol) {
  return ProbabilityVector(std::move(raw), tol);
}

// A second-order prediction: a finite family of first-order distributions
// whose convex hull is the credal set for one instance. Vertices that
// coincide within L-infinity 1e-12 are stored once (redundant rows only slow
// the solver, and exact duplicates can upset pivoting).
class SecondOrderPrediction {
 public:
  explicit SecondOrderPrediction(std::vector<ProbabilityVector> vertices) {
    if (vertices.empty())
      throw validation_error("second-order prediction needs at least one vertex");
    const std::size_t k = vertices.front().k();
    for (const auto& v : vertices) {
      if (v.k() != k)
        throw validation_error("second-order prediction vertices share one K");
    }
    for (auto& v : vertices) {
      bool duplicate = false;
      for (const auto& kept : vertices_) {
        double linf = 0.0;
        for (std::size_t i = 0; i < k; ++i)
          linf = std::max(linf, std::abs(kept[i] - v[i]));
        if (linf <= kVertexDedupTol) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) vertices_.push_back(std::move(v));
    }
  }

  std::size_t k() const { return vertices_.front().k(); }
  std::size_t m() const { return vertices_.size(); }
  const std::vector<ProbabilityVector>& vertices() const { return vertices_; }
  const ProbabilityVector& vertex(std::size_t j) const { return vertices_[j]; }

  friend bool operator==(const SecondOrderPrediction&,
                         const SecondOrderPrediction&) = default;

 private:
  std::vector<ProbabilityVector> vertices_;
};

// Arithmetic mean of the stored vertices (not of the underlying hull).
inline ProbabilityVector vertex_mean(const SecondOrderPrediction& prediction) {
  std::vector<double> mean(prediction.k(), 0.0);
  for (const auto& v : prediction.vertices())
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
  const double m = static_cast<double>(prediction.m());
  for (double& x : mean) x /= m;
  return ProbabilityVector(std::move(mean));
}

// Per-label inclusion probabilities of a randomized prediction set.
class BernoulliParams {
 public:
  explicit BernoulliParams(std::vector<double> b) {
    if (b.empty()) throw validation_error("Bernoulli parameters must be nonempty");
    for (double& x : b) {
      if (!std::isfinite(x))
        throw validation_error("Bernoulli parameter is not finite");
      if (x < -1e-12 || x > 1.0 + 1e-12)
        throw validation_error("Bernoulli parameter outside [0, 1]");
      x = std::clamp(x, 0.0, 1.0);
    }
    b_ = std::move(b);
  }

  std::size_t k() const { return b_.size(); }
  double operator[](std::size_t i) const { return b_[i]; }
  const std::vector<double>& values() const { return b_; }

  friend bool operator==(const BernoulliParams&, const BernoulliParams&) = default;

 private:
  std::vector<double> b_;
};

// One realized draw of a randomized set: a subset of {0, ..., K-1}.
class LabelSet {
 public:
  LabelSet(std::vector<int> members, std::size_t k) : k_(k) {
    std::sort(members.begin(), members.end());
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i] < 0 || static_cast<std::size_t>(members[i]) >= k)
        throw validation_error("label set member out of range");
      if (i > 0 && members[i] == members[i - 1])
        throw validation_error("label set member duplicated");
    }
    members_ = std::move(members);
  }

  std::size_t k() const { return k_; }
  std::size_t size() const { return members_.size(); }
  bool contains(int label) const {
    return std::binary_search(members_.begin(), members_.end(), label);
  }
  const std::vector<int>& members() const { return members_; }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<int> members_;
  std::size_t k_;
};

// Label j joins the set independently with probability b_j. A fixed seed
// yields a fixed set; exactly K uniforms are consumed per call.
inline LabelSet sample_set(const BernoulliParams& params, Rng& rng) {
  std::vector<int> members;
  for (std::size_t j = 0; j < params.k(); ++j) {
    if (rng.uniform() < params[j]) members.push_back(static_cast<int>(j));
  }
  return LabelSet(std::move(members), params.k());
}

// E[|C|] = sum_j b_j.
inline double expected_size(const BernoulliParams& params) {
  double sum = 0.0;
  for (double x : params.values()) sum += x;
  return sum;
}

// Expected conditional coverage b . p under label distribution p.
inline double expected_coverage(const BernoulliParams& params,
                                const ProbabilityVector& dist) {
  if (params.k() != dist.k())
    throw validation_error("expected_coverage: dimension mismatch");
  double dot = 0.0;
  for (std::size_t j = 0; j < params.k(); ++j) dot += params[j] * dist[j];
  return dot;
}

// One evaluated instance: a second-order prediction plus optional ground
// truth. Labels are 0-indexed; string class names belong in file metadata.
struct DatasetRecord {
  std::string id;
  SecondOrderPrediction prediction;
  std::optional<int> label;
  std::optional<ProbabilityVector> oracle;
  std::map<std::string, std::string> meta;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

}  // namespace bps

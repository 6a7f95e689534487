#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

#include "bps/core.hpp"
#include "bps/sets.hpp"

namespace bps {

// One calibration instance: a second-order prediction with its observed label.
struct LabeledPrediction {
  SecondOrderPrediction prediction;
  int label = 0;
};

// Ceiling of x, tolerant of values that land a rounding error above an
// integer (e.g. (1 - 0.1) * 10).
inline long long conformal_ceiling(double x) {
  return static_cast<long long>(std::ceil(x - 1e-9));
}

namespace detail {

inline void check_labels(const std::vector<LabeledPrediction>& cal) {
  for (const auto& rec : cal) {
    if (rec.label < 0 || static_cast<std::size_t>(rec.label) >= rec.prediction.k())
      throw validation_error("calibration label out of range");
  }
}

}  // namespace detail

// Sum over the calibration set of the true-label inclusion probability at
// coverage target t. Per-record solves are independent; with jobs > 1 they
// are fanned out to worker threads and the results are summed in record
// order, so the value is bit-identical to the sequential one.
inline double empirical_coverage_sum(const std::vector<LabeledPrediction>& cal,
                                     double t, Method method = Method::kBps,
                                     int jobs = 1) {
  detail::check_labels(cal);
  const std::size_t n = cal.size();
  std::vector<double> coverage(n, 0.0);
  const auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const BernoulliParams b = params_at(cal[i].prediction, t, method);
      coverage[i] = b[static_cast<std::size_t>(cal[i].label)];
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, w, lo, hi] {
        try {
          worker(lo, hi);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
  }
  double sum = 0.0;
  for (double c : coverage) sum += c;
  return sum;
}

// Result of the conformal risk-control search.
struct CalibrationResult {
  double t_star = 1.0;       // calibrated coverage target
  bool conservative = false; // max(t_cp, 1 - alpha) rule applied
  bool saturated = false;    // even t = 1 cannot meet the ceiling
  int iterations = 0;
  // Audit trail: every evaluated (t, empirical coverage sum) pair.
  std::vector<std::pair<double, double>> trace;
};

struct CalibrateOptions {
  double tol = 1e-6;
  int max_iterations = 60;
  Method method = Method::kBps;
  int jobs = 1;
};

// Smallest coverage target t (within tol) whose empirical coverage sum meets
// the ceiling ceil((1 - alpha)(n + 1)), found by binary search on [0, 1].
// The upper bracket endpoint is returned, so the ceiling condition is met by
// construction even though per-record coverage is only piecewise linear in t.
// When the ceiling is unattainable at t = 1 the result is flagged saturated
// with t_star = 1 (full-support sets downstream).
inline CalibrationResult calibrate_risk_control(
    const std::vector<LabeledPrediction>& cal, double alpha,
    const CalibrateOptions& options = {}) {
  if (cal.empty()) throw validation_error("calibration set is empty");
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 1.0)
    throw validation_error("alpha must lie in (0, 1)");
  if (!(options.tol > 0.0)) throw validation_error("tol must be positive");
  detail::check_labels(cal);

  const auto n = static_cast<double>(cal.size());
  const double target =
      static_cast<double>(conformal_ceiling((1.0 - alpha) * (n + 1.0)));

  CalibrationResult result;
  const double sum_at_one =
      empirical_coverage_sum(cal, 1.0, options.method, options.jobs);
  result.trace.emplace_back(1.0, sum_at_one);
  if (sum_at_one < target - kCoverageSlack) {
    result.t_star = 1.0;
    result.saturated = true;
    return result;
  }

  double lo = 0.0, hi = 1.0;
  while (hi - lo > options.tol && result.iterations < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    const double sum =
        empirical_coverage_sum(cal, mid, options.method, options.jobs);
    result.trace.emplace_back(mid, sum);
    if (sum >= target - kCoverageSlack) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++result.iterations;
  }
  result.t_star = hi;
  return result;
}

// lambda_cons = max(lambda_cp, 1 - alpha): never calibrate below the nominal
// level, at the price of possibly larger sets.
inline double conservative_threshold(double t_cp, double alpha) {
  if (!std::isfinite(t_cp) || t_cp < 0.0 || t_cp > 1.0)
    throw validation_error("conservative_threshold: t_cp must lie in [0, 1]");
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0)
    throw validation_error("conservative_threshold: alpha must lie in [0, 1]");
  return std::max(t_cp, 1.0 - alpha);
}

// Copy of `result` with the conservative rule applied and flagged.
inline CalibrationResult apply_conservative(CalibrationResult result,
                                            double alpha) {
  result.t_star = conservative_threshold(result.t_star, alpha);
  result.conservative = true;
  return result;
}

struct QuantileResult {
  double value = std::numeric_limits<double>::infinity();
  bool saturated = false;  // ceiling exceeded the sample size
};

// Split-conformal quantile: the ceil((1 - alpha)(n + 1))-th smallest score,
// or an infinite sentinel when that rank exceeds n.
inline QuantileResult conformal_quantile(std::vector<double> scores,
                                         double alpha) {
  if (scores.empty()) throw validation_error("conformal_quantile: empty scores");
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 1.0)
    throw validation_error("conformal_quantile: alpha must lie in (0, 1)");
  const auto n = static_cast<long long>(scores.size());
  long long rank = conformal_ceiling((1.0 - alpha) * static_cast<double>(n + 1));
  rank = std::max(rank, 1LL);
  if (rank > n) return {std::numeric_limits<double>::infinity(), true};
  std::sort(scores.begin(), scores.end());
  return {scores[static_cast<std::size_t>(rank - 1)], false};
}

}  // namespace bps

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bps/core.hpp"

namespace bps {

// Solution of the randomized-set program
//
//   minimize    sum_j b_j
//   subject to  b . pi^(j) >= t   for every vertex j,
//               0 <= b <= 1.
struct LpSolution {
  BernoulliParams params;
  double objective = 0.0;
  // Vertex indices whose coverage constraint is tight at the optimum.
  std::vector<int> active_constraints;
  int iterations = 0;
};

namespace detail {

inline constexpr double kPivotTol = 1e-9;
inline constexpr double kRatioTieTol = 1e-12;
// Per-pivot bound overshoot admitted by the two-pass ratio test.
inline constexpr double kFeasTol = 1e-10;
// Basic values this close to a bound are reported as the bound itself.
inline constexpr double kSnapTol = 1e-10;

inline LpSolution assemble_solution(std::vector<double> b,
                                    const SecondOrderPrediction& prediction,
                                    double t, int iterations) {
  for (double& x : b) {
    if (x < kSnapTol) x = 0.0;
    if (x > 1.0 - kSnapTol) x = 1.0;
    x = std::clamp(x, 0.0, 1.0);
  }
  double objective = 0.0;
  for (double x : b) objective += x;
  std::vector<int> active;
  for (std::size_t j = 0; j < prediction.m(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) dot += b[i] * prediction.vertex(j)[i];
    if (std::abs(dot - t) <= kCoverageSlack) active.push_back(static_cast<int>(j));
  }
  LpSolution solution{BernoulliParams(std::move(b)), objective, std::move(active),
                      iterations};
  return solution;
}

}  // namespace detail

// Bounded-variable primal simplex for the program above.
//
// The constraint rows are the credal-set vertices; with surplus variables
// s_i >= 0 the system is  pi^(i) . b - s_i = t.  Because every row sums to 1,
// starting from b = 1 (all labels nonbasic at their upper bound) gives the
// basic feasible point s = 1 - t >= 0, so no phase-1 is needed.
//
// The entering variable follows Bland's rule over a fixed variable order:
// label columns sorted by ascending total vertex mass (ties broken by
// descending label index), then the surplus columns. Under this order the
// m = 1 pivot path peels labels off the upper bound from the least probable
// upward, which reproduces the fractional-knapsack solution entry for entry;
// raw-index ordering would terminate at a different (equally sized) optimum
// and break that equality. Labels with zero mass in every vertex cannot
// tighten any constraint and are fixed to 0 before solving.
//
// The leaving variable comes from a two-pass ratio test: pass one finds the
// most permissive step within a small feasibility tolerance, pass two picks
// the numerically largest pivot among the rows that block within it. Nearly
// duplicated vertices (ensemble members agreeing to 1e-8) otherwise force
// pivots on cancellation-sized entries, and the resulting near-singular basis
// can pass the optimality test while a constraint is violated. After the last
// pivot the basic values are recomputed from the original data through the
// final basis, and the result is verified against the coverage constraints.
// Should degeneracy ever stall the tolerance-based test, the leaving rule
// falls back to textbook Bland, whose termination guarantee holds for any
// fixed order.
//
// Deterministic by construction: no randomization, no platform-dependent
// ordering.
//
// TODO: price label columns in blocks instead of a full scan per iteration if
// K beyond ~10^3 becomes a real workload.
inline LpSolution solve_bps(const SecondOrderPrediction& prediction, double t) {
  if (!std::isfinite(t) || t < 0.0 || t > 1.0)
    throw validation_error("solve_bps: coverage target t must lie in [0, 1]");
  const std::size_t k_full = prediction.k();
  const std::size_t m = prediction.m();

  if (t == 0.0) {
    return detail::assemble_solution(std::vector<double>(k_full, 0.0), prediction,
                                     t, 0);
  }

  // Columns that appear with positive mass in at least one vertex.
  std::vector<std::size_t> support;
  for (std::size_t j = 0; j < k_full; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      if (prediction.vertex(i)[j] > 0.0) {
        support.push_back(j);
        break;
      }
    }
  }

  if (t == 1.0) {
    // b . pi = 1 forces b = 1 wherever pi puts mass, so the support indicator
    // is the unique optimum; solving would only blur it with rounding.
    std::vector<double> full(k_full, 0.0);
    for (std::size_t j : support) full[j] = 1.0;
    return detail::assemble_solution(std::move(full), prediction, t, 0);
  }
  const std::size_t s = support.size();
  const std::size_t n = s + m;  // structural + surplus variables

  // Dense column access: label column j is the vertex mass of support[j],
  // surplus column s + i is -e_i.
  const auto column_entry = [&](std::size_t row, std::size_t var) -> double {
    if (var < s) return prediction.vertex(row)[support[var]];
    return var - s == row ? -1.0 : 0.0;
  };

  // Fixed Bland order: ascending column mass, ties by descending label index;
  // surplus columns last.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> column_mass(s, 0.0);
  for (std::size_t var = 0; var < s; ++var)
    for (std::size_t i = 0; i < m; ++i) column_mass[var] += column_entry(i, var);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s),
            [&](std::size_t a, std::size_t b) {
              if (column_mass[a] != column_mass[b])
                return column_mass[a] < column_mass[b];
              return support[a] > support[b];
            });
  std::vector<std::size_t> order_pos(n);
  for (std::size_t pos = 0; pos < n; ++pos) order_pos[order[pos]] = pos;

  enum class Status { kBasic, kLower, kUpper };
  std::vector<Status> status(n, Status::kLower);
  for (std::size_t var = 0; var < s; ++var) status[var] = Status::kUpper;

  std::vector<std::size_t> basis(m);
  std::vector<double> binv(m * m, 0.0);  // row-major basis inverse
  std::vector<double> xb(m);
  for (std::size_t i = 0; i < m; ++i) {
    basis[i] = s + i;
    status[s + i] = Status::kBasic;
    binv[i * m + i] = -1.0;  // the surplus basis matrix is -I
    double row_sum = 0.0;
    for (std::size_t var = 0; var < s; ++var) row_sum += column_entry(i, var);
    xb[i] = row_sum - t;
    if (std::abs(xb[i]) < detail::kRatioTieTol) xb[i] = 0.0;
    if (xb[i] < 0.0)
      throw std::logic_error("solve_bps: infeasible start despite row sums of 1");
  }

  const auto upper_bound = [&](std::size_t var) {
    return var < s ? 1.0 : std::numeric_limits<double>::infinity();
  };
  const auto cost = [&](std::size_t var) { return var < s ? 1.0 : 0.0; };

  std::vector<double> y(m), d(m);
  int iterations = 0;
  int passes = 0;
  const int max_passes = 1000 + 50 * static_cast<int>(n + m);

  while (true) {
    if (++passes > max_passes)
      throw std::logic_error("solve_bps: pivot limit exceeded");

    // Simplex multipliers y = c_B B^{-1}.
    for (std::size_t col = 0; col < m; ++col) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += cost(basis[i]) * binv[i * m + col];
      y[col] = acc;
    }

    // Entering variable: first eligible in the fixed order.
    std::size_t entering = n;
    double direction = 0.0;
    for (std::size_t pos = 0; pos < n && entering == n; ++pos) {
      const std::size_t var = order[pos];
      if (status[var] == Status::kBasic) continue;
      double reduced = cost(var);
      if (var < s) {
        for (std::size_t i = 0; i < m; ++i) reduced -= y[i] * column_entry(i, var);
      } else {
        reduced += y[var - s];
      }
      if (status[var] == Status::kLower && reduced < -detail::kPivotTol) {
        entering = var;
        direction = 1.0;
      } else if (status[var] == Status::kUpper && reduced > detail::kPivotTol) {
        entering = var;
        direction = -1.0;
      }
    }
    if (entering == n) break;  // optimal
    ++iterations;

    // d = B^{-1} A_entering.
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      if (entering < s) {
        for (std::size_t row = 0; row < m; ++row)
          acc += binv[i * m + row] * column_entry(row, entering);
      } else {
        acc = -binv[i * m + (entering - s)];
      }
      d[i] = acc;
    }

    // Ratio test: how far the entering variable can move. x_B[i] moves by
    // -delta_i * theta with delta_i = direction * d_i.
    const double theta_bound = upper_bound(entering);  // distance between bounds
    const bool bland_fallback = passes > max_passes / 2;

    const auto blocking_ratio = [&](std::size_t i, double& ratio,
                                    bool& to_upper) {
      const double delta = direction * d[i];
      if (delta > detail::kPivotTol) {
        ratio = std::max(0.0, xb[i]) / delta;
        to_upper = false;
        return true;
      }
      if (delta < -detail::kPivotTol && std::isfinite(upper_bound(basis[i]))) {
        ratio = std::max(0.0, upper_bound(basis[i]) - xb[i]) / (-delta);
        to_upper = true;
        return true;
      }
      return false;
    };

    // Pass one: the largest step that keeps every basic variable within
    // kFeasTol of its bounds.
    double theta_limit = theta_bound;
    for (std::size_t i = 0; i < m; ++i) {
      double ratio;
      bool to_upper;
      if (!blocking_ratio(i, ratio, to_upper)) continue;
      const double slack_step = ratio + detail::kFeasTol / std::abs(d[i]);
      theta_limit = std::min(theta_limit, slack_step);
    }

    // Pass two: among rows blocking within the limit, prefer the largest
    // pivot magnitude (Bland order on exact ties); under the fallback rule,
    // the smallest ratio with Bland-order ties.
    double theta_basic = std::numeric_limits<double>::infinity();
    std::size_t leaving = m;  // index into basis
    bool leaving_to_upper = false;
    double leaving_pivot = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double ratio;
      bool to_upper;
      if (!blocking_ratio(i, ratio, to_upper)) continue;
      bool take = false;
      if (bland_fallback) {
        if (ratio < theta_basic - detail::kRatioTieTol) {
          take = true;
        } else if (ratio <= theta_basic + detail::kRatioTieTol && leaving < m &&
                   order_pos[basis[i]] < order_pos[basis[leaving]]) {
          take = true;
        }
      } else {
        if (ratio > theta_limit) continue;
        const double pivot_size = std::abs(d[i]);
        if (leaving == m || pivot_size > leaving_pivot ||
            (pivot_size == leaving_pivot &&
             order_pos[basis[i]] < order_pos[basis[leaving]])) {
          take = true;
        }
      }
      if (take) {
        theta_basic = ratio;
        leaving = i;
        leaving_to_upper = to_upper;
        leaving_pivot = std::abs(d[i]);
      }
    }

    if (!std::isfinite(theta_bound) && !std::isfinite(theta_basic))
      throw std::logic_error("solve_bps: unblocked ray in a bounded program");

    if (theta_bound <= theta_basic + detail::kRatioTieTol) {
      // Bound flip: the entering variable crosses to its other bound without a
      // basis change. Objective strictly improves, so flips cannot cycle.
      for (std::size_t i = 0; i < m; ++i) xb[i] -= direction * d[i] * theta_bound;
      status[entering] =
          status[entering] == Status::kUpper ? Status::kLower : Status::kUpper;
    } else {
      if (leaving == m)
        throw std::logic_error("solve_bps: unbounded ray in a bounded program");
      const double theta = theta_basic;
      for (std::size_t i = 0; i < m; ++i) {
        if (i != leaving) xb[i] -= direction * d[i] * theta;
      }
      const double entering_start = status[entering] == Status::kUpper ? 1.0 : 0.0;
      const double entering_value = entering_start + direction * theta;

      // Eta update of the basis inverse.
      const double pivot = d[leaving];
      for (std::size_t col = 0; col < m; ++col) binv[leaving * m + col] /= pivot;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == leaving || d[i] == 0.0) continue;
        const double factor = d[i];
        for (std::size_t col = 0; col < m; ++col)
          binv[i * m + col] -= factor * binv[leaving * m + col];
      }

      status[basis[leaving]] = leaving_to_upper ? Status::kUpper : Status::kLower;
      basis[leaving] = entering;
      status[entering] = Status::kBasic;
      xb[leaving] = entering_value;
    }

    for (std::size_t i = 0; i < m; ++i) {
      if (std::abs(xb[i]) < detail::kRatioTieTol) xb[i] = 0.0;
    }
  }

  // Refinement: recompute the basic values through the final basis directly
  // from the original data, discarding drift accumulated in the eta updates.
  {
    std::vector<double> system(m * (m + 1), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t col = 0; col < m; ++col)
        system[i * (m + 1) + col] = column_entry(i, basis[col]);
      double rhs = t;
      for (std::size_t var = 0; var < s; ++var) {
        if (status[var] == Status::kUpper) rhs -= column_entry(i, var);
      }
      system[i * (m + 1) + m] = rhs;
    }
    bool singular = false;
    for (std::size_t col = 0; col < m && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t row = col + 1; row < m; ++row) {
        if (std::abs(system[row * (m + 1) + col]) >
            std::abs(system[piv * (m + 1) + col]))
          piv = row;
      }
      if (std::abs(system[piv * (m + 1) + col]) < 1e-12) {
        singular = true;
        break;
      }
      if (piv != col) {
        for (std::size_t c = 0; c <= m; ++c)
          std::swap(system[col * (m + 1) + c], system[piv * (m + 1) + c]);
      }
      for (std::size_t row = 0; row < m; ++row) {
        if (row == col) continue;
        const double factor =
            system[row * (m + 1) + col] / system[col * (m + 1) + col];
        if (factor == 0.0) continue;
        for (std::size_t c = col; c <= m; ++c)
          system[row * (m + 1) + c] -= factor * system[col * (m + 1) + c];
      }
    }
    if (!singular) {
      for (std::size_t col = 0; col < m; ++col)
        xb[col] = system[col * (m + 1) + m] / system[col * (m + 1) + col];
    }
  }

  std::vector<double> b(k_full, 0.0);
  for (std::size_t var = 0; var < s; ++var) {
    if (status[var] == Status::kUpper) b[support[var]] = 1.0;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < s) b[support[basis[i]]] = std::clamp(xb[i], 0.0, 1.0);
  }
  LpSolution solution =
      detail::assemble_solution(std::move(b), prediction, t, iterations);
  for (const auto& vertex : prediction.vertices()) {
    if (expected_coverage(solution.params, vertex) < t - kCoverageSlack)
      throw std::logic_error("solve_bps: solution failed feasibility verification");
  }
  return solution;
}

// m = 1 specialization: the program is a fractional knapsack. Labels are
// ranked by descending probability (ties by ascending index), filled with 1
// until the target is met, and the boundary label receives the fractional
// remainder (t - cum) / pi. Off-support labels stay at 0. Matches
// solve_bps on the same single-vertex input.
inline LpSolution solve_fractional_knapsack(const ProbabilityVector& dist,
                                            double t) {
  if (!std::isfinite(t) || t < 0.0 || t > 1.0)
    throw validation_error("solve_fractional_knapsack: t must lie in [0, 1]");
  const std::size_t k = dist.k();
  std::vector<std::size_t> rank(k);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });

  std::vector<double> b(k, 0.0);
  double cum = 0.0;
  int visited = 0;
  for (std::size_t idx : rank) {
    const double p = dist[idx];
    if (p <= 0.0) break;  // ranked order: only zeros remain
    if (t - cum <= 0.0) break;
    ++visited;
    b[idx] = std::min(1.0, (t - cum) / p);
    cum += p;
  }
  SecondOrderPrediction single({dist});
  return detail::assemble_solution(std::move(b), single, t, visited);
}

}  // namespace bps

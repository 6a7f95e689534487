#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bps/core.hpp"
#include "bps/rng.hpp"

namespace bps {

// Total variation distance: half the L1 distance, the standard identity of
// the max-over-subsets definition for discrete distributions.
inline double tv_distance(const ProbabilityVector& p, const ProbabilityVector& q) {
  if (p.k() != q.k()) throw validation_error("tv_distance: dimension mismatch");
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.k(); ++i) l1 += std::abs(p[i] - q[i]);
  return 0.5 * l1;
}

// All distributions within total variation distance d of a center.
struct TvBall {
  ProbabilityVector center;
  double radius = 0.0;

  TvBall(ProbabilityVector c, double d) : center(std::move(c)), radius(d) {
    if (!std::isfinite(d) || d < 0.0 || d > 1.0)
      throw validation_error("TV-ball radius must lie in [0, 1]");
  }
};

// Analytic corner points of the TV ball intersected with the simplex: for
// every ordered pair i != j, move mass d from label j to label i, scaled by
// the clipping factor eta = min(1, (1 - p_i)/d, p_j/d) that keeps the point
// on the simplex. Coinciding points are stored once; d = 0 yields {center}.
inline SecondOrderPrediction tv_ball_vertices(const TvBall& ball) {
  const ProbabilityVector& p = ball.center;
  const double d = ball.radius;
  if (d == 0.0) return SecondOrderPrediction({p});
  std::vector<ProbabilityVector> vertices;
  for (std::size_t i = 0; i < p.k(); ++i) {
    for (std::size_t j = 0; j < p.k(); ++j) {
      if (i == j) continue;
      const double eta = std::min({1.0, (1.0 - p[i]) / d, p[j] / d});
      std::vector<double> v = p.probs();
      v[i] += eta * d;
      v[j] -= eta * d;
      vertices.emplace_back(std::move(v));
    }
  }
  return SecondOrderPrediction(std::move(vertices));
}

// Convex combination of the stored vertices with the given weights
// (nonnegative, summing to 1 within 1e-9).
inline ProbabilityVector mix_vertices(const SecondOrderPrediction& prediction,
                                      const std::vector<double>& weights) {
  if (weights.size() != prediction.m())
    throw validation_error("mix_vertices: one weight per vertex required");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw validation_error("mix_vertices: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw validation_error("mix_vertices: weights must sum to 1");
  std::vector<double> mixed(prediction.k(), 0.0);
  for (std::size_t j = 0; j < prediction.m(); ++j)
    for (std::size_t i = 0; i < mixed.size(); ++i)
      mixed[i] += weights[j] * prediction.vertex(j)[i];
  return ProbabilityVector(std::move(mixed));
}

// A point of the ball-and-simplex intersection: a flat-Dirichlet-weighted
// combination of the clipped corner points. NOT uniform over the ball -- the
// law concentrates toward the center -- but membership is guaranteed without
// rejection loops even at small d, which is what the synthetic generators
// need.
inline ProbabilityVector sample_in_tv_ball(const TvBall& ball, Rng& rng) {
  if (ball.radius == 0.0) return ball.center;
  const SecondOrderPrediction vertices = tv_ball_vertices(ball);
  return mix_vertices(vertices, rng.dirichlet_flat(vertices.m()));
}

// Monte-Carlo upper estimate of the Tukey depth of p within the sample cloud:
// the minimum, over random unit directions s confined to the simplex tangent
// (sum-zero) hyperplane, of the fraction of samples strictly on the negative
// side of the hyperplane through p. Each draw is evaluated together with its
// negation, which caps the estimate at 1/2. A diagnostic, not a guarantee.
inline double estimate_tukey_depth(const ProbabilityVector& p,
                                   const SecondOrderPrediction& samples,
                                   int n_directions, Rng& rng) {
  if (n_directions < 1)
    throw validation_error("estimate_tukey_depth: need at least one direction");
  if (samples.k() != p.k())
    throw validation_error("estimate_tukey_depth: dimension mismatch");
  const std::size_t k = p.k();
  const std::size_t m = samples.m();

  double depth = 1.0;
  std::vector<double> direction(k);
  for (int it = 0; it < n_directions; ++it) {
    // Gaussian draw projected onto the sum-zero hyperplane; components along
    // the all-ones vector carry no information because sample-minus-p sums
    // to 0. Degenerate draws are redrawn.
    double norm = 0.0;
    do {
      double mean = 0.0;
      for (auto& c : direction) {
        c = rng.normal();
        mean += c;
      }
      mean /= static_cast<double>(k);
      norm = 0.0;
      for (auto& c : direction) {
        c -= mean;
        norm += c * c;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (auto& c : direction) c /= norm;

    std::size_t below = 0, above = 0;
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        dot += direction[i] * (samples.vertex(j)[i] - p[i]);
      if (dot < 0.0) ++below;
      if (dot > 0.0) ++above;
    }
    const double f = static_cast<double>(std::min(below, above)) /
                     static_cast<double>(m);
    depth = std::min(depth, f);
  }
  return depth;
}

}  // namespace bps

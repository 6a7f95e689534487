#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace bps {

// Deterministic random source used throughout the library.
//
// Wraps std::mt19937_64 (whose raw output sequence is pinned by the standard)
// and derives every variate through fixed arithmetic instead of the standard
// distributions, whose algorithms differ between standard-library
// implementations. Two builds seeded identically therefore produce identical
// streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    using u128 = unsigned __int128;
    return static_cast<std::size_t>((static_cast<u128>(engine_()) * n) >> 64);
  }

  // Exponential(1) via inverse CDF.
  double exponential() { return -std::log1p(-uniform()); }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    const double u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u));
    return r * std::cos(2.0 * 3.14159265358979323846 * v);
  }

  // Flat Dirichlet (all concentrations 1): normalized Exponential(1) draws.
  std::vector<double> dirichlet_flat(std::size_t k) {
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& x : w) {
      x = exponential();
      sum += x;
    }
    if (sum <= 0.0) {
      // All draws were exactly zero; put the mass somewhere well-defined.
      w.assign(k, 0.0);
      w[0] = 1.0;
      return w;
    }
    for (auto& x : w) x /= sum;
    return w;
  }

  // Index distributed according to `probs` (need not be exactly normalized).
  // Zero-probability entries are never returned.
  std::size_t categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty weights");
    const double u = uniform();
    double cum = 0.0;
    std::size_t last_positive = probs.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) {
        last_positive = i;
        cum += probs[i];
        if (u < cum) return i;
      }
    }
    if (last_positive == probs.size())
      throw std::invalid_argument("categorical: all weights zero");
    return last_positive;  // u landed in the rounding gap below 1
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bps

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bps/core.hpp"
#include "bps/rng.hpp"

using namespace bps;

TEST_CASE("probability vector accepts simplex points") {
  const ProbabilityVector p = make_probability_vector({0.5, 0.2, 0.3});
  REQUIRE(p.k() == 3);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.k(); ++i) sum += p[i];
  REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));

  const ProbabilityVector point_mass = make_probability_vector({1.0, 0.0});
  REQUIRE(point_mass[0] == 1.0);
  REQUIRE(point_mass[1] == 0.0);
}

TEST_CASE("probability vector rejects bad input") {
  REQUIRE_THROWS_AS(make_probability_vector({0.3, 0.3, 0.5}), validation_error);
  REQUIRE_THROWS_AS(make_probability_vector({1.0}), validation_error);
  REQUIRE_THROWS_AS(make_probability_vector({1.1, -0.1}), validation_error);
  REQUIRE_THROWS_AS(make_probability_vector({0.5, std::nan("")}),
                    validation_error);
}

TEST_CASE("probability vector clamps and renormalizes drifted input") {
  const ProbabilityVector p =
      make_probability_vector({0.5000001, 0.4999998, -0.0000001}, 1e-6);
  REQUIRE(p[2] == 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.k(); ++i) sum += p[i];
  REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("probability vector construction is idempotent") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(9);
    const ProbabilityVector once(rng.dirichlet_flat(k));
    const ProbabilityVector twice(once.probs());
    REQUIRE(twice == once);
  }
}

TEST_CASE("second-order prediction dedups near-identical vertices") {
  const ProbabilityVector a = make_probability_vector({0.5, 0.2, 0.3});
  const ProbabilityVector b = make_probability_vector({0.4, 0.3, 0.3});
  const SecondOrderPrediction pred({a, b, a, b});
  REQUIRE(pred.m() == 2);
  REQUIRE(pred.vertex(0) == a);
  REQUIRE(pred.vertex(1) == b);

  REQUIRE_THROWS_AS(SecondOrderPrediction({a, make_probability_vector({0.5, 0.5})}),
                    validation_error);
  REQUIRE_THROWS_AS(SecondOrderPrediction(std::vector<ProbabilityVector>{}),
                    validation_error);
}

TEST_CASE("vertex mean averages the stored vertices") {
  const SecondOrderPrediction pred({make_probability_vector({0.6, 0.4}),
                                    make_probability_vector({0.4, 0.6})});
  const ProbabilityVector mean = vertex_mean(pred);
  REQUIRE(mean[0] == 0.5);
  REQUIRE(mean[1] == 0.5);
}

TEST_CASE("bernoulli params validate their range") {
  REQUIRE_NOTHROW(BernoulliParams({0.0, 0.5, 1.0}));
  REQUIRE_THROWS_AS(BernoulliParams({0.5, 1.2}), validation_error);
  REQUIRE_THROWS_AS(BernoulliParams({-0.2, 0.5}), validation_error);
  REQUIRE_THROWS_AS(BernoulliParams({}), validation_error);
}

TEST_CASE("label set validates membership") {
  const LabelSet set({2, 0}, 3);
  REQUIRE(set.members() == std::vector<int>{0, 2});
  REQUIRE(set.contains(0));
  REQUIRE(!set.contains(1));
  REQUIRE_THROWS_AS(LabelSet({3}, 3), validation_error);
  REQUIRE_THROWS_AS(LabelSet({1, 1}, 3), validation_error);
}

TEST_CASE("sample_set honors degenerate parameters") {
  Rng rng(11);
  const BernoulliParams certain({1.0, 1.0, 0.0});
  const BernoulliParams never({0.0, 0.0, 0.0});
  for (int i = 0; i < 10; ++i) {
    REQUIRE(sample_set(certain, rng).members() == std::vector<int>{0, 1});
    REQUIRE(sample_set(never, rng).size() == 0);
  }
}

TEST_CASE("sample_set matches its Bernoulli frequencies") {
  Rng rng(202);
  const BernoulliParams b({1.0, 0.5, 1.0});
  const int draws = 10000;
  int label1 = 0;
  for (int i = 0; i < draws; ++i) {
    const LabelSet set = sample_set(b, rng);
    REQUIRE(set.contains(0));
    REQUIRE(set.contains(2));
    if (set.contains(1)) ++label1;
  }
  const double freq = static_cast<double>(label1) / draws;
  REQUIRE_THAT(freq, Catch::Matchers::WithinAbs(0.5, 0.02));
}

TEST_CASE("per-label inclusion frequencies track the parameters") {
  Rng gen(31);
  Rng draw_rng(32);
  const int draws = 100000;
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> raw(4);
    for (auto& x : raw) x = gen.uniform();
    const BernoulliParams b(raw);
    std::vector<int> hits(b.k(), 0);
    for (int i = 0; i < draws; ++i) {
      const LabelSet set = sample_set(b, draw_rng);
      for (int member : set.members()) ++hits[static_cast<std::size_t>(member)];
    }
    for (std::size_t j = 0; j < b.k(); ++j) {
      const double freq = static_cast<double>(hits[j]) / draws;
      const double bound =
          4.0 * std::sqrt(b[j] * (1.0 - b[j]) / draws) + 1e-3;
      REQUIRE(std::abs(freq - b[j]) < bound);
    }
  }
}

TEST_CASE("expected size sums the parameters and matches realized draws") {
  const BernoulliParams b({1.0, 0.5, 1.0});
  REQUIRE(expected_size(b) == 2.5);
  REQUIRE(expected_size(BernoulliParams({0.0, 0.0, 0.0})) == 0.0);
  REQUIRE(expected_size(BernoulliParams(std::vector<double>(10, 1.0))) == 10.0);

  Rng rng(404);
  const int draws = 100000;
  long long total = 0;
  for (int i = 0; i < draws; ++i)
    total += static_cast<long long>(sample_set(b, rng).size());
  const double mean_size = static_cast<double>(total) / draws;
  REQUIRE_THAT(mean_size, Catch::Matchers::WithinAbs(2.5, 0.02));
}

TEST_CASE("expected coverage is the dot product") {
  const BernoulliParams b({1.0, 0.5, 1.0});
  const ProbabilityVector p = make_probability_vector({0.5, 0.2, 0.3});
  REQUIRE_THAT(expected_coverage(b, p), Catch::Matchers::WithinAbs(0.9, 1e-12));

  const BernoulliParams full({1.0, 1.0, 1.0});
  REQUIRE_THAT(expected_coverage(full, p), Catch::Matchers::WithinAbs(1.0, 1e-12));

  const BernoulliParams miss({1.0, 0.0, 0.0});
  const ProbabilityVector other = make_probability_vector({0.0, 1.0, 0.0});
  REQUIRE(expected_coverage(miss, other) == 0.0);

  REQUIRE_THROWS_AS(expected_coverage(b, make_probability_vector({0.5, 0.5})),
                    validation_error);
}

TEST_CASE("one-hot coverage marginalizes exactly") {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(9);
    std::vector<double> raw(k);
    for (auto& x : raw) x = rng.uniform();
    const BernoulliParams b(raw);
    const std::size_t y = rng.uniform_index(k);
    std::vector<double> onehot(k, 0.0);
    onehot[y] = 1.0;
    REQUIRE(expected_coverage(b, ProbabilityVector(onehot)) == b[y]);
  }
}

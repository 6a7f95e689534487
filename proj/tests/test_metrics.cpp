#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bps/metrics.hpp"
#include "bps/rng.hpp"

using namespace bps;

TEST_CASE("entropy endpoints and closed forms") {
  // Uniform distributions whose arithmetic is exact in binary.
  for (const int k : {2, 4, 16}) {
    const ProbabilityVector u(std::vector<double>(k, 1.0 / k));
    REQUIRE(entropy(u) == 1.0);
  }
  // General K: exact up to a few ulps.
  for (int k = 2; k <= 12; ++k) {
    const ProbabilityVector u(std::vector<double>(static_cast<std::size_t>(k),
                                                  1.0 / k));
    REQUIRE_THAT(entropy(u), Catch::Matchers::WithinAbs(1.0, 1e-14));
  }

  REQUIRE(entropy(make_probability_vector({1.0, 0.0, 0.0})) == 0.0);

  const double expected = std::log(2.0) / std::log(3.0);
  REQUIRE_THAT(entropy(make_probability_vector({0.5, 0.5, 0.0})),
               Catch::Matchers::WithinAbs(expected, 1e-15));
}

namespace {

void enumerate_compositions(int total, int parts, std::vector<int>& prefix,
                            std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int head = 0; head <= total; ++head) {
    prefix.push_back(head);
    enumerate_compositions(total - head, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

TEST_CASE("entropy is permutation invariant and uniform-maximal") {
  // Step-0.1 grid on the simplex: compositions of 10 into K parts.
  for (int k = 2; k <= 4; ++k) {
    std::vector<std::vector<int>> grid;
    std::vector<int> prefix;
    enumerate_compositions(10, k, prefix, grid);

    const ProbabilityVector uniform(
        std::vector<double>(static_cast<std::size_t>(k), 1.0 / k));
    const double max_entropy = entropy(uniform);
    for (const auto& composition : grid) {
      std::vector<double> probs;
      for (int c : composition) probs.push_back(c / 10.0);
      const double h = entropy(ProbabilityVector(probs));
      REQUIRE(h <= max_entropy + 1e-12);

      const std::vector<double> reversed(probs.rbegin(), probs.rend());
      REQUIRE_THAT(entropy(ProbabilityVector(reversed)),
                   Catch::Matchers::WithinAbs(h, 1e-12));

      bool uniform_grid = true;
      for (int c : composition) uniform_grid &= c * k == 10;
      if (!uniform_grid) REQUIRE(h < max_entropy - 1e-12);
    }
  }
}

TEST_CASE("uncertainty decomposition endpoints") {
  const ProbabilityVector v = make_probability_vector({0.6, 0.3, 0.1});
  const UncertaintyTriple same =
      uncertainty_decomposition(SecondOrderPrediction({v}));
  REQUIRE(same.epistemic == 0.0);
  REQUIRE(same.total == same.aleatoric);

  const UncertaintyTriple split = uncertainty_decomposition(
      SecondOrderPrediction({make_probability_vector({1.0, 0.0}),
                             make_probability_vector({0.0, 1.0})}));
  REQUIRE(split.total == 1.0);
  REQUIRE(split.aleatoric == 0.0);
  REQUIRE(split.epistemic == 1.0);
}

TEST_CASE("epistemic uncertainty is nonnegative") {
  Rng rng(311);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(9);
    const std::size_t m = 1 + rng.uniform_index(6);
    std::vector<ProbabilityVector> vs;
    for (std::size_t j = 0; j < m; ++j) vs.emplace_back(rng.dirichlet_flat(k));
    const UncertaintyTriple triple =
        uncertainty_decomposition(SecondOrderPrediction(vs));
    REQUIRE(triple.epistemic >= -1e-12);
    REQUIRE_THAT(triple.epistemic,
                 Catch::Matchers::WithinAbs(triple.total - triple.aleatoric, 1e-12));
  }
}

TEST_CASE("summary metrics aggregate coverage and size") {
  const std::vector<BernoulliParams> params = {BernoulliParams({1.0, 0.0}),
                                               BernoulliParams({0.5, 0.5})};
  const std::vector<int> labels = {0, 1};
  const SummaryMetrics out = summary_metrics(params, labels);
  REQUIRE_THAT(out.marginal_coverage, Catch::Matchers::WithinAbs(0.75, 1e-12));
  REQUIRE_THAT(out.mean_set_size, Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE(!out.conditional_coverage.has_value());

  const std::vector<BernoulliParams> full = {BernoulliParams({1.0, 1.0}),
                                             BernoulliParams({1.0, 1.0})};
  const SummaryMetrics all = summary_metrics(full, labels);
  REQUIRE(all.marginal_coverage == 1.0);
  REQUIRE(all.mean_set_size == 2.0);

  // One-hot oracles reduce conditional coverage to the marginal, exactly.
  const std::vector<ProbabilityVector> oracles = {
      make_probability_vector({1.0, 0.0}), make_probability_vector({0.0, 1.0})};
  const SummaryMetrics cond = summary_metrics(params, labels, oracles);
  REQUIRE(cond.conditional_coverage.has_value());
  REQUIRE(*cond.conditional_coverage == cond.marginal_coverage);

  REQUIRE_THROWS_AS(summary_metrics(params, {0}), validation_error);
  REQUIRE_THROWS_AS(summary_metrics({}, {}), validation_error);
}

TEST_CASE("groupwise worst coverage takes the minimum group mean") {
  const std::vector<BernoulliParams> params = {BernoulliParams({1.0, 0.0}),
                                               BernoulliParams({0.5, 0.5}),
                                               BernoulliParams({1.0, 1.0})};
  const std::vector<int> labels = {0, 0, 1};

  const GroupwiseCoverage single =
      groupwise_worst_coverage(params, labels, {0, 0, 0});
  const SummaryMetrics summary = summary_metrics(params, labels);
  REQUIRE_THAT(single.worst,
               Catch::Matchers::WithinAbs(summary.marginal_coverage, 1e-12));

  const GroupwiseCoverage two =
      groupwise_worst_coverage(params, labels, {0, 1, 0});
  REQUIRE_THAT(two.per_group.at(0), Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(two.per_group.at(1), Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(two.worst, Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("worst group never beats the marginal") {
  Rng rng(313);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(40);
    std::vector<BernoulliParams> params;
    std::vector<int> labels, groups;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> raw(3);
      for (auto& x : raw) x = rng.uniform();
      params.emplace_back(raw);
      labels.push_back(static_cast<int>(rng.uniform_index(3)));
      groups.push_back(static_cast<int>(rng.uniform_index(4)));
    }
    const double worst = groupwise_worst_coverage(params, labels, groups).worst;
    const double marginal = summary_metrics(params, labels).marginal_coverage;
    REQUIRE(worst <= marginal + 1e-12);
  }
}

TEST_CASE("size strata round half-up") {
  const std::vector<BernoulliParams> params = {
      BernoulliParams({0.6, 0.6}),   // 1.2 -> 1
      BernoulliParams({0.4, 0.5}),   // 0.9 -> 1
      BernoulliParams({1.0, 1.0, 0.6})};  // 2.6 -> 3
  REQUIRE(ssc_groups(params) == std::vector<int>{1, 1, 3});

  REQUIRE(ssc_groups({BernoulliParams({1.0, 0.5})}) == std::vector<int>{2});
  REQUIRE(ssc_groups({BernoulliParams({1.0, 0.0})}) == std::vector<int>{1});
}

TEST_CASE("eusc bins are equal-frequency with index tie-break") {
  const EuscGroups two = eusc_groups({0.1, 0.2, 0.3, 0.4}, 2);
  REQUIRE(two.ids == std::vector<int>{0, 0, 1, 1});
  REQUIRE(two.bins_used == 2);
  REQUIRE(!two.reduced);

  const EuscGroups one = eusc_groups({0.5, 0.1, 0.9}, 1);
  REQUIRE(one.ids == std::vector<int>{0, 0, 0});

  const EuscGroups ties = eusc_groups({0.3, 0.3, 0.3, 0.3}, 2);
  REQUIRE(ties.ids == std::vector<int>{0, 0, 1, 1});

  const EuscGroups reduced = eusc_groups({0.1, 0.2}, 5);
  REQUIRE(reduced.reduced);
  REQUIRE(reduced.bins_used == 2);

  REQUIRE_THROWS_AS(eusc_groups({}, 3), validation_error);
  REQUIRE_THROWS_AS(eusc_groups({0.1}, 0), validation_error);
}

TEST_CASE("heatmap bins cover the observed ranges") {
  std::vector<UncertaintyTriple> triples(4);
  triples[0] = {0.5, 0.2, 0.3};
  triples[1] = {0.6, 0.25, 0.35};
  triples[2] = {0.9, 0.8, 0.1};
  triples[3] = {0.7, 0.65, 0.05};
  const std::vector<BernoulliParams> params(4, BernoulliParams({1.0, 0.5}));
  const std::vector<int> labels = {0, 1, 0, 1};

  const Heatmap map = au_eu_heatmap(triples, params, labels, 10);
  REQUIRE(map.bins == 10);
  REQUIRE(map.counts.size() == 100);
  int total = 0;
  for (int c : map.counts) total += c;
  REQUIRE(total == 4);
  int populated = 0;
  for (std::size_t c = 0; c < map.counts.size(); ++c) {
    if (map.counts[c] > 0) {
      ++populated;
      REQUIRE(std::isfinite(map.mean_coverage[c]));
    } else {
      REQUIRE(std::isnan(map.mean_coverage[c]));
    }
  }
  REQUIRE(populated >= 2);

  // All points in one cell when the ranges are degenerate.
  const std::vector<UncertaintyTriple> same(
      4, UncertaintyTriple{0.5, 0.25, 0.25});
  const Heatmap collapsed = au_eu_heatmap(same, params, labels, 10);
  REQUIRE(collapsed.count_at(0, 0) == 4);
  REQUIRE_THAT(collapsed.coverage_at(0, 0),
               Catch::Matchers::WithinAbs(0.75, 1e-12));

  // Equal-count mode balances the marginals.
  const Heatmap balanced =
      au_eu_heatmap(triples, params, labels, 2, BinningMode::kEqualCount);
  for (int a = 0; a < 2; ++a) {
    int row = 0;
    for (int e = 0; e < 2; ++e) row += balanced.count_at(a, e);
    REQUIRE(row == 2);
  }
}

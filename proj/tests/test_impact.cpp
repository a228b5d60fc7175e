#include <doctest.h>

#include <cmath>
#include <vector>

#include "coopcart/impact.hpp"
#include "coopcart/rng.hpp"

using namespace coopcart;

TEST_CASE("impact_factor: pinned examples") {
  CHECK(impact_factor(0, {2.0, 2.0}) == 0.5);
  CHECK(impact_factor(1, {2.0, 2.0}) == 0.5);
  CHECK(impact_factor(0, {8.0, -2.0}) == 0.8);
  CHECK(impact_factor(1, {8.0, -2.0}) == doctest::Approx(0.2).epsilon(1e-15));
  // Nobody acts: equal accountability.
  CHECK(impact_factor(0, {0.0, 0.0}) == 0.5);
  CHECK(impact_factor(2, {0.0, 0.0, 0.0, 0.0}) == 0.25);
}

TEST_CASE("impact_factor: partition of unity and scale invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(4);
    JointControl u(n);
    for (double& v : u) v = rng.uniform(-10.0, 10.0);

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double impact = impact_factor(i, u);
      CHECK(impact >= 0.0);
      CHECK(impact <= 1.0);
      sum += impact;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    for (double scale : {-3.0, 0.5, 7.25}) {
      JointControl scaled(n);
      for (std::size_t i = 0; i < n; ++i) scaled[i] = scale * u[i];
      for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(impact_factor(i, scaled) - impact_factor(i, u)) < 1e-12);
    }
  }
}

TEST_CASE("coordination_coefficient: sign of agreement") {
  CHECK(coordination_coefficient(0, {1.0, -0.5}) == -1);
  CHECK(coordination_coefficient(0, {3.0, 2.0}) == 1);
  CHECK(coordination_coefficient(0, {1.0, 0.0}) == 0);
  CHECK(coordination_coefficient(0, {0.0, 4.0}) == 0);
  // Partner mean decides: for agent 0 with partners (4, -4) the mean is 0.
  CHECK(coordination_coefficient(0, {2.0, 4.0, -4.0}) == 0);
  CHECK(coordination_coefficient(0, {2.0, 4.0, -2.0}) == 1);

  SUBCASE("odd in the agent's own control") {
    Rng rng(37);
    for (int trial = 0; trial < 500; ++trial) {
      JointControl u = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
      const std::size_t agent = rng.uniform_index(3);
      const int sign = coordination_coefficient(agent, u);
      u[agent] = -u[agent];
      const int flipped = coordination_coefficient(agent, u);
      if (sign == 0)
        CHECK(flipped == 0);
      else
        CHECK(flipped == -sign);
    }
  }
}

TEST_CASE("select_tier: complete tier table with boundaries") {
  const ImpactParams params;  // thresholds 0.8 / 0.2, rates 5e-4 / 2e-4 / 5e-5

  const auto check = [&](double impact, int sign, ImpactTier tier, double rate,
                         bool simulate) {
    const TierSelection s = select_tier(impact, sign, params);
    CHECK(s.tier == tier);
    CHECK(s.learning_rate == rate);
    CHECK(s.simulate_coordination == simulate);
  };

  check(0.9, -1, ImpactTier::kHigh, params.high_rate, false);
  check(0.9, 1, ImpactTier::kHigh, params.high_rate, false);
  check(1.0, 0, ImpactTier::kHigh, params.high_rate, false);
  check(0.5, 1, ImpactTier::kMidCooperative, params.high_rate, false);
  check(0.5, 0, ImpactTier::kMidCooperative, params.high_rate, false);
  check(0.5, -1, ImpactTier::kMidConflicting, params.mid_rate, true);
  check(0.1, -1, ImpactTier::kLow, params.low_rate, false);
  check(0.1, 1, ImpactTier::kLow, params.low_rate, false);
  check(0.0, -1, ImpactTier::kLow, params.low_rate, false);
  // Both boundaries belong to the middle tier.
  check(params.high_threshold, 1, ImpactTier::kMidCooperative, params.high_rate, false);
  check(params.high_threshold, -1, ImpactTier::kMidConflicting, params.mid_rate, true);
  check(params.low_threshold, 1, ImpactTier::kMidCooperative, params.high_rate, false);
  check(params.low_threshold, -1, ImpactTier::kMidConflicting, params.mid_rate, true);

  SUBCASE("selection is total over a dense grid") {
    for (int i = 0; i <= 1000; ++i) {
      const double impact = i / 1000.0;
      for (int sign : {-1, 0, 1}) {
        const TierSelection s = select_tier(impact, sign, params);
        ImpactTier expected;
        if (impact > params.high_threshold)
          expected = ImpactTier::kHigh;
        else if (impact >= params.low_threshold)
          expected = sign >= 0 ? ImpactTier::kMidCooperative : ImpactTier::kMidConflicting;
        else
          expected = ImpactTier::kLow;
        CHECK(s.tier == expected);
        CHECK(s.simulate_coordination == (expected == ImpactTier::kMidConflicting));
      }
    }
  }
}

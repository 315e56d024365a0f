// Copyright 2026 The dpfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpfs/accountant.hpp"

#include <cmath>

#include "doctest.h"
#include "dpfs/error.hpp"
#include "dpfs/rng.hpp"

namespace dpfs {
namespace {

TEST_CASE("gaussian curve matches the closed form at eps=0, m=1") {
  // Phi(0.5) - Phi(-0.5) = 2 * Phi(0.5) - 1, evaluated with erfc.
  const double expected = std::erfc(-0.5 / std::sqrt(2.0)) - 1.0;
  CHECK(std::abs(expected - 0.3829249225480262) < 1e-12);
  CHECK(std::abs(GaussianCurveDelta(0.0, 1.0) - expected) < 1e-12);
}

TEST_CASE("gaussian curve vanishes with infinite noise") {
  CHECK(GaussianCurveDelta(0.5, 1e6) < 1e-12);
  CHECK(GaussianCurveDelta(3.0, 1e4) < 1e-12);
}

TEST_CASE("gaussian curve is non-increasing in epsilon and noise") {
  double prev = 1.0;
  for (double eps = -1.0; eps <= 6.0; eps += 0.25) {
    const double delta = GaussianCurveDelta(eps, 0.8);
    CHECK(delta <= prev + 1e-15);
    CHECK(delta >= 0.0);
    CHECK(delta <= 1.0);
    prev = delta;
  }
  prev = 1.0;
  for (double m = 0.2; m <= 8.0; m *= 1.5) {
    const double delta = GaussianCurveDelta(1.0, m);
    CHECK(delta <= prev + 1e-15);
    prev = delta;
  }
}

TEST_CASE("pure-DP amplification") {
  CHECK(AmplifyPureEpsilon(1.7, 1.0) == doctest::Approx(1.7).epsilon(1e-12));
  // 1 + 0.5 * (3 - 1) = 2.
  CHECK(std::abs(AmplifyPureEpsilon(std::log(3.0), 0.5) - std::log(2.0)) <
        1e-12);
  CHECK(AmplifyPureEpsilon(5.0, 0.0) == 0.0);
}

TEST_CASE("pure linear composition") {
  CHECK(PureLinearEpsilon(0.37, 1.0, 1) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(std::abs(PureLinearEpsilon(0.1, 1.0, 10) - 1.0) < 1e-12);
}

TEST_CASE("two-point PLD composed delta vanishes at the support bound") {
  const double grid = 1e-4;
  const double eps_step = 0.1;
  const int steps = 10;
  const auto pld = PrivacyLossDistribution::PureDp(eps_step, grid);
  const auto composed = pld.SelfCompose(steps);
  // The composed loss cannot exceed steps * (eps_step rounded up to grid).
  const double support_max =
      steps * std::ceil(eps_step / grid) * grid;
  CHECK(composed.DeltaForEpsilon(support_max) == 0.0);
  CHECK(composed.DeltaForEpsilon(0.0) > 0.0);
}

TEST_CASE("subsampled gaussian PLD requires a sane grid") {
  CHECK_THROWS_AS(PrivacyLossDistribution::SubsampledGaussian(1.0, 0.5, 0.5),
                  ConfigError);
  CHECK_THROWS_AS(PrivacyLossDistribution::SubsampledGaussian(1.0, 0.5, -1.0),
                  ConfigError);
}

TEST_CASE("gamma=0 PLD is a point mass at zero loss") {
  const auto pld = PrivacyLossDistribution::SubsampledGaussian(1.0, 0.0, 1e-4);
  CHECK(pld.DeltaForEpsilon(0.0) == 0.0);
  CHECK(pld.DeltaForEpsilon(1.0) == 0.0);
  const auto composed = pld.SelfCompose(50);
  CHECK(composed.DeltaForEpsilon(0.5) == 0.0);
}

TEST_CASE("gamma=1 PLD reproduces the analytic curve within 1e-4") {
  const double m = 0.51;
  const auto pld = PrivacyLossDistribution::SubsampledGaussian(m, 1.0, 1e-4);
  for (double eps = 0.0; eps <= 10.0; eps += 0.25) {
    const double analytic = GaussianCurveDelta(eps, m);
    const double numeric = pld.DeltaForEpsilon(eps);
    CHECK(std::abs(numeric - analytic) < 1e-4);
    // Pessimistic rounding never undershoots by more than round-off.
    CHECK(numeric >= analytic - 1e-9);
  }
}

TEST_CASE("T-fold gamma=1 composition equals the m/sqrt(T) single shot") {
  const int steps = 4;
  const double m = 2.0;
  const double grid = 1e-5;
  const auto composed =
      PrivacyLossDistribution::SubsampledGaussian(m, 1.0, grid)
          .SelfCompose(steps);
  const double m_single = m / std::sqrt(static_cast<double>(steps));
  for (double eps = 0.0; eps <= 4.0; eps += 0.5) {
    const double analytic = GaussianCurveDelta(eps, m_single);
    CHECK(std::abs(composed.DeltaForEpsilon(eps) - analytic) < 1e-4);
  }
}

TEST_CASE("one composition step is the identity") {
  const auto pld = PrivacyLossDistribution::SubsampledGaussian(1.0, 0.3, 1e-3);
  const auto same = pld.SelfCompose(1);
  REQUIRE(same.branches().size() == pld.branches().size());
  for (size_t b = 0; b < pld.branches().size(); ++b) {
    CHECK(same.branches()[b].min_index == pld.branches()[b].min_index);
    CHECK(same.branches()[b].masses == pld.branches()[b].masses);
    CHECK(same.branches()[b].infinity_mass == pld.branches()[b].infinity_mass);
  }
}

TEST_CASE("staged composition agrees with direct composition") {
  const auto pld = PrivacyLossDistribution::SubsampledGaussian(0.8, 0.2, 1e-3);
  const auto staged = pld.SelfCompose(2).ComposeWith(pld.SelfCompose(3));
  const auto direct = pld.SelfCompose(5);
  for (double eps = 0.0; eps <= 6.0; eps += 0.5) {
    CHECK(std::abs(staged.DeltaForEpsilon(eps) - direct.DeltaForEpsilon(eps)) <
          1e-8);
  }
}

TEST_CASE("composed delta curves are monotone and bounded") {
  const auto composed =
      PrivacyLossDistribution::SubsampledGaussian(0.6, 0.05, 1e-3)
          .SelfCompose(20);
  double prev = 1.0;
  for (double eps = 0.0; eps <= 8.0; eps += 0.2) {
    const double delta = composed.DeltaForEpsilon(eps);
    CHECK(delta >= 0.0);
    CHECK(delta <= 1.0);
    CHECK(delta <= prev + 1e-15);
    prev = delta;
  }
}

TEST_CASE("delta approaches the infinity mass as epsilon grows") {
  auto pld = PrivacyLossDistribution::SubsampledGaussian(0.7, 0.4, 1e-3);
  double max_loss = 0.0;
  for (const auto& branch : pld.branches()) {
    max_loss = std::max(max_loss, branch.max_index() * pld.grid_width());
  }
  double inf_mass = 0.0;
  for (const auto& branch : pld.branches()) {
    inf_mass = std::max(inf_mass, branch.infinity_mass);
  }
  CHECK(std::abs(pld.DeltaForEpsilon(max_loss + 1.0) - inf_mass) < 1e-12);
}

// Monte Carlo oracle for the remove-direction subsampled Gaussian: draw the
// privacy loss under the mixture and estimate the hockey-stick mean.
struct McEstimate {
  double mean;
  double stderr_;
};

McEstimate McDelta(double m, double gamma, int steps, double eps, int samples,
                   uint64_t seed) {
  RandomStream rng(seed);
  long double acc = 0.0L, acc2 = 0.0L;
  for (int s = 0; s < samples; ++s) {
    double loss = 0.0;
    for (int t = 0; t < steps; ++t) {
      const bool shifted = rng.Uniform() < gamma;
      const double x = (shifted ? 1.0 : 0.0) + rng.Normal(m);
      loss += std::log1p(gamma * std::expm1((2.0 * x - 1.0) / (2.0 * m * m)));
    }
    const double f = loss > eps ? 1.0 - std::exp(eps - loss) : 0.0;
    acc += f;
    acc2 += f * f;
  }
  const double n = static_cast<double>(samples);
  const double mean = static_cast<double>(acc) / n;
  const double var = static_cast<double>(acc2) / n - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / n)};
}

TEST_CASE("PLD matches a Monte Carlo hockey-stick estimate") {
  struct Case {
    double m, gamma, eps;
    int steps;
  };
  const Case cases[] = {
      {1.0, 1.0, 0.5, 1},
      {1.0, 1.0, 1.0, 3},
      {1.0, 0.1, 0.2, 2},
      {0.7, 0.1, 0.1, 3},
  };
  for (const Case& c : cases) {
    const auto composed =
        PrivacyLossDistribution::SubsampledGaussian(c.m, c.gamma, 1e-5)
            .SelfCompose(c.steps);
    const double numeric =
        composed.DeltaForEpsilon(c.eps, PldDirection::kRemove);
    const McEstimate mc = McDelta(c.m, c.gamma, c.steps, c.eps, 1000000, 7);
    CHECK(std::abs(numeric - mc.mean) <
          3.0 * mc.stderr_ + 2e-4);  // grid pessimism allowance
  }
}

TEST_CASE("epsilon-for-delta inverts the curve") {
  const auto composed =
      PrivacyLossDistribution::SubsampledGaussian(0.9, 0.1, 1e-4)
          .SelfCompose(10);
  const double delta = 1e-5;
  const double eps = composed.EpsilonForDelta(delta);
  CHECK(composed.DeltaForEpsilon(eps) <= delta * (1.0 + 1e-6));
  CHECK(composed.DeltaForEpsilon(eps * 0.98) > delta);
  CHECK(composed.EpsilonForDelta(1.0) == 0.0);
}

TEST_CASE("calibration meets the budget on the safe side") {
  const PrivacyBudget target{1.0, 1e-5};
  const double gamma = 0.1;
  const int steps = 3;
  const double sigma =
      CalibrateSigma(target, gamma, steps, MechanismKind::kGaussian);
  const double achieved =
      ComposedDelta({sigma, gamma, steps, MechanismKind::kGaussian}, 1.0);
  CHECK(achieved <= target.delta);
  // Tight: a couple of tolerance steps below must violate the budget.
  const double below = ComposedDelta(
      {sigma * (1.0 - 5e-3), gamma, steps, MechanismKind::kGaussian}, 1.0);
  CHECK(below > target.delta * 0.8);
}

TEST_CASE("halving the delta target never decreases sigma") {
  const double gamma = 0.05;
  const int steps = 5;
  double prev_sigma = 0.0;
  for (double delta = 1e-3; delta >= 1e-7; delta /= 2.0) {
    const double sigma = CalibrateSigma({2.0, delta}, gamma, steps,
                                        MechanismKind::kGaussian);
    CHECK(sigma >= prev_sigma - 1e-12);
    prev_sigma = sigma;
  }
}

TEST_CASE("an unreachable budget raises a calibration error") {
  CHECK_THROWS_AS(
      CalibrateSigma({0.1, 1e-30}, 1.0, 2, MechanismKind::kGaussian),
      CalibrationError);
}

TEST_CASE("rnm calibration solves the linear composition in closed form") {
  const double gamma = 0.2;
  const int steps = 7;
  const double sigma =
      CalibrateSigma({3.0, 0.0}, gamma, steps, MechanismKind::kRnmExponential);
  CHECK(std::abs(PureLinearEpsilon(sigma, gamma, steps) - 3.0) < 1e-9);
}

TEST_CASE("rnm calibration with positive delta is safe and no looser") {
  const PrivacyBudget target{2.0, 1e-6};
  const double gamma = 0.2;
  const int steps = 7;
  const double sigma = CalibrateSigma(target, gamma, steps,
                                      MechanismKind::kRnmExponential);
  const double achieved = ComposedDelta(
      {sigma, gamma, steps, MechanismKind::kRnmExponential}, target.epsilon);
  CHECK(achieved <= target.delta);
  // The approximate-DP composition admits at least the pure-DP sigma, up
  // to the pessimistic grid rounding (one grid cell per composition step).
  const double pure_sigma =
      CalibrateSigma({2.0, 0.0}, gamma, steps, MechanismKind::kRnmExponential);
  CHECK(sigma >= pure_sigma - steps * 1e-4 - 1e-3 * pure_sigma);
}

}  // namespace
}  // namespace dpfs

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
//
// Numerical (epsilon, delta) accounting for the generation mechanisms.
//
// The Gaussian path tracks the privacy curve of the Poisson-subsampled
// Gaussian mechanism through a discretized privacy-loss distribution (PLD)
// under add/remove adjacency; T-step guarantees come from FFT
// self-convolution of the PLD. The report-noisy-max path is pure DP per
// step; its amplified per-step epsilon composes either linearly (delta = 0)
// or through the same PLD machinery via the two-point dominating pair.
//
// All discretization is pessimistic: privacy losses are rounded up to the
// grid, truncated upper tails move to the infinity mass, and truncated
// lower tails are lumped at the truncation boundary, so every reported
// delta is an upper bound on the true delta.

#ifndef DPFS_ACCOUNTANT_H_
#define DPFS_ACCOUNTANT_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace dpfs {

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  // Throws ConfigError unless epsilon >= 0 and delta in [0, 1].
  void Validate() const;
};

enum class PldDirection { kAdd, kRemove, kWorstOfBoth };

std::string ToString(PldDirection direction);

struct PldOptions {
  // Probability mass allowed to be truncated (and accounted pessimistically)
  // per discretization or composition step.
  double truncation_mass_budget = 1e-10;
  // Grids larger than this many points trigger an automatic regrid to a
  // coarser (still pessimistic) grid instead of silently dropping mass.
  int64_t max_grid_points = int64_t{1} << 26;
  // Per-step losses beyond +/- this bound are truncated pessimistically
  // (upper tail to the infinity mass, lower tail lumped at the floor). Far
  // above any queried epsilon, so it only bounds pathological grids that
  // appear when probing very small noise values.
  double loss_ceiling = 64.0;
};

// Discretized privacy-loss distribution on the grid {i * grid_width}.
// Holds one branch per adjacency direction; delta queries take the worst
// branch so downstream numbers remain valid for both directions.
class PrivacyLossDistribution {
 public:
  struct Branch {
    PldDirection direction = PldDirection::kRemove;
    int64_t min_index = 0;          // loss of masses[0] is min_index * grid
    std::vector<double> masses;     // sub-probability; >= 0
    double infinity_mass = 0.0;

    double TotalMass() const;
    int64_t max_index() const {
      return min_index + static_cast<int64_t>(masses.size()) - 1;
    }
  };

  // PLD of the Poisson-subsampled Gaussian mechanism with the given noise
  // multiplier (noise stddev / l2 sensitivity) and sampling rate gamma in
  // [0, 1]. Both add and remove branches are built. grid_width must be
  // positive and at most 1e-2.
  static PrivacyLossDistribution SubsampledGaussian(
      double noise_multiplier, double gamma, double grid_width,
      const PldOptions& options = {});

  // Two-point PLD of the dominating pair of a pure epsilon-DP mechanism:
  // loss +epsilon with probability e^eps/(1+e^eps), -epsilon otherwise.
  // The pair is symmetric, so the single branch covers both directions.
  static PrivacyLossDistribution PureDp(double epsilon, double grid_width,
                                        const PldOptions& options = {});

  // Point mass at privacy loss zero (the identity under composition).
  static PrivacyLossDistribution Identity(double grid_width);

  // steps-fold self-composition (convolution of each branch with itself).
  // steps == 1 returns *this unchanged.
  PrivacyLossDistribution SelfCompose(int steps,
                                      const PldOptions& options = {}) const;

  // Composition with another PLD on the same grid; branches are matched by
  // direction and must agree in shape.
  PrivacyLossDistribution ComposeWith(const PrivacyLossDistribution& other,
                                      const PldOptions& options = {}) const;

  // Hockey-stick divergence of the discretized curve:
  //   delta(eps) = infinity_mass + sum_l max(0, 1 - e^(eps - l)) * mass(l),
  // maximized over branches. Valid for any real epsilon.
  double DeltaForEpsilon(double epsilon) const;

  // Same, restricted to one direction. Throws if the branch is absent.
  double DeltaForEpsilon(double epsilon, PldDirection direction) const;

  // Smallest epsilon >= 0 with DeltaForEpsilon(epsilon) <= delta, or +inf
  // when delta is below the composed infinity mass.
  double EpsilonForDelta(double delta) const;

  double grid_width() const { return grid_width_; }
  const std::vector<Branch>& branches() const { return branches_; }

 private:
  PrivacyLossDistribution(double grid_width, std::vector<Branch> branches);

  double grid_width_ = 0.0;
  std::vector<Branch> branches_;
};

// Privacy curve of the (unamplified) Gaussian mechanism:
//   delta = Phi(1/(2m) - eps*m) - e^eps * Phi(-1/(2m) - eps*m),
// with m the noise multiplier. Exact up to floating-point error of the
// normal CDF; epsilon may be any real.
double GaussianCurveDelta(double epsilon, double noise_multiplier);

// Amplification by subsampling for a pure-DP step:
//   eps' = log(1 + gamma * (e^eps - 1)).
double AmplifyPureEpsilon(double epsilon, double gamma);
// Companion delta amplification: delta' = gamma * delta.
double AmplifyDelta(double delta, double gamma);

// Pure-DP linear composition of the report-noisy-max variant: sigma is the
// per-step epsilon before amplification; the total (delta = 0) guarantee is
//   steps * log(1 + gamma * (e^sigma - 1)).
double PureLinearEpsilon(double sigma, double gamma, int steps);

enum class MechanismKind { kGaussian, kRnmExponential };

std::string ToString(MechanismKind kind);

struct AccountantParams {
  double sigma = 0.0;     // noise multiplier (Gaussian) or per-step eps (RNM)
  double gamma = 1.0;     // subsampling rate MN / pool size
  int steps = 1;          // composition count
  MechanismKind kind = MechanismKind::kGaussian;

  void Validate() const;
};

struct CalibrationOptions {
  double sigma_low = 0.05;    // Gaussian search bracket
  double sigma_high = 64.0;
  double relative_tolerance = 1e-3;
  double grid_width = 1e-4;          // grid for the verification pass
  double search_grid_width = 1e-3;   // coarser grid used while bracketing
  PldOptions pld;
};

// Smallest (within relative_tolerance) noise parameter meeting the target
// budget after steps-fold composition at sampling rate gamma. For the
// Gaussian kind the returned sigma is on the safe side of the bracket: the
// composed curve at the default grid satisfies delta(target.epsilon) <=
// target.delta. For the RNM kind sigma is the per-step epsilon: with
// target.delta == 0 it is solved in closed form from the linear
// composition, otherwise from the composed two-point PLD (again safe side).
// Throws CalibrationError, reporting the bracket, when the budget cannot be
// met within the bracket.
double CalibrateSigma(const PrivacyBudget& target, double gamma, int steps,
                      MechanismKind kind, const CalibrationOptions& options = {});

// Composed delta at target epsilon for the given parameters (forward
// accounting used by calibration and reports).
double ComposedDelta(const AccountantParams& params, double epsilon,
                     double grid_width = 1e-4, const PldOptions& options = {});

// Writes the composed curve as CSV with header
// epsilon,delta,direction,grid_width,steps,gamma,sigma over a uniform
// epsilon grid.
void WriteCurveCsv(std::ostream& out, const AccountantParams& params,
                   double epsilon_min, double epsilon_max, int points,
                   double grid_width = 1e-4);

}  // namespace dpfs

#endif  // DPFS_ACCOUNTANT_H_

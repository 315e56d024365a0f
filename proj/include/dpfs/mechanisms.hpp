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
// Per-token private aggregation of next-token distributions.
//
// Noise-parameter semantics differ by mechanism:
//  * Gaussian: sigma is a noise multiplier; larger sigma means more privacy.
//  * RNM-exponential: sigma is the per-step pure-DP epsilon before
//    subsampling; larger sigma means LESS privacy.

#ifndef DPFS_MECHANISMS_H_
#define DPFS_MECHANISMS_H_

#include <vector>

#include "dpfs/accountant.hpp"
#include "dpfs/rng.hpp"

namespace dpfs {

// Probability distribution over a token vocabulary: non-negative entries
// summing to 1 within kProbVectorSumTolerance.
using ProbVector = std::vector<double>;

inline constexpr double kProbVectorSumTolerance = 1e-9;

// Throws ConfigError if v is not a probability vector.
void ValidateProbVector(const ProbVector& v);

enum class SamplingScheme { kWithoutReplacement, kPoisson };

// Parameter bundle driving one DP generation.
struct MechanismConfig {
  MechanismKind kind = MechanismKind::kGaussian;
  double sigma = 0.0;   // see the semantics note above
  int subset_count = 1;  // M
  int subset_size = 1;   // N
  bool rvp = false;      // reduce vocabulary publicly
  int rvp_top_k = 100;   // K, used only when rvp is set
  int max_tokens = 1;    // T_max
  SamplingScheme sampling = SamplingScheme::kWithoutReplacement;

  // Throws ConfigError on an invalid combination. vocab_size < 0 skips the
  // K <= |V| check (for backends whose vocabulary grows on demand, K is
  // checked against the provider truncation width instead).
  void Validate(long vocab_size = -1) const;
};

// Zeroes v outside `allowed` and rescales the rest to sum to 1. Throws
// DegenerateSupportError when v has no mass on `allowed`.
ProbVector RestrictAndRenormalize(const ProbVector& v,
                                  const std::vector<int>& allowed);

// (1/M) * (sum_i vectors[i] + N(0, 2 sigma^2 I)). Noise is drawn in
// coordinate order; sigma == 0 draws nothing. The returned scores are raw
// (no clipping): monotone shifts cannot change the argmax but clipping
// could, so callers see exactly what was computed.
std::vector<double> GaussianAggregate(const std::vector<ProbVector>& vectors,
                                      double sigma, RandomStream& rng);

// Report-noisy-max: each vector is scaled by its own maximum (so the
// per-vector range is [0, 1] with max exactly 1), the scaled vectors are
// summed, i.i.d. Expo(rate = sigma/2) noise is added per coordinate, and
// only the argmax index is returned; the noisy scores are never exposed.
// Ties break to the lowest index.
int RnmExpoSelect(const std::vector<ProbVector>& vectors, double sigma,
                  RandomStream& rng);

// Argmax of v over `allowed`, ties broken by lowest index. Throws
// ConfigError when `allowed` is empty or out of range.
int ArgmaxTiebreak(const std::vector<double>& v,
                   const std::vector<int>& allowed);

// Argmax over all coordinates, lowest index on ties.
int ArgmaxTiebreak(const std::vector<double>& v);

}  // namespace dpfs

#endif  // DPFS_MECHANISMS_H_

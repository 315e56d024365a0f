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

#include "dpfs/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dpfs/error.hpp"

namespace dpfs {

void ValidateProbVector(const ProbVector& v) {
  if (v.empty()) throw ConfigError("probability vector is empty");
  double sum = 0.0;
  for (double p : v) {
    if (!(p >= 0.0)) throw ConfigError("probability vector has negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbVectorSumTolerance) {
    std::ostringstream msg;
    msg << "probability vector sums to " << sum << ", expected 1";
    throw ConfigError(msg.str());
  }
}

void MechanismConfig::Validate(long vocab_size) const {
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (kind == MechanismKind::kRnmExponential && sigma == 0.0) {
    throw ConfigError("rnm-exponential requires sigma > 0 (per-step epsilon)");
  }
  if (subset_count < 1) throw ConfigError("subset count M must be >= 1");
  if (subset_size < 1) throw ConfigError("subset size N must be >= 1");
  if (max_tokens < 1) throw ConfigError("max tokens T_max must be >= 1");
  if (rvp) {
    if (rvp_top_k < 1) throw ConfigError("RVP K must be >= 1");
    if (vocab_size >= 0 && rvp_top_k > vocab_size) {
      throw ConfigError("RVP K exceeds the vocabulary size");
    }
  }
}

ProbVector RestrictAndRenormalize(const ProbVector& v,
                                  const std::vector<int>& allowed) {
  double support_mass = 0.0;
  for (int j : allowed) {
    if (j < 0 || j >= static_cast<int>(v.size())) {
      throw ConfigError("restriction index out of range");
    }
    support_mass += v[j];
  }
  if (!(support_mass > 0.0)) {
    throw DegenerateSupportError(
        "distribution carries no mass on the allowed token set");
  }
  ProbVector out(v.size(), 0.0);
  for (int j : allowed) out[j] = v[j] / support_mass;
  return out;
}

std::vector<double> GaussianAggregate(const std::vector<ProbVector>& vectors,
                                      double sigma, RandomStream& rng) {
  if (vectors.empty()) throw ConfigError("no vectors to aggregate");
  const size_t dim = vectors.front().size();
  for (const ProbVector& v : vectors) {
    if (v.size() != dim) {
      throw ConfigError("aggregated vectors must share one dimension");
    }
  }
  const double inv_m = 1.0 / static_cast<double>(vectors.size());
  std::vector<double> out(dim, 0.0);
  for (const ProbVector& v : vectors) {
    for (size_t j = 0; j < dim; ++j) out[j] += v[j];
  }
  if (sigma > 0.0) {
    const double noise_stddev = std::sqrt(2.0) * sigma;
    for (size_t j = 0; j < dim; ++j) out[j] += rng.Normal(noise_stddev);
  }
  for (size_t j = 0; j < dim; ++j) out[j] *= inv_m;
  return out;
}

int RnmExpoSelect(const std::vector<ProbVector>& vectors, double sigma,
                  RandomStream& rng) {
  if (vectors.empty()) throw ConfigError("no vectors to aggregate");
  if (!(sigma > 0.0)) throw ConfigError("rnm requires sigma > 0");
  const size_t dim = vectors.front().size();
  std::vector<double> scores(dim, 0.0);
  for (const ProbVector& v : vectors) {
    if (v.size() != dim) {
      throw ConfigError("aggregated vectors must share one dimension");
    }
    const double max_entry = *std::max_element(v.begin(), v.end());
    if (!(max_entry > 0.0)) {
      throw DegenerateSupportError("rnm input vector is all zero");
    }
    for (size_t j = 0; j < dim; ++j) scores[j] += v[j] / max_entry;
  }
  const double rate = sigma / 2.0;
  int best = 0;
  double best_score = -1.0;
  for (size_t j = 0; j < dim; ++j) {
    const double noisy = scores[j] + rng.Exponential(rate);
    if (noisy > best_score) {
      best_score = noisy;
      best = static_cast<int>(j);
    }
  }
  return best;
}

int ArgmaxTiebreak(const std::vector<double>& v,
                   const std::vector<int>& allowed) {
  if (allowed.empty()) throw ConfigError("argmax over an empty set");
  int best = -1;
  double best_value = 0.0;
  for (int j : allowed) {
    if (j < 0 || j >= static_cast<int>(v.size())) {
      throw ConfigError("argmax index out of range");
    }
    if (best < 0 || v[j] > best_value || (v[j] == best_value && j < best)) {
      best = j;
      best_value = v[j];
    }
  }
  return best;
}

int ArgmaxTiebreak(const std::vector<double>& v) {
  if (v.empty()) throw ConfigError("argmax over an empty vector");
  int best = 0;
  for (size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace dpfs

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

#ifndef DPFS_RNG_H_
#define DPFS_RNG_H_

#include <cstdint>
#include <random>
#include <vector>

namespace dpfs {

// Deterministic random stream. All samplers are implemented by hand on top
// of the mt19937_64 word stream so that outputs are identical across
// standard-library implementations; std::*_distribution is avoided because
// its algorithms are implementation-defined.
//
// A stream is owned by exactly one logical task (one generation, one trial);
// it is not safe to share across threads.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed);

  // Uniform in [0, 1), 53-bit resolution.
  double Uniform();

  // Uniform integer in [0, bound). bound must be positive.
  uint64_t UniformInt(uint64_t bound);

  // Normal(0, stddev^2) via Box-Muller. stddev may be zero.
  double Normal(double stddev);

  // Exponential with the given rate (density rate*exp(-rate*x), x >= 0).
  double Exponential(double rate);

  // Fisher-Yates shuffle.
  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[UniformInt(i)]);
    }
  }

  // Independent stream derived from this stream's seed and stream_id; does
  // not consume draws from this stream.
  RandomStream Fork(uint64_t stream_id) const;

  uint64_t seed() const { return seed_; }
  // Number of 64-bit engine words consumed so far; recorded in generation
  // traces as the rng checkpoint.
  uint64_t words_consumed() const { return words_consumed_; }

 private:
  uint64_t NextWord();

  uint64_t seed_;
  std::mt19937_64 engine_;
  uint64_t words_consumed_ = 0;
};

}  // namespace dpfs

#endif  // DPFS_RNG_H_

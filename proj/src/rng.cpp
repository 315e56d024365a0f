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

#include "dpfs/rng.hpp"

#include <cmath>

namespace dpfs {
namespace {

// splitmix64; used to decorrelate forked stream seeds.
uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RandomStream::RandomStream(uint64_t seed) : seed_(seed), engine_(seed) {}

uint64_t RandomStream::NextWord() {
  ++words_consumed_;
  return engine_();
}

double RandomStream::Uniform() {
  // Top 53 bits -> [0, 1).
  return static_cast<double>(NextWord() >> 11) * 0x1.0p-53;
}

uint64_t RandomStream::UniformInt(uint64_t bound) {
  // Rejection sampling over the largest multiple of bound.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t word;
  do {
    word = NextWord();
  } while (word >= limit);
  return word % bound;
}

double RandomStream::Normal(double stddev) {
  if (stddev == 0.0) return 0.0;
  // Box-Muller; u1 in (0, 1] so the log is finite. The sine branch is
  // discarded to keep one word of state per returned value.
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double RandomStream::Exponential(double rate) {
  const double u = Uniform();
  return -std::log1p(-u) / rate;
}

RandomStream RandomStream::Fork(uint64_t stream_id) const {
  return RandomStream(Mix64(seed_ ^ Mix64(stream_id)));
}

}  // namespace dpfs

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

#ifndef DPFS_CONFIG_H_
#define DPFS_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpfs/accountant.hpp"
#include "dpfs/mechanisms.hpp"
#include "dpfs/remote_lm.hpp"

namespace dpfs {

struct BackendSpec {
  enum class Kind { kLocalNgram, kRemote };
  Kind kind = Kind::kLocalNgram;

  // Local n-gram backend.
  std::string corpus_path;
  int order = 2;
  double alpha = 1.0;

  // Remote backend.
  RemoteLmOptions remote;

  void Validate() const;
};

// One reproducible pipeline run: task, backends, mechanism, budget, seeds.
struct RunConfig {
  std::string task;            // preset name or path to a preset file
  std::string dataset_path;    // private JSONL dataset
  BackendSpec generation_backend;
  std::optional<BackendSpec> inference_backend;  // defaults to generation
  MechanismConfig mechanism;   // M/N/rvp/K/T_max; sigma below
  std::optional<PrivacyBudget> target;  // exactly one of target / sigma
  std::optional<double> sigma;
  int n_shots = 4;
  std::vector<uint64_t> seeds;
  std::string out_dir = ".";

  void Validate() const;
};

// TOML round trip: ParseRunConfig(SerializeRunConfig(c)) == c.
RunConfig ParseRunConfigText(const std::string& toml_text);
RunConfig LoadRunConfig(const std::string& path);
std::string SerializeRunConfig(const RunConfig& config);

// FNV-1a hash of the canonical serialization; embedded in every output.
std::string ConfigHashHex(const RunConfig& config);

struct CostEstimate {
  int64_t total_tokens = 0;
  double dollars = 0.0;
};

// Token cost of one generation: M calls per step over prompts growing from
// P to P + T_max tokens:
//   total = M * ((T_max + 1) * P + T_max (T_max + 1) / 2).
CostEstimate EstimateCost(int64_t subset_count, int64_t expected_prompt_tokens,
                          int64_t max_tokens, double price_per_token);

}  // namespace dpfs

#endif  // DPFS_CONFIG_H_

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
// Token-by-token DP generation of synthetic demonstrations and n-shot set
// assembly. Each emitted token comes from a fresh subsample of the private
// pool, M per-subset next-token distributions, an optional public top-K
// restriction, and one noisy aggregation.

#ifndef DPFS_GENERATOR_H_
#define DPFS_GENERATOR_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpfs/dataset.hpp"
#include "dpfs/lm.hpp"
#include "dpfs/mechanisms.hpp"
#include "dpfs/prompt.hpp"
#include "dpfs/rng.hpp"

namespace dpfs {

// One emitted token's audit record.
struct StepRecord {
  std::vector<std::vector<int>> subsample;  // M example-index subsets
  std::vector<int> rvp_set;        // sorted top-K set; empty when RVP is off
  MechanismKind kind = MechanismKind::kGaussian;
  int chosen_token = -1;
  std::string chosen_token_text;
  uint64_t rng_words_before = 0;   // stream checkpoint before noise draws
  // Raw noisy scores over the step support (Gaussian only; RNM never
  // exposes them).
  std::vector<double> noisy_scores;
};

struct GenerationTrace {
  std::vector<StepRecord> steps;   // one record per emitted token
  std::vector<int> token_ids;      // the generation, EOS excluded
  bool stopped_on_eos = false;
  bool hit_max_tokens = false;
  bool retried = false;            // empty first attempt, regenerated once
};

// Privacy accounting attached to a generated shot set.
struct BudgetLine {
  std::string scope;   // label name, "parallel" or "sequential"
  double gamma = 0.0;
  int steps = 0;
  double epsilon = 0.0;            // at delta = report_delta (PLD route)
  double delta = 0.0;
  double pure_epsilon = std::numeric_limits<double>::quiet_NaN();  // RNM only
};

struct AccountingSummary {
  std::string mechanism;
  double sigma = 0.0;
  std::string adjacency;     // neighboring-relation convention string
  double report_delta = 0.0;
  std::vector<BudgetLine> per_label;
  BudgetLine parallel;       // max over disjoint label pools (fixed-set)
  BudgetLine sequential;     // composed across every generated shot
  bool parallel_applicable = true;  // false when label pools overlap
};

struct ShotSet {
  std::vector<Example> demos;
  std::vector<GenerationTrace> traces;  // aligned with demos
  std::vector<std::string> shot_labels;
  std::string task_name;
  MechanismConfig mechanism;
  uint64_t seed = 0;
  AccountingSummary accounting;
};

enum class ShotPolicy { kLabelsWithoutReplacement, kFixedLabel, kOpenForm };

// Lines 1-17 of the generation algorithm for a single sample: per step a
// fresh subsample, M private next-token distributions, optional restriction
// to the public instruction-only top-K, noisy aggregation, argmax, EOS /
// T_max stopping. An empty generation is retried once with fresh
// randomness; a second empty result throws. Pool feasibility is checked
// before any LM call.
std::pair<Example, GenerationTrace> GenerateSample(
    const LabeledDataset& dataset, const std::string& label,
    const MechanismConfig& config, LanguageModel& gen_lm,
    const PromptTemplate& tmpl, RandomStream& rng);

// Generates n_shots demonstrations with labels chosen per policy and
// attaches the accountant report (parallel over disjoint label pools where
// applicable, sequential total always). report_delta is the delta at which
// epsilons are quoted.
ShotSet GenerateShots(const LabeledDataset& dataset,
                      const MechanismConfig& config, int n_shots,
                      ShotPolicy policy, const std::string& fixed_label,
                      LanguageModel& gen_lm, const TaskPreset& preset,
                      double report_delta, RandomStream& rng);

// The epsilon = 0 baseline: demos decoded greedily from the public
// instruction-only prompt; no private data, no noise, budget (0, 0).
// Fixed-set presets draw labels without replacement; open-form presets
// require explicit labels.
ShotSet InstructionOnlyShots(int n_shots, LanguageModel& gen_lm,
                             const TaskPreset& preset,
                             const std::vector<std::string>& open_form_labels,
                             RandomStream& rng);

// Persistence: demos as JSONL, provenance (config, rates, steps, budget
// report, seeds, config hash) as a JSON sidecar.
void SaveShotSet(const ShotSet& shots, const std::string& demos_path,
                 const std::string& provenance_path,
                 const std::string& config_hash);

// Reads a demos JSONL file back; throws ParseError with a line number on
// malformed lines.
std::vector<Example> LoadShotSetDemos(const std::string& demos_path);

}  // namespace dpfs

#endif  // DPFS_GENERATOR_H_

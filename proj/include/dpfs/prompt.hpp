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

#ifndef DPFS_PROMPT_H_
#define DPFS_PROMPT_H_

#include <string>
#include <vector>

#include "dpfs/dataset.hpp"
#include "dpfs/mechanisms.hpp"

namespace dpfs {

// Text patterns with {label} and {content} placeholders. Prompt blocks
// (instruction, demonstrations, query) are joined by blank lines.
struct PromptTemplate {
  std::string instruction;    // may be empty
  std::string demo_pattern;   // must contain {label} and {content}
  std::string query_pattern;  // generation: contains {label}; inference: {content}
  std::string label_field_name;    // display strings, e.g. "News Type"
  std::string content_field_name;  // e.g. "Text"

  void ValidateForGeneration() const;
  void ValidateForInference() const;
};

// Prompt for the private generation query: instruction, demonstrations
// rendered through demo_pattern (each with its own label), query_pattern
// with the target label, then `partial` appended verbatim. In fixed-set
// mode every demo must carry the target label.
std::string BuildGenerationPrompt(const PromptTemplate& tmpl,
                                  const std::vector<Example>& demos,
                                  const std::string& label,
                                  const std::string& partial,
                                  LabelMode mode = LabelMode::kFixedSet);

// Inference prompt: instruction, demonstrations with their labels, then
// query_pattern with the query content (ending in the label cue).
std::string BuildIclPrompt(const PromptTemplate& tmpl,
                           const std::vector<Example>& demos,
                           const std::string& query_content);

// One downstream task: the two prompt formats plus the hyperparameters the
// task ships with.
struct TaskPreset {
  std::string name;
  PromptTemplate generation;
  PromptTemplate icl;
  std::vector<std::string> labels;  // >= 2 in fixed-set mode
  LabelMode label_mode = LabelMode::kFixedSet;
  int t_max = 1;
  bool calibrate = true;  // contextual calibration during evaluation
  MechanismConfig mechanism;  // sigma left 0 until calibrated/configured
  int pool_size = 0;          // per-label pool size the rates refer to
  double default_delta = 0.0;  // 1/pool_size unless the file overrides

  void Validate() const;
};

// Reads a preset file (see presets/*.toml for the format).
TaskPreset LoadTaskPreset(const std::string& path);

}  // namespace dpfs

#endif  // DPFS_PROMPT_H_

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

#include "dpfs/prompt.hpp"

#include <sstream>

#include "dpfs/error.hpp"
#include "dpfs/toml_lite.hpp"

namespace dpfs {
namespace {

constexpr const char* kLabelPlaceholder = "{label}";
constexpr const char* kContentPlaceholder = "{content}";

std::string ReplaceAll(std::string text, const std::string& placeholder,
                       const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

std::string RenderDemo(const PromptTemplate& tmpl, const Example& demo) {
  std::string block = ReplaceAll(tmpl.demo_pattern, kLabelPlaceholder, demo.label);
  return ReplaceAll(block, kContentPlaceholder, demo.content);
}

void AppendBlock(std::string& prompt, const std::string& block) {
  if (block.empty()) return;
  if (!prompt.empty()) prompt += "\n\n";
  prompt += block;
}

}  // namespace

void PromptTemplate::ValidateForGeneration() const {
  if (demo_pattern.find(kLabelPlaceholder) == std::string::npos ||
      demo_pattern.find(kContentPlaceholder) == std::string::npos) {
    throw ConfigError("demo pattern needs both {label} and {content}");
  }
  if (query_pattern.find(kLabelPlaceholder) == std::string::npos) {
    throw ConfigError("generation query pattern needs {label}");
  }
}

void PromptTemplate::ValidateForInference() const {
  if (demo_pattern.find(kLabelPlaceholder) == std::string::npos ||
      demo_pattern.find(kContentPlaceholder) == std::string::npos) {
    throw ConfigError("demo pattern needs both {label} and {content}");
  }
  if (query_pattern.find(kContentPlaceholder) == std::string::npos) {
    throw ConfigError("inference query pattern needs {content}");
  }
}

std::string BuildGenerationPrompt(const PromptTemplate& tmpl,
                                  const std::vector<Example>& demos,
                                  const std::string& label,
                                  const std::string& partial, LabelMode mode) {
  tmpl.ValidateForGeneration();
  std::string prompt;
  AppendBlock(prompt, tmpl.instruction);
  for (const Example& demo : demos) {
    if (mode == LabelMode::kFixedSet && demo.label != label) {
      throw ConfigError("demonstration label '" + demo.label +
                        "' does not match the target label '" + label + "'");
    }
    AppendBlock(prompt, RenderDemo(tmpl, demo));
  }
  AppendBlock(prompt, ReplaceAll(tmpl.query_pattern, kLabelPlaceholder, label));
  prompt += partial;
  return prompt;
}

std::string BuildIclPrompt(const PromptTemplate& tmpl,
                           const std::vector<Example>& demos,
                           const std::string& query_content) {
  tmpl.ValidateForInference();
  std::string prompt;
  AppendBlock(prompt, tmpl.instruction);
  for (const Example& demo : demos) {
    AppendBlock(prompt, RenderDemo(tmpl, demo));
  }
  AppendBlock(prompt,
              ReplaceAll(tmpl.query_pattern, kContentPlaceholder, query_content));
  return prompt;
}

void TaskPreset::Validate() const {
  if (name.empty()) throw ConfigError("preset needs a name");
  if (label_mode == LabelMode::kFixedSet && labels.size() < 2) {
    throw ConfigError("fixed-set preset needs at least 2 labels");
  }
  if (t_max < 1) throw ConfigError("preset t_max must be >= 1");
  generation.ValidateForGeneration();
  icl.ValidateForInference();
  mechanism.Validate();
  if (pool_size < 1) throw ConfigError("preset pool_size must be >= 1");
  if (!(default_delta > 0.0 && default_delta < 1.0)) {
    throw ConfigError("preset delta must be in (0, 1)");
  }
}

TaskPreset LoadTaskPreset(const std::string& path) {
  const toml::Value doc = toml::ParseFile(path);

  TaskPreset preset;
  preset.name = doc.At("name").AsString();
  preset.labels = doc.At("labels").AsStringArray();
  if (const toml::Value* open_form = doc.Find("open_form")) {
    preset.label_mode = open_form->AsBoolean() ? LabelMode::kOpenForm
                                               : LabelMode::kFixedSet;
  }
  preset.t_max = static_cast<int>(doc.At("t_max").AsInteger());
  if (const toml::Value* calibrate = doc.Find("calibrate")) {
    preset.calibrate = calibrate->AsBoolean();
  }

  auto load_template = [&doc](const std::string& section) {
    PromptTemplate tmpl;
    const toml::Value& table = doc.At(section);
    if (const toml::Value* instruction = table.Find("instruction")) {
      tmpl.instruction = instruction->AsString();
    }
    tmpl.demo_pattern = table.At("demo_pattern").AsString();
    tmpl.query_pattern = table.At("query_pattern").AsString();
    if (const toml::Value* v = table.Find("label_field_name")) {
      tmpl.label_field_name = v->AsString();
    }
    if (const toml::Value* v = table.Find("content_field_name")) {
      tmpl.content_field_name = v->AsString();
    }
    return tmpl;
  };
  preset.generation = load_template("generation");
  preset.icl = load_template("icl");

  const toml::Value& mech = doc.At("mechanism");
  preset.mechanism.kind = mech.At("dp").AsString() == "rnm-exponential"
                              ? MechanismKind::kRnmExponential
                              : MechanismKind::kGaussian;
  if (mech.At("dp").AsString() != "gaussian" &&
      mech.At("dp").AsString() != "rnm-exponential") {
    throw ConfigError("mechanism dp must be gaussian or rnm-exponential");
  }
  preset.mechanism.subset_count = static_cast<int>(mech.At("m").AsInteger());
  preset.mechanism.subset_size = static_cast<int>(mech.At("n").AsInteger());
  preset.mechanism.rvp = mech.At("rvp").AsBoolean();
  if (const toml::Value* k = mech.Find("k")) {
    preset.mechanism.rvp_top_k = static_cast<int>(k->AsInteger());
  }
  preset.mechanism.max_tokens = preset.t_max;

  const toml::Value& acct = doc.At("accountant");
  preset.pool_size = static_cast<int>(acct.At("pool_size").AsInteger());
  if (const toml::Value* delta = acct.Find("delta")) {
    preset.default_delta = delta->AsNumber();
  } else if (preset.pool_size > 0) {
    preset.default_delta = 1.0 / preset.pool_size;
  }

  // sigma is supplied later (calibration or run config); validate the rest
  // against a placeholder value.
  TaskPreset check = preset;
  check.mechanism.sigma = 1.0;
  check.Validate();
  return preset;
}

}  // namespace dpfs

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

#include "dpfs/generator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "dpfs/accountant.hpp"
#include "dpfs/error.hpp"
#include "json.hpp"

namespace dpfs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Example> GatherDemos(const LabeledDataset& dataset,
                                 const std::vector<int>& indices) {
  std::vector<Example> demos;
  demos.reserve(indices.size());
  for (int index : indices) {
    demos.push_back(dataset.examples[static_cast<size_t>(index)]);
  }
  return demos;
}

// Zero-pads to the backend's current vocabulary size (remote vocabularies
// grow between the M queries of one step; ids are append-only).
void PadTo(ProbVector& v, size_t dim) {
  if (v.size() < dim) v.resize(dim, 0.0);
}

struct StepOutcome {
  int token = -1;
  StepRecord record;
};

// One generation step: subsample, query, restrict, aggregate, select.
StepOutcome RunStep(const LabeledDataset& dataset,
                    const std::vector<int>& pool, const std::string& label,
                    const MechanismConfig& config, LanguageModel& lm,
                    const PromptTemplate& tmpl, const std::string& partial,
                    RandomStream& rng) {
  StepOutcome outcome;
  outcome.record.kind = config.kind;

  const SubsampleBatch batch =
      config.sampling == SamplingScheme::kPoisson
          ? SubsamplePoisson(pool, config.subset_count, config.subset_size, rng)
          : SubsampleAndSplit(pool, config.subset_count, config.subset_size,
                              rng);
  outcome.record.subsample = batch.subsets;

  std::vector<ProbVector> dists;
  dists.reserve(batch.subsets.size());
  for (const std::vector<int>& subset : batch.subsets) {
    const std::string prompt = BuildGenerationPrompt(
        tmpl, GatherDemos(dataset, subset), label, partial, dataset.label_mode);
    dists.push_back(lm.NextTokenDistribution(prompt));
  }

  std::vector<int> support;
  if (config.rvp) {
    const std::string public_prompt =
        BuildGenerationPrompt(tmpl, {}, label, partial, dataset.label_mode);
    const ProbVector public_dist = lm.NextTokenDistribution(public_prompt);
    support = TopKIndices(public_dist, config.rvp_top_k);
    outcome.record.rvp_set = support;
    const size_t dim = static_cast<size_t>(lm.vocab_size());
    for (ProbVector& dist : dists) {
      PadTo(dist, dim);
      dist = RestrictAndRenormalize(dist, support);
    }
  } else {
    const size_t dim = static_cast<size_t>(lm.vocab_size());
    for (ProbVector& dist : dists) PadTo(dist, dim);
    support.resize(dim);
    std::iota(support.begin(), support.end(), 0);
  }

  // Work in the support's coordinate space so only |support| noise values
  // are drawn (in vocabulary order; support is sorted).
  std::vector<ProbVector> compact(dists.size());
  for (size_t i = 0; i < dists.size(); ++i) {
    compact[i].reserve(support.size());
    for (int j : support) compact[i].push_back(dists[i][static_cast<size_t>(j)]);
  }

  outcome.record.rng_words_before = rng.words_consumed();
  int local_choice;
  if (config.kind == MechanismKind::kGaussian) {
    const std::vector<double> noisy =
        GaussianAggregate(compact, config.sigma, rng);
    local_choice = ArgmaxTiebreak(noisy);
    outcome.record.noisy_scores = noisy;
  } else {
    local_choice = RnmExpoSelect(compact, config.sigma, rng);
  }
  outcome.token = support[static_cast<size_t>(local_choice)];
  outcome.record.chosen_token = outcome.token;
  outcome.record.chosen_token_text = lm.TokenText(outcome.token);
  return outcome;
}

GenerationTrace GenerateOnce(const LabeledDataset& dataset,
                             const std::string& label,
                             const MechanismConfig& config, LanguageModel& lm,
                             const PromptTemplate& tmpl, RandomStream& rng) {
  const std::vector<int> pool = PerLabelPool(dataset, label);
  const size_t needed = static_cast<size_t>(config.subset_count) *
                        static_cast<size_t>(config.subset_size);
  if (config.sampling == SamplingScheme::kWithoutReplacement &&
      pool.size() < needed) {
    std::ostringstream msg;
    msg << "label '" << label << "' pool of " << pool.size()
        << " cannot supply " << needed << " examples per step";
    throw InsufficientDataError(msg.str());
  }

  GenerationTrace trace;
  for (int t = 0; t < config.max_tokens; ++t) {
    const std::string partial = lm.ContinuationText(trace.token_ids);
    StepOutcome outcome =
        RunStep(dataset, pool, label, config, lm, tmpl, partial, rng);
    if (lm.IsEos(outcome.token)) {
      trace.stopped_on_eos = true;
      return trace;
    }
    trace.token_ids.push_back(outcome.token);
    trace.steps.push_back(std::move(outcome.record));
  }
  trace.hit_max_tokens = true;
  return trace;
}

BudgetLine MakeBudgetLine(const std::string& scope, MechanismKind kind,
                          double sigma, double gamma, int steps,
                          double report_delta) {
  BudgetLine line;
  line.scope = scope;
  line.gamma = gamma;
  line.steps = steps;
  line.delta = report_delta;
  if (steps == 0) {
    line.epsilon = 0.0;
    line.delta = 0.0;
    return line;
  }
  if (kind == MechanismKind::kGaussian && sigma == 0.0) {
    line.epsilon = kInf;  // non-private run
    return line;
  }
  const double grid = 1e-4;
  PrivacyLossDistribution pld =
      kind == MechanismKind::kGaussian
          ? PrivacyLossDistribution::SubsampledGaussian(sigma, gamma, grid)
          : PrivacyLossDistribution::PureDp(AmplifyPureEpsilon(sigma, gamma),
                                            grid);
  line.epsilon = pld.SelfCompose(steps).EpsilonForDelta(report_delta);
  if (kind == MechanismKind::kRnmExponential) {
    line.pure_epsilon = PureLinearEpsilon(sigma, gamma, steps);
  }
  return line;
}

AccountingSummary MakeAccounting(const LabeledDataset& dataset,
                                 const MechanismConfig& config,
                                 const std::vector<std::string>& shot_labels,
                                 double report_delta) {
  AccountingSummary summary;
  summary.mechanism = ToString(config.kind);
  summary.sigma = config.sigma;
  summary.adjacency = config.kind == MechanismKind::kGaussian
                          ? "add/remove (Poisson-subsampling dominating pair)"
                          : "substitution (sampling without replacement)";
  summary.report_delta = report_delta;
  summary.parallel_applicable = dataset.label_mode == LabelMode::kFixedSet;

  const double per_step_draw = static_cast<double>(config.subset_count) *
                               static_cast<double>(config.subset_size);

  std::map<std::string, int> shots_per_label;
  for (const std::string& label : shot_labels) ++shots_per_label[label];

  double worst_epsilon = 0.0;
  double worst_pure = 0.0;
  int total_steps = 0;
  double worst_gamma = 0.0;
  for (const auto& [label, count] : shots_per_label) {
    const size_t pool = PerLabelPool(dataset, label).size();
    const double gamma =
        std::min(1.0, per_step_draw / static_cast<double>(pool));
    const int steps = count * config.max_tokens;
    BudgetLine line = MakeBudgetLine(label, config.kind, config.sigma, gamma,
                                     steps, report_delta);
    worst_epsilon = std::max(worst_epsilon, line.epsilon);
    if (!std::isnan(line.pure_epsilon)) {
      worst_pure = std::max(worst_pure, line.pure_epsilon);
    }
    worst_gamma = std::max(worst_gamma, gamma);
    total_steps += steps;
    summary.per_label.push_back(std::move(line));
  }

  summary.parallel.scope = "parallel";
  summary.parallel.gamma = worst_gamma;
  summary.parallel.steps =
      summary.per_label.empty()
          ? 0
          : std::max_element(summary.per_label.begin(), summary.per_label.end(),
                             [](const BudgetLine& a, const BudgetLine& b) {
                               return a.epsilon < b.epsilon;
                             })
                ->steps;
  summary.parallel.epsilon = worst_epsilon;
  summary.parallel.delta = summary.per_label.empty() ? 0.0 : report_delta;
  if (config.kind == MechanismKind::kRnmExponential &&
      !summary.per_label.empty()) {
    summary.parallel.pure_epsilon = worst_pure;
  }

  // Sequential total: every label pool's steps composed one after another.
  summary.sequential.scope = "sequential";
  summary.sequential.steps = total_steps;
  summary.sequential.gamma = worst_gamma;
  summary.sequential.delta = summary.per_label.empty() ? 0.0 : report_delta;
  if (summary.per_label.empty()) {
    summary.sequential.epsilon = 0.0;
  } else if (config.kind == MechanismKind::kGaussian && config.sigma == 0.0) {
    summary.sequential.epsilon = kInf;
  } else {
    const double grid = 1e-4;
    PrivacyLossDistribution composed = PrivacyLossDistribution::Identity(grid);
    bool first = true;
    for (const BudgetLine& line : summary.per_label) {
      PrivacyLossDistribution pld =
          config.kind == MechanismKind::kGaussian
              ? PrivacyLossDistribution::SubsampledGaussian(config.sigma,
                                                            line.gamma, grid)
              : PrivacyLossDistribution::PureDp(
                    AmplifyPureEpsilon(config.sigma, line.gamma), grid);
      PrivacyLossDistribution part = pld.SelfCompose(line.steps);
      composed = first ? part : composed.ComposeWith(part);
      first = false;
    }
    summary.sequential.epsilon = composed.EpsilonForDelta(report_delta);
    if (config.kind == MechanismKind::kRnmExponential) {
      long double pure = 0.0L;
      for (const BudgetLine& line : summary.per_label) {
        pure += line.pure_epsilon;
      }
      summary.sequential.pure_epsilon = static_cast<double>(pure);
    }
  }
  return summary;
}

nlohmann::json BudgetLineJson(const BudgetLine& line) {
  nlohmann::json j{{"scope", line.scope},
                   {"gamma", line.gamma},
                   {"steps", line.steps},
                   {"delta", line.delta}};
  j["epsilon"] = std::isinf(line.epsilon) ? nlohmann::json("inf")
                                          : nlohmann::json(line.epsilon);
  if (!std::isnan(line.pure_epsilon)) j["pure_epsilon"] = line.pure_epsilon;
  return j;
}

}  // namespace

std::pair<Example, GenerationTrace> GenerateSample(
    const LabeledDataset& dataset, const std::string& label,
    const MechanismConfig& config, LanguageModel& gen_lm,
    const PromptTemplate& tmpl, RandomStream& rng) {
  config.Validate();

  GenerationTrace trace =
      GenerateOnce(dataset, label, config, gen_lm, tmpl, rng);
  if (trace.token_ids.empty()) {
    // EOS on the first token is a legal mechanism outcome, but an empty
    // demonstration is useless in a prompt; retry once with fresh draws.
    trace = GenerateOnce(dataset, label, config, gen_lm, tmpl, rng);
    trace.retried = true;
    if (trace.token_ids.empty()) {
      throw Error("generation for label '" + label +
                  "' produced an empty demonstration twice");
    }
  }
  Example demo{gen_lm.ContentText(trace.token_ids), label};
  return {std::move(demo), std::move(trace)};
}

ShotSet GenerateShots(const LabeledDataset& dataset,
                      const MechanismConfig& config, int n_shots,
                      ShotPolicy policy, const std::string& fixed_label,
                      LanguageModel& gen_lm, const TaskPreset& preset,
                      double report_delta, RandomStream& rng) {
  config.Validate();
  if (n_shots < 0) throw ConfigError("n_shots must be >= 0");

  std::vector<std::string> labels;
  switch (policy) {
    case ShotPolicy::kLabelsWithoutReplacement: {
      std::vector<std::string> pool = preset.labels;
      if (n_shots > static_cast<int>(pool.size())) {
        std::ostringstream msg;
        msg << "labels-without-replacement needs n_shots <= " << pool.size()
            << ", got " << n_shots;
        throw ConfigError(msg.str());
      }
      rng.Shuffle(pool);
      labels.assign(pool.begin(), pool.begin() + n_shots);
      break;
    }
    case ShotPolicy::kFixedLabel: {
      if (fixed_label.empty()) {
        throw ConfigError("fixed-label policy needs a label");
      }
      labels.assign(static_cast<size_t>(n_shots), fixed_label);
      break;
    }
    case ShotPolicy::kOpenForm: {
      if (dataset.label_mode != LabelMode::kOpenForm) {
        throw ConfigError("open-form policy needs an open-form dataset");
      }
      std::vector<std::string> pool = dataset.Labels();
      if (pool.empty()) throw ConfigError("dataset carries no label values");
      if (n_shots <= static_cast<int>(pool.size())) {
        rng.Shuffle(pool);
        labels.assign(pool.begin(), pool.begin() + n_shots);
      } else {
        for (int i = 0; i < n_shots; ++i) {
          labels.push_back(pool[rng.UniformInt(pool.size())]);
        }
      }
      break;
    }
  }

  ShotSet shots;
  shots.task_name = preset.name;
  shots.mechanism = config;
  shots.seed = rng.seed();
  shots.shot_labels = labels;
  for (const std::string& label : labels) {
    auto [demo, trace] =
        GenerateSample(dataset, label, config, gen_lm, preset.generation, rng);
    shots.demos.push_back(std::move(demo));
    shots.traces.push_back(std::move(trace));
  }
  shots.accounting = MakeAccounting(dataset, config, labels, report_delta);
  return shots;
}

ShotSet InstructionOnlyShots(int n_shots, LanguageModel& gen_lm,
                             const TaskPreset& preset,
                             const std::vector<std::string>& open_form_labels,
                             RandomStream& rng) {
  if (n_shots < 0) throw ConfigError("n_shots must be >= 0");

  std::vector<std::string> labels;
  if (preset.label_mode == LabelMode::kFixedSet) {
    std::vector<std::string> pool = preset.labels;
    if (n_shots > static_cast<int>(pool.size())) {
      throw ConfigError("n_shots exceeds the preset label set");
    }
    rng.Shuffle(pool);
    labels.assign(pool.begin(), pool.begin() + n_shots);
  } else {
    if (static_cast<int>(open_form_labels.size()) < n_shots) {
      throw ConfigError(
          "open-form instruction-only generation needs explicit labels");
    }
    labels.assign(open_form_labels.begin(), open_form_labels.begin() + n_shots);
  }

  ShotSet shots;
  shots.task_name = preset.name;
  shots.mechanism = preset.mechanism;
  shots.seed = rng.seed();
  shots.shot_labels = labels;

  for (const std::string& label : labels) {
    auto decode_once = [&]() {
      GenerationTrace trace;
      for (int t = 0; t < preset.t_max; ++t) {
        const std::string prompt =
            BuildGenerationPrompt(preset.generation, {}, label,
                                  gen_lm.ContinuationText(trace.token_ids),
                                  preset.label_mode);
        const ProbVector dist = gen_lm.NextTokenDistribution(prompt);
        const int token = ArgmaxTiebreak(dist);
        if (gen_lm.IsEos(token)) {
          trace.stopped_on_eos = true;
          return trace;
        }
        StepRecord record;
        record.kind = preset.mechanism.kind;
        record.chosen_token = token;
        record.chosen_token_text = gen_lm.TokenText(token);
        record.rng_words_before = rng.words_consumed();
        trace.token_ids.push_back(token);
        trace.steps.push_back(std::move(record));
      }
      trace.hit_max_tokens = true;
      return trace;
    };
    GenerationTrace trace = decode_once();
    if (trace.token_ids.empty()) {
      // A deterministic decode cannot change on retry; surface right away.
      throw Error("instruction-only generation for label '" + label +
                  "' is empty");
    }
    shots.demos.push_back(Example{gen_lm.ContentText(trace.token_ids), label});
    shots.traces.push_back(std::move(trace));
  }

  shots.accounting.mechanism = "instruction-only";
  shots.accounting.sigma = 0.0;
  shots.accounting.adjacency = "none (no private data accessed)";
  shots.accounting.report_delta = 0.0;
  shots.accounting.parallel.scope = "parallel";
  shots.accounting.sequential.scope = "sequential";
  return shots;
}

void SaveShotSet(const ShotSet& shots, const std::string& demos_path,
                 const std::string& provenance_path,
                 const std::string& config_hash) {
  {
    std::ofstream out(demos_path);
    if (!out) throw Error("cannot write " + demos_path);
    for (const Example& demo : shots.demos) {
      nlohmann::json line{{"content", demo.content}, {"label", demo.label}};
      out << line.dump() << "\n";
    }
  }

  nlohmann::json provenance;
  provenance["task"] = shots.task_name;
  provenance["seed"] = shots.seed;
  provenance["seeds"] = std::vector<uint64_t>{shots.seed};
  provenance["config_hash"] = config_hash;
  provenance["demos_file"] = demos_path;
  provenance["n_shots"] = shots.demos.size();
  provenance["shot_labels"] = shots.shot_labels;

  nlohmann::json mech;
  mech["kind"] = ToString(shots.mechanism.kind);
  mech["sigma"] = shots.mechanism.sigma;
  mech["m"] = shots.mechanism.subset_count;
  mech["n"] = shots.mechanism.subset_size;
  mech["rvp"] = shots.mechanism.rvp;
  mech["k"] = shots.mechanism.rvp_top_k;
  mech["t_max"] = shots.mechanism.max_tokens;
  mech["sampling"] = shots.mechanism.sampling == SamplingScheme::kPoisson
                         ? "poisson"
                         : "without-replacement";
  provenance["mechanism"] = mech;

  nlohmann::json accounting;
  accounting["mechanism"] = shots.accounting.mechanism;
  accounting["sigma"] = shots.accounting.sigma;
  accounting["adjacency"] = shots.accounting.adjacency;
  accounting["report_delta"] = shots.accounting.report_delta;
  accounting["parallel_applicable"] = shots.accounting.parallel_applicable;
  accounting["per_label"] = nlohmann::json::array();
  for (const BudgetLine& line : shots.accounting.per_label) {
    accounting["per_label"].push_back(BudgetLineJson(line));
  }
  accounting["parallel"] = BudgetLineJson(shots.accounting.parallel);
  accounting["sequential"] = BudgetLineJson(shots.accounting.sequential);
  provenance["accounting"] = accounting;

  bool any_retried = false;
  for (const GenerationTrace& trace : shots.traces) {
    any_retried = any_retried || trace.retried;
  }
  provenance["retried"] = any_retried;

  std::ofstream out(provenance_path);
  if (!out) throw Error("cannot write " + provenance_path);
  out << provenance.dump(2) << "\n";
}

std::vector<Example> LoadShotSetDemos(const std::string& demos_path) {
  std::ifstream in(demos_path);
  if (!in) throw ParseError("cannot open demos file: " + demos_path);
  std::vector<Example> demos;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::ostringstream msg;
      msg << demos_path << ":" << line_number << ": invalid JSON: " << e.what();
      throw ParseError(msg.str());
    }
    if (!record.contains("content") || !record["content"].is_string() ||
        !record.contains("label") || !record["label"].is_string()) {
      std::ostringstream msg;
      msg << demos_path << ":" << line_number
          << ": demo line needs string fields \"content\" and \"label\"";
      throw ParseError(msg.str());
    }
    demos.push_back(Example{record["content"].get<std::string>(),
                            record["label"].get<std::string>()});
  }
  return demos;
}

}  // namespace dpfs

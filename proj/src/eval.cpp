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

#include "dpfs/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dpfs/error.hpp"

namespace dpfs {
namespace {

std::string TrimAndLower(const std::string& text) {
  size_t begin = text.find_first_not_of(" \t\r\n\f\v");
  if (begin == std::string::npos) return "";
  size_t end = text.find_last_not_of(" \t\r\n\f\v");
  std::string out = text.substr(begin, end - begin + 1);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Id of a label's first verbalizer token.
int LabelTokenId(LanguageModel& lm, const std::string& label) {
  const std::vector<std::string> tokens = TokenizeWhitespace(label);
  if (tokens.empty()) throw ConfigError("label verbalizer is empty");
  const int id = lm.FindToken(tokens.front());
  if (id < 0) {
    throw ConfigError("label token not in the model vocabulary: " +
                      tokens.front());
  }
  return id;
}

}  // namespace

std::string BuildIclScoringPrefix(const PromptTemplate& tmpl,
                                  const std::vector<Example>& demos) {
  const size_t placeholder = tmpl.query_pattern.find("{content}");
  if (placeholder == std::string::npos) {
    throw ConfigError("inference query pattern needs {content}");
  }
  std::string query_prefix = tmpl.query_pattern.substr(0, placeholder);
  while (!query_prefix.empty() &&
         (query_prefix.back() == ' ' || query_prefix.back() == '\t')) {
    query_prefix.pop_back();
  }
  // Assemble instruction + demos + query prefix with blank-line separators,
  // matching BuildIclPrompt's layout.
  PromptTemplate prefix_tmpl = tmpl;
  prefix_tmpl.query_pattern = query_prefix + "{content}";
  std::string prompt = BuildIclPrompt(prefix_tmpl, demos, "");
  while (!prompt.empty() && (prompt.back() == ' ' || prompt.back() == '\t')) {
    prompt.pop_back();
  }
  return prompt;
}

std::string ClassifyIcl(LanguageModel& lm, const PromptTemplate& icl_tmpl,
                        const std::vector<Example>& demos,
                        const std::string& query_content,
                        const std::vector<std::string>& labels,
                        const CalibrationWeights* weights) {
  if (labels.empty()) throw ConfigError("classification needs labels");
  if (weights != nullptr && weights->values.size() != labels.size()) {
    throw ConfigError("calibration weights do not match the label set");
  }
  const std::string prompt = BuildIclPrompt(icl_tmpl, demos, query_content);
  const ProbVector dist = lm.NextTokenDistribution(prompt);

  int best = -1;
  double best_score = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const int token = LabelTokenId(lm, labels[i]);
    double score = dist[static_cast<size_t>(token)];
    if (weights != nullptr) {
      if (!(weights->values[i] > 0.0)) {
        throw ConfigError("calibration weights must be positive");
      }
      score /= weights->values[i];
    }
    if (best < 0 || score > best_score) {
      best = static_cast<int>(i);
      best_score = score;
    }
  }
  return labels[static_cast<size_t>(best)];
}

CalibrationWeights ContextualCalibration(
    LanguageModel& lm, const PromptTemplate& icl_tmpl,
    const std::vector<Example>& demos, const std::vector<std::string>& labels,
    const std::vector<std::string>& content_free_inputs) {
  if (labels.empty()) throw ConfigError("calibration needs labels");
  if (content_free_inputs.empty()) {
    throw ConfigError("calibration needs at least one content-free input");
  }
  std::vector<double> mean(labels.size(), 0.0);
  for (const std::string& input : content_free_inputs) {
    const std::string prompt = BuildIclPrompt(icl_tmpl, demos, input);
    const ProbVector dist = lm.NextTokenDistribution(prompt);
    for (size_t i = 0; i < labels.size(); ++i) {
      mean[i] += dist[static_cast<size_t>(LabelTokenId(lm, labels[i]))];
    }
  }
  double total = 0.0;
  for (double& value : mean) {
    value /= static_cast<double>(content_free_inputs.size());
    total += value;
  }
  for (double value : mean) {
    if (!(value > 0.0)) {
      throw DegenerateSupportError(
          "a label received zero probability on every content-free input");
    }
  }
  CalibrationWeights weights;
  weights.values.resize(labels.size());
  const double scale = static_cast<double>(labels.size()) / total;
  for (size_t i = 0; i < labels.size(); ++i) {
    weights.values[i] = mean[i] * scale;
  }
  return weights;
}

std::string ExtractSlot(LanguageModel& lm, const PromptTemplate& icl_tmpl,
                        const std::vector<Example>& demos,
                        const std::string& query_content, int max_tokens) {
  if (max_tokens < 1) throw ConfigError("extraction needs max_tokens >= 1");
  const std::string prompt = BuildIclPrompt(icl_tmpl, demos, query_content);
  std::vector<int> generated;
  for (int t = 0; t < max_tokens; ++t) {
    const ProbVector dist =
        lm.NextTokenDistribution(prompt + lm.ContinuationText(generated));
    const int token = ArgmaxTiebreak(dist);
    if (lm.IsEos(token)) break;
    if (lm.TokenText(token).find('\n') != std::string::npos) break;
    generated.push_back(token);
  }
  return TrimAndLower(lm.ContentText(generated));
}

bool ExtractionMatch(const std::string& predicted, const std::string& gold) {
  return TrimAndLower(predicted) == TrimAndLower(gold);
}

AccuracyStats EvaluateAccuracy(
    LanguageModel& lm, const std::vector<std::vector<Example>>& demo_sets,
    const std::vector<IclQuery>& test_set, const TaskPreset& preset) {
  if (test_set.empty()) throw ConfigError("evaluation needs a test set");
  if (demo_sets.empty()) throw ConfigError("evaluation needs demo sets");

  AccuracyStats stats;
  for (const std::vector<Example>& demos : demo_sets) {
    int correct = 0;
    if (preset.label_mode == LabelMode::kFixedSet) {
      CalibrationWeights weights;
      const CalibrationWeights* weights_ptr = nullptr;
      if (preset.calibrate) {
        weights = ContextualCalibration(lm, preset.icl, demos, preset.labels);
        weights_ptr = &weights;
      }
      for (const IclQuery& query : test_set) {
        const std::string predicted = ClassifyIcl(
            lm, preset.icl, demos, query.content, preset.labels, weights_ptr);
        if (predicted == query.gold_label) ++correct;
      }
    } else {
      for (const IclQuery& query : test_set) {
        const std::string predicted =
            ExtractSlot(lm, preset.icl, demos, query.content, preset.t_max);
        if (ExtractionMatch(predicted, query.gold_label)) ++correct;
      }
    }
    stats.per_run.push_back(static_cast<double>(correct) /
                            static_cast<double>(test_set.size()));
  }

  const double n = static_cast<double>(stats.per_run.size());
  stats.mean = std::accumulate(stats.per_run.begin(), stats.per_run.end(), 0.0) / n;
  double variance = 0.0;
  for (double accuracy : stats.per_run) {
    variance += (accuracy - stats.mean) * (accuracy - stats.mean);
  }
  stats.stddev = std::sqrt(variance / n);
  return stats;
}

double ComputeAuc(const std::vector<double>& scores,
                  const std::vector<int>& is_member) {
  if (scores.size() != is_member.size() || scores.empty()) {
    throw ConfigError("AUC needs matching, non-empty scores and labels");
  }
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Average ranks over ties, then the Mann-Whitney U statistic.
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
    i = j + 1;
  }

  double positive_rank_sum = 0.0;
  size_t positives = 0;
  for (size_t k = 0; k < n; ++k) {
    if (is_member[k]) {
      positive_rank_sum += rank[k];
      ++positives;
    }
  }
  const size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw ConfigError("AUC needs both member and non-member scores");
  }
  const double u = positive_rank_sum -
                   static_cast<double>(positives) * (positives + 1) / 2.0;
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

std::vector<RocPoint> ComputeRoc(const std::vector<double>& scores,
                                 const std::vector<int>& is_member) {
  if (scores.size() != is_member.size() || scores.empty()) {
    throw ConfigError("ROC needs matching, non-empty scores and labels");
  }
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });

  double positives = 0.0, negatives = 0.0;
  for (int label : is_member) (label ? positives : negatives) += 1.0;
  if (positives == 0.0 || negatives == 0.0) {
    throw ConfigError("ROC needs both member and non-member scores");
  }

  std::vector<RocPoint> roc{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  size_t k = 0;
  while (k < n) {
    // Process ties as one threshold step.
    size_t j = k;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[k]]) ++j;
    for (size_t t = k; t <= j; ++t) {
      if (is_member[order[t]]) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
    }
    roc.push_back({fp / negatives, tp / positives});
    k = j + 1;
  }
  return roc;
}

double SequenceLogLikelihood(LanguageModel& lm, const std::string& prefix,
                             const std::string& content) {
  const std::vector<std::string> tokens = TokenizeWhitespace(content);
  if (tokens.empty()) throw ConfigError("cannot score empty content");
  std::string context = prefix;
  double log_likelihood = 0.0;
  for (const std::string& token : tokens) {
    const ProbVector dist = lm.NextTokenDistribution(context);
    const int id = lm.FindToken(token);
    if (id < 0) {
      throw ConfigError("scored token not in the model vocabulary: " + token);
    }
    const double p = dist[static_cast<size_t>(id)];
    log_likelihood += std::log(std::max(p, 1e-300));
    context += " " + token;
  }
  return log_likelihood / static_cast<double>(tokens.size());
}

MiaReport RunMia(const LabeledDataset& dataset, const TaskPreset& preset,
                 const MiaOptions& options, LanguageModel& gen_lm,
                 LanguageModel& infer_lm, RandomStream& rng) {
  if (options.trials < 1) throw ConfigError("MIA needs at least one trial");

  // Disjoint member / non-member halves of a shuffled index list.
  std::vector<int> indices(static_cast<size_t>(dataset.size()));
  std::iota(indices.begin(), indices.end(), 0);
  rng.Shuffle(indices);
  const size_t half = indices.size() / 2;
  std::vector<int> member_pool(indices.begin(), indices.begin() + half);
  std::vector<int> nonmember_pool(indices.begin() + half, indices.end());

  const int scored_members = options.dp_generation ? options.members_per_trial : 1;
  if (static_cast<int>(member_pool.size()) < std::max(scored_members, 1) ||
      static_cast<int>(nonmember_pool.size()) < options.nonmembers_per_trial) {
    throw InsufficientDataError("dataset too small for the requested MIA counts");
  }

  std::vector<Example> member_examples;
  member_examples.reserve(member_pool.size());
  for (int index : member_pool) {
    member_examples.push_back(dataset.examples[static_cast<size_t>(index)]);
  }
  const LabeledDataset member_dataset =
      MakeDataset(member_examples, dataset.label_mode);

  MiaReport report;
  report.trials = options.trials;
  report.member_count = scored_members;
  report.nonmember_count = options.nonmembers_per_trial;
  report.score_kind =
      "length-normalized log-likelihood of candidate content under the "
      "1-shot ICL prompt";

  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;
  for (int trial = 0; trial < options.trials; ++trial) {
    RandomStream trial_rng = rng.Fork(static_cast<uint64_t>(trial) + 1);

    // The 1-shot demonstration for this trial.
    Example demo;
    std::vector<int> trial_members;
    if (options.dp_generation) {
      const std::vector<std::string> label_pool = member_dataset.Labels();
      const std::string label =
          label_pool[trial_rng.UniformInt(label_pool.size())];
      demo = GenerateSample(member_dataset, label, options.mechanism, gen_lm,
                            preset.generation, trial_rng)
                 .first;
      std::vector<int> pool = member_pool;
      trial_rng.Shuffle(pool);
      trial_members.assign(pool.begin(), pool.begin() + scored_members);
    } else {
      // Non-private baseline: the member itself sits in the prompt and is
      // the scored member candidate.
      const int member =
          member_pool[trial_rng.UniformInt(member_pool.size())];
      demo = dataset.examples[static_cast<size_t>(member)];
      trial_members = {member};
    }

    std::vector<int> trial_nonmembers = nonmember_pool;
    trial_rng.Shuffle(trial_nonmembers);
    trial_nonmembers.resize(static_cast<size_t>(options.nonmembers_per_trial));

    const std::string prefix = BuildIclScoringPrefix(preset.icl, {demo});
    std::vector<double> scores;
    std::vector<int> labels;
    int candidate_id = 0;
    auto score_candidate = [&](int example_index, int member_bit) {
      const Example& example =
          dataset.examples[static_cast<size_t>(example_index)];
      const double score =
          SequenceLogLikelihood(infer_lm, prefix, example.content);
      scores.push_back(score);
      labels.push_back(member_bit);
      report.scores.push_back({trial, candidate_id++, member_bit, score});
      pooled_scores.push_back(score);
      pooled_labels.push_back(member_bit);
    };
    for (int index : trial_members) score_candidate(index, 1);
    for (int index : trial_nonmembers) score_candidate(index, 0);

    report.per_trial_auc.push_back(ComputeAuc(scores, labels));
  }

  report.auc =
      std::accumulate(report.per_trial_auc.begin(), report.per_trial_auc.end(),
                      0.0) /
      static_cast<double>(report.per_trial_auc.size());
  report.roc = ComputeRoc(pooled_scores, pooled_labels);
  return report;
}

void WriteMiaCsv(std::ostream& out, const MiaReport& report,
                 const std::string& config_hash, uint64_t seed) {
  out << "# config_hash=" << config_hash << " seed=" << seed
      << " auc=" << report.auc << "\n";
  out << "trial,candidate_id,is_member,score\n";
  for (const MiaCandidateScore& row : report.scores) {
    out << row.trial << ',' << row.candidate_id << ',' << row.is_member << ','
        << row.score << "\n";
  }
}

}  // namespace dpfs

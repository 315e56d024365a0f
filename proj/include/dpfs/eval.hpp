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
// Downstream evaluation: ICL classification with contextual calibration,
// slot extraction, and the membership-inference audit harness.

#ifndef DPFS_EVAL_H_
#define DPFS_EVAL_H_

#include <string>
#include <vector>

#include "dpfs/dataset.hpp"
#include "dpfs/generator.hpp"
#include "dpfs/lm.hpp"
#include "dpfs/prompt.hpp"
#include "dpfs/rng.hpp"

namespace dpfs {

struct IclQuery {
  std::string content;
  std::string gold_label;
};

// Per-label positive reals dividing the label-token probabilities before
// the argmax; aligned with the label list they were computed for.
struct CalibrationWeights {
  std::vector<double> values;
};

// Scores each label by the probability of its first verbalizer token after
// the ICL prompt, divides by the calibration weight when given, and returns
// the argmax label (lowest index on ties). Throws ConfigError when a label
// token is missing from the model vocabulary.
std::string ClassifyIcl(LanguageModel& lm, const PromptTemplate& icl_tmpl,
                        const std::vector<Example>& demos,
                        const std::string& query_content,
                        const std::vector<std::string>& labels,
                        const CalibrationWeights* weights = nullptr);

// Contextual calibration: mean label-token probabilities over content-free
// inputs, renormalized to sum to |labels|. Throws DegenerateSupportError
// when some label receives zero probability on every content-free input.
CalibrationWeights ContextualCalibration(
    LanguageModel& lm, const PromptTemplate& icl_tmpl,
    const std::vector<Example>& demos, const std::vector<std::string>& labels,
    const std::vector<std::string>& content_free_inputs = {"N/A"});

// Greedy decode from the extraction prompt until newline, EOS, or
// max_tokens; returns the trimmed, lower-cased string.
std::string ExtractSlot(LanguageModel& lm, const PromptTemplate& icl_tmpl,
                        const std::vector<Example>& demos,
                        const std::string& query_content, int max_tokens);

// Case-folded, whitespace-trimmed exact match.
bool ExtractionMatch(const std::string& predicted, const std::string& gold);

struct AccuracyStats {
  std::vector<double> per_run;  // one accuracy per demo set
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

// Accuracy of ICL with each demo set over the test queries: classification
// (with calibration when the preset enables it) for fixed-set presets,
// exact-match extraction for open-form ones. Aggregates with the
// population standard deviation across runs.
AccuracyStats EvaluateAccuracy(LanguageModel& lm,
                               const std::vector<std::vector<Example>>& demo_sets,
                               const std::vector<IclQuery>& test_set,
                               const TaskPreset& preset);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Mann-Whitney AUC with tie handling; is_member entries are 0/1.
double ComputeAuc(const std::vector<double>& scores,
                  const std::vector<int>& is_member);

// ROC sweep over score thresholds (descending); includes (0,0) and (1,1)
// and is monotone in both coordinates.
std::vector<RocPoint> ComputeRoc(const std::vector<double>& scores,
                                 const std::vector<int>& is_member);

struct MiaCandidateScore {
  int trial = 0;
  int candidate_id = 0;
  int is_member = 0;
  double score = 0.0;
};

struct MiaReport {
  double auc = 0.0;              // mean of per-trial AUCs
  std::vector<double> per_trial_auc;
  std::vector<RocPoint> roc;     // pooled over all trials
  int trials = 0;
  int member_count = 0;          // scored members per trial
  int nonmember_count = 0;
  std::string score_kind;        // attack statistic description
  std::vector<MiaCandidateScore> scores;  // all candidate scores (CSV rows)
};

struct MiaOptions {
  int trials = 100;
  int members_per_trial = 50;
  int nonmembers_per_trial = 50;
  // true: score against a DP-generated 1-shot demo; false: the demo is the
  // member sample itself (the non-private baseline).
  bool dp_generation = true;
  MechanismConfig mechanism;  // used when dp_generation is true
};

// Membership-inference audit: the dataset is shuffled and split into
// disjoint member/non-member halves; per trial a 1-shot demonstration is
// built from the member pool (DP-generated or verbatim), candidates are
// scored by length-normalized log-likelihood of their content under the
// ICL prompt containing the demonstration, and ROC/AUC summarize
// member-vs-non-member separation.
MiaReport RunMia(const LabeledDataset& dataset, const TaskPreset& preset,
                 const MiaOptions& options, LanguageModel& gen_lm,
                 LanguageModel& infer_lm, RandomStream& rng);

// CSV rows: trial,candidate_id,is_member,score (with a comment header
// carrying the config hash and seeds).
void WriteMiaCsv(std::ostream& out, const MiaReport& report,
                 const std::string& config_hash, uint64_t seed);

// Length-normalized log-likelihood of `content` continued from `prefix`
// (the attack score; exposed for tests).
double SequenceLogLikelihood(LanguageModel& lm, const std::string& prefix,
                             const std::string& content);

// Prompt prefix for likelihood scoring: instruction, demos, then the query
// pattern up to its {content} placeholder.
std::string BuildIclScoringPrefix(const PromptTemplate& tmpl,
                                  const std::vector<Example>& demos);

}  // namespace dpfs

#endif  // DPFS_EVAL_H_

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
// Acceptance suite: one criterion per check, one PASS/FAIL line each, with
// every tolerance pinned in code. Returns the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpfs/accountant.hpp"
#include "dpfs/config.hpp"
#include "dpfs/dataset.hpp"
#include "dpfs/eval.hpp"
#include "dpfs/generator.hpp"
#include "dpfs/lm.hpp"
#include "dpfs/mechanisms.hpp"
#include "dpfs/prompt.hpp"
#include "dpfs/rng.hpp"
#include "support/toy_lm.hpp"

namespace {

using namespace dpfs;
using dpfs::testing::MakeThreeClassTask;
using dpfs::testing::ToyTask;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  Check() = default;

  void Expect(bool condition, const std::string& what) {
    if (!condition) {
      pass_ = false;
      if (!detail_.empty()) detail_ += "; ";
      detail_ += what;
    }
  }

  void Note(const std::string& what) {
    if (!notes_.empty()) notes_ += "; ";
    notes_ += what;
  }

  Outcome Finish(double elapsed_s, double budget_s) {
    Expect(elapsed_s < budget_s,
           "runtime " + Fmt(elapsed_s) + "s over the " + Fmt(budget_s) +
               "s budget");
    Outcome outcome;
    outcome.pass = pass_;
    outcome.detail = notes_;
    if (!detail_.empty()) {
      outcome.detail += outcome.detail.empty() ? detail_ : "; " + detail_;
    }
    return outcome;
  }

  static std::string Fmt(double value) {
    std::ostringstream out;
    out.precision(4);
    out << value;
    return out.str();
  }

 private:
  bool pass_ = true;
  std::string detail_;
  std::string notes_;
};

// --- 1. Accountant vs the quoted budget pairs ------------------------------

Outcome Criterion1(Check& check) {
  const auto composed =
      PrivacyLossDistribution::SubsampledGaussian(0.51, 20.0 / 30000.0, 1e-4)
          .SelfCompose(100);
  const double d1 = composed.DeltaForEpsilon(1.0);
  const double d19 = composed.DeltaForEpsilon(1.9);
  check.Note("delta(1.0)=" + Check::Fmt(d1) + " vs quoted 3e-4, delta(1.9)=" +
             Check::Fmt(d19) + " vs quoted 3e-5");
  check.Expect(d1 >= 1.5e-4 && d1 <= 6.0e-4,
               "delta(1.0) outside a factor of 2 of 3e-4");
  check.Expect(d19 >= 1.5e-5 && d19 <= 6.0e-5,
               "delta(1.9) outside a factor of 2 of 3e-5");
  return {};
}

// --- 2. Calibration against the published sigma columns --------------------

Outcome Criterion2(Check& check) {
  struct Preset {
    const char* name;
    double gamma;
    int steps;
    double delta;
    double published[4];
  };
  const Preset presets[] = {
      {"agnews", 20.0 / 30000.0, 100, 1.0 / 30000.0, {0.51, 0.46, 0.39, 0.31}},
      {"dbpedia", 80.0 / 40000.0, 100, 1.0 / 40000.0, {0.63, 0.54, 0.45, 0.36}},
      {"trec", 80.0 / 835.0, 15, 1.0 / 835.0, {1.36, 0.95, 0.69, 0.51}},
  };
  const double epsilons[] = {1.0, 2.0, 4.0, 8.0};
  for (const Preset& preset : presets) {
    double previous = std::numeric_limits<double>::infinity();
    std::string sigmas;
    for (int i = 0; i < 4; ++i) {
      const double sigma =
          CalibrateSigma({epsilons[i], preset.delta}, preset.gamma,
                         preset.steps, MechanismKind::kGaussian);
      sigmas += (i ? "," : "") + Check::Fmt(sigma);
      const double relative_error =
          std::abs(sigma - preset.published[i]) / preset.published[i];
      check.Expect(relative_error <= 0.20,
                   std::string(preset.name) + " eps=" + Check::Fmt(epsilons[i]) +
                       ": sigma " + Check::Fmt(sigma) + " vs published " +
                       Check::Fmt(preset.published[i]));
      check.Expect(sigma < previous,
                   std::string(preset.name) + ": sigma not strictly decreasing");
      previous = sigma;
    }
    check.Note(std::string(preset.name) + " sigma=[" + sigmas + "]");
  }
  return {};
}

// --- 3. Accountant internal oracles -----------------------------------------

Outcome Criterion3(Check& check) {
  // (a) gamma = 1 PLD vs the analytic curve.
  for (double m : {0.51, 1.0}) {
    const auto pld = PrivacyLossDistribution::SubsampledGaussian(m, 1.0, 1e-4);
    double worst = 0.0;
    for (double eps = 0.0; eps <= 10.0; eps += 0.1) {
      worst = std::max(worst, std::abs(pld.DeltaForEpsilon(eps) -
                                       GaussianCurveDelta(eps, m)));
    }
    check.Expect(worst < 1e-4, "gamma=1 m=" + Check::Fmt(m) +
                                   " analytic gap " + Check::Fmt(worst));
  }

  // (b) T-fold composition vs the m / sqrt(T) single shot.
  {
    const int steps = 4;
    const double m = 2.0;
    const auto composed =
        PrivacyLossDistribution::SubsampledGaussian(m, 1.0, 1e-5)
            .SelfCompose(steps);
    double worst = 0.0;
    for (double eps = 0.0; eps <= 6.0; eps += 0.25) {
      worst = std::max(worst,
                       std::abs(composed.DeltaForEpsilon(eps) -
                                GaussianCurveDelta(eps, m / std::sqrt(4.0))));
    }
    check.Expect(worst < 1e-4, "composition identity gap " + Check::Fmt(worst));
  }

  // (c) Monte Carlo cross-check of the dominating pair, 1e7 samples.
  struct McCase {
    double m, gamma, eps;
    int steps;
  };
  const McCase cases[] = {{1.0, 1.0, 1.0, 3}, {1.0, 0.1, 0.2, 2},
                          {0.7, 0.1, 0.1, 3}};
  for (const McCase& c : cases) {
    const auto composed =
        PrivacyLossDistribution::SubsampledGaussian(c.m, c.gamma, 1e-5)
            .SelfCompose(c.steps);
    const double numeric = composed.DeltaForEpsilon(c.eps, PldDirection::kRemove);

    RandomStream rng(777);
    const int samples = 10000000;
    long double acc = 0.0L, acc2 = 0.0L;
    for (int s = 0; s < samples; ++s) {
      double loss = 0.0;
      for (int t = 0; t < c.steps; ++t) {
        const bool shifted = rng.Uniform() < c.gamma;
        const double x = (shifted ? 1.0 : 0.0) + rng.Normal(c.m);
        loss +=
            std::log1p(c.gamma * std::expm1((2.0 * x - 1.0) / (2.0 * c.m * c.m)));
      }
      const double f = loss > c.eps ? 1.0 - std::exp(c.eps - loss) : 0.0;
      acc += f;
      acc2 += f * f;
    }
    const double mc = static_cast<double>(acc) / samples;
    const double variance =
        static_cast<double>(acc2) / samples - mc * mc;
    const double se = std::sqrt(std::max(variance, 0.0) / samples);
    check.Expect(std::abs(numeric - mc) <= 3.0 * se,
                 "MC gap " + Check::Fmt(std::abs(numeric - mc)) + " > 3*SE=" +
                     Check::Fmt(3.0 * se) + " (gamma=" + Check::Fmt(c.gamma) +
                     ", T=" + std::to_string(c.steps) + ")");
  }
  return {};
}

// --- 4. Mechanism sensitivity properties ------------------------------------

Outcome Criterion4(Check& check) {
  RandomStream rng(4242);
  auto random_prob_vector = [&rng](size_t dim) {
    ProbVector v(dim);
    double total = 0.0;
    for (double& p : v) {
      p = rng.Exponential(1.0);
      total += p;
    }
    for (double& p : v) p /= total;
    return v;
  };

  double worst_l2 = 0.0, worst_linf = 0.0;
  for (int pair = 0; pair < 10000; ++pair) {
    const size_t dim = 2 + rng.UniformInt(12);
    const size_t m = 1 + rng.UniformInt(10);
    std::vector<ProbVector> vectors;
    for (size_t i = 0; i < m; ++i) vectors.push_back(random_prob_vector(dim));
    std::vector<ProbVector> neighbor = vectors;
    neighbor[rng.UniformInt(m)] = random_prob_vector(dim);

    double norm_sq = 0.0;
    for (size_t j = 0; j < dim; ++j) {
      double diff = 0.0;
      for (size_t i = 0; i < m; ++i) diff += vectors[i][j] - neighbor[i][j];
      norm_sq += diff * diff;
    }
    worst_l2 = std::max(worst_l2, std::sqrt(norm_sq));

    for (size_t j = 0; j < dim; ++j) {
      double a = 0.0, b = 0.0;
      for (size_t i = 0; i < m; ++i) {
        a += vectors[i][j] / *std::max_element(vectors[i].begin(), vectors[i].end());
        b += neighbor[i][j] /
             *std::max_element(neighbor[i].begin(), neighbor[i].end());
      }
      worst_linf = std::max(worst_linf, std::abs(a - b));
    }
  }
  check.Note("worst l2=" + Check::Fmt(worst_l2) + ", worst linf=" +
             Check::Fmt(worst_linf));
  check.Expect(worst_l2 <= std::sqrt(2.0) + 1e-9, "l2 sensitivity exceeded");
  check.Expect(worst_linf <= 1.0 + 1e-12, "linf sensitivity exceeded");
  return {};
}

// --- 5. RNM empirical pure DP ------------------------------------------------

Outcome Criterion5(Check& check) {
  const double sigma = 1.0;
  const int trials = 1000000;
  std::vector<ProbVector> base(5, ProbVector{1.0, 0.5});
  std::vector<ProbVector> neighbor = base;
  neighbor[0] = {0.4, 1.0};

  auto frequency = [&](const std::vector<ProbVector>& vectors, uint64_t seed) {
    RandomStream rng(seed);
    int count0 = 0;
    for (int t = 0; t < trials; ++t) {
      if (RnmExpoSelect(vectors, sigma, rng) == 0) ++count0;
    }
    return static_cast<double>(count0) / trials;
  };
  const double p = frequency(base, 51);
  const double q = frequency(neighbor, 52);
  const double se_both =
      std::sqrt((1 - p) / (p * trials) + (1 - q) / (q * trials));
  const double se_other = std::sqrt(p / ((1 - p) * trials) + q / ((1 - q) * trials));
  const double ratio0 = std::abs(std::log(p / q));
  const double ratio1 = std::abs(std::log((1 - p) / (1 - q)));
  check.Note("log-ratios " + Check::Fmt(ratio0) + ", " + Check::Fmt(ratio1) +
             " vs eps=1");
  check.Expect(ratio0 <= sigma + 3.0 * se_both, "token-0 log-ratio exceeds eps");
  check.Expect(ratio1 <= sigma + 3.0 * se_other, "token-1 log-ratio exceeds eps");
  return {};
}

// --- shared toy-pipeline plumbing -------------------------------------------

std::vector<int> GreedySubsetAverageDecode(const LabeledDataset& dataset,
                                           const std::string& label,
                                           const MechanismConfig& config,
                                           LanguageModel& lm,
                                           const PromptTemplate& tmpl,
                                           RandomStream& rng) {
  const std::vector<int> pool = PerLabelPool(dataset, label);
  std::vector<int> ids;
  for (int t = 0; t < config.max_tokens; ++t) {
    const SubsampleBatch batch =
        SubsampleAndSplit(pool, config.subset_count, config.subset_size, rng);
    const std::string partial = lm.ContinuationText(ids);
    std::vector<double> mean;
    for (const auto& subset : batch.subsets) {
      std::vector<Example> demos;
      for (int index : subset) {
        demos.push_back(dataset.examples[static_cast<size_t>(index)]);
      }
      const ProbVector dist = lm.NextTokenDistribution(
          BuildGenerationPrompt(tmpl, demos, label, partial));
      if (mean.empty()) mean.assign(dist.size(), 0.0);
      for (size_t j = 0; j < dist.size(); ++j) mean[j] += dist[j];
    }
    const int token = ArgmaxTiebreak(mean);
    if (lm.IsEos(token)) break;
    ids.push_back(token);
  }
  return ids;
}

// Four shots over the three-class label set: each label once (shuffled),
// plus one more random label.
std::vector<std::string> FourShotLabels(const TaskPreset& preset,
                                        RandomStream& rng) {
  std::vector<std::string> labels = preset.labels;
  rng.Shuffle(labels);
  labels.push_back(preset.labels[rng.UniformInt(preset.labels.size())]);
  return labels;
}

double ToyPipelineAccuracy(const ToyTask& task, const MechanismConfig& config,
                           const std::vector<uint64_t>& seeds) {
  std::vector<std::vector<Example>> demo_sets;
  for (uint64_t seed : seeds) {
    RandomStream rng(seed);
    std::vector<Example> demos;
    for (const std::string& label : FourShotLabels(task.preset, rng)) {
      demos.push_back(GenerateSample(task.dataset, label, config, *task.lm,
                                     task.preset.generation, rng)
                          .first);
    }
    demo_sets.push_back(std::move(demos));
  }
  return EvaluateAccuracy(*task.lm, demo_sets, task.test_queries, task.preset)
      .mean;
}

// --- 6. Zero-noise reduction --------------------------------------------------

Outcome Criterion6(Check& check) {
  ToyTask task = MakeThreeClassTask(606, 120, 5);
  MechanismConfig config = task.preset.mechanism;
  config.sigma = 0.0;
  int mismatches = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    RandomStream gen_rng(seed), oracle_rng(seed);
    const std::string label =
        task.preset.labels[seed % task.preset.labels.size()];
    const auto [demo, trace] = GenerateSample(
        task.dataset, label, config, *task.lm, task.preset.generation, gen_rng);
    const std::vector<int> expected = GreedySubsetAverageDecode(
        task.dataset, label, config, *task.lm, task.preset.generation,
        oracle_rng);
    if (trace.token_ids != expected) ++mismatches;
  }
  check.Note("mismatches over 20 seeds: " + std::to_string(mismatches));
  check.Expect(mismatches == 0, "sigma=0 decode diverged from the oracle");
  return {};
}

// --- 7. RVP containment --------------------------------------------------------

Outcome Criterion7(Check& check) {
  ToyTask task = MakeThreeClassTask(707, 120, 5);
  MechanismConfig config = task.preset.mechanism;
  config.sigma = 0.8;
  config.rvp = true;
  config.rvp_top_k = 6;
  int audited = 0, contained = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    RandomStream rng(seed);
    const std::string label =
        task.preset.labels[seed % task.preset.labels.size()];
    const auto [demo, trace] = GenerateSample(
        task.dataset, label, config, *task.lm, task.preset.generation, rng);
    for (size_t t = 0; t < trace.steps.size(); ++t) {
      ++audited;
      const StepRecord& record = trace.steps[t];
      if (std::find(record.rvp_set.begin(), record.rvp_set.end(),
                    trace.token_ids[t]) != record.rvp_set.end()) {
        ++contained;
      }
    }
  }
  check.Note(std::to_string(contained) + "/" + std::to_string(audited) +
             " emitted tokens inside the step's top-K set");
  check.Expect(audited > 0, "no tokens audited");
  check.Expect(contained == audited, "an emitted token escaped the RVP set");
  return {};
}

// --- 8. End-to-end toy pipeline -------------------------------------------------

Outcome Criterion8(Check& check) {
  ToyTask task = MakeThreeClassTask(808, 240, 30);
  const std::vector<uint64_t> seeds{11, 22, 33, 44, 55};

  // 0-shot baseline.
  const double zero_shot =
      EvaluateAccuracy(*task.lm, {{}}, task.test_queries, task.preset).mean;

  // DP 4-shot at eps = 8 with the calibrated noise.
  MechanismConfig dp_config = task.preset.mechanism;
  const double gamma =
      static_cast<double>(dp_config.subset_count) * dp_config.subset_size /
      task.preset.pool_size;
  dp_config.sigma =
      CalibrateSigma({8.0, task.preset.default_delta}, gamma, task.preset.t_max,
                     MechanismKind::kGaussian);
  const double dp_accuracy = ToyPipelineAccuracy(task, dp_config, seeds);

  // sigma = 0 run vs the independent non-private oracle decode.
  MechanismConfig nonprivate = task.preset.mechanism;
  nonprivate.sigma = 0.0;
  const double sigma0_accuracy = ToyPipelineAccuracy(task, nonprivate, seeds);
  std::vector<std::vector<Example>> oracle_sets;
  for (uint64_t seed : seeds) {
    RandomStream rng(seed);
    std::vector<Example> demos;
    for (const std::string& label : FourShotLabels(task.preset, rng)) {
      const std::vector<int> ids = GreedySubsetAverageDecode(
          task.dataset, label, nonprivate, *task.lm, task.preset.generation,
          rng);
      demos.push_back(Example{task.lm->ContentText(ids), label});
    }
    oracle_sets.push_back(std::move(demos));
  }
  const double oracle_accuracy =
      EvaluateAccuracy(*task.lm, oracle_sets, task.test_queries, task.preset)
          .mean;

  check.Note("0-shot=" + Check::Fmt(zero_shot) + ", dp(eps=8, sigma=" +
             Check::Fmt(dp_config.sigma) + ")=" + Check::Fmt(dp_accuracy) +
             ", sigma0=" + Check::Fmt(sigma0_accuracy) + ", non-private=" +
             Check::Fmt(oracle_accuracy));
  check.Expect(dp_accuracy > zero_shot,
               "DP 4-shot accuracy does not beat the 0-shot baseline");
  check.Expect(std::abs(sigma0_accuracy - oracle_accuracy) <= 0.02,
               "sigma=0 run differs from the non-private baseline by > 2pp");
  return {};
}

// --- 9. MIA harness ---------------------------------------------------------------

Outcome Criterion9(Check& check) {
  // Null attacker: i.i.d. random scores.
  {
    RandomStream rng(91);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 20000; ++i) {
      scores.push_back(rng.Uniform());
      labels.push_back(static_cast<int>(rng.UniformInt(2)));
    }
    const double auc = ComputeAuc(scores, labels);
    check.Note("null AUC=" + Check::Fmt(auc));
    check.Expect(std::abs(auc - 0.5) <= 0.02, "null attacker AUC off 0.5");
  }
  // Oracle attacker: the membership bit as the score.
  {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 1000; ++i) {
      scores.push_back(i % 2);
      labels.push_back(i % 2);
    }
    check.Expect(ComputeAuc(scores, labels) == 1.0, "oracle attacker AUC != 1");
  }

  // Toy LM: non-private demos must leak strictly more than DP demos at a
  // noise level calibrated for eps = 1.
  ToyTask task = MakeThreeClassTask(909, 120, 5, /*unique_id_tokens=*/true);
  task.preset.t_max = 4;
  task.preset.mechanism.max_tokens = 4;
  task.preset.mechanism.subset_count = 5;

  MiaOptions dp_options;
  dp_options.trials = 100;
  dp_options.members_per_trial = 50;
  dp_options.nonmembers_per_trial = 50;
  dp_options.dp_generation = true;
  dp_options.mechanism = task.preset.mechanism;
  const int member_pool_per_label = 120 * 3 / 2 / 3;
  const double gamma =
      static_cast<double>(dp_options.mechanism.subset_count) /
      member_pool_per_label;
  dp_options.mechanism.sigma = CalibrateSigma(
      {1.0, 1.0 / (120 * 3 / 2)}, gamma, task.preset.t_max,
      MechanismKind::kGaussian);

  RandomStream dp_rng(92);
  const MiaReport dp_report =
      RunMia(task.dataset, task.preset, dp_options, *task.lm, *task.lm, dp_rng);

  MiaOptions verbatim = dp_options;
  verbatim.dp_generation = false;
  RandomStream np_rng(92);
  const MiaReport np_report =
      RunMia(task.dataset, task.preset, verbatim, *task.lm, *task.lm, np_rng);

  check.Note("dp AUC=" + Check::Fmt(dp_report.auc) + " (sigma=" +
             Check::Fmt(dp_options.mechanism.sigma) + "), non-private AUC=" +
             Check::Fmt(np_report.auc) + " over 100 trials");
  check.Expect(np_report.auc > dp_report.auc,
               "non-private AUC not above DP AUC");
  return {};
}

// --- 10. Cost formula ----------------------------------------------------------------

Outcome Criterion10(Check& check) {
  RandomStream rng(1010);
  int mismatches = 0;
  for (int round = 0; round < 1000; ++round) {
    const int64_t m = static_cast<int64_t>(rng.UniformInt(50));
    const int64_t p = static_cast<int64_t>(rng.UniformInt(2000));
    const int64_t t_max = static_cast<int64_t>(rng.UniformInt(300));
    int64_t brute = 0;
    for (int64_t t = p; t <= p + t_max; ++t) brute += t;
    brute *= m;
    if (EstimateCost(m, p, t_max, 0.0).total_tokens != brute) ++mismatches;
  }
  check.Expect(mismatches == 0,
               std::to_string(mismatches) + " closed-form mismatches");
  return {};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome(Check&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "accountant vs quoted budget pairs (sigma=0.51, gamma=20/30000, T=100)",
       10.0, Criterion1},
      {2, "calibration within 20% of the published sigma columns", 60.0,
       Criterion2},
      {3, "accountant oracles: analytic curve, composition identity, Monte Carlo",
       120.0, Criterion3},
      {4, "aggregation sensitivity bounds over 1e4 random neighbors", 10.0,
       Criterion4},
      {5, "RNM empirical pure DP at eps=1 over 1e6 trials", 60.0, Criterion5},
      {6, "sigma=0 generation bitwise equals the greedy subset-average decode",
       30.0, Criterion6},
      {7, "every emitted token lies in its step's public top-K set", 60.0,
       Criterion7},
      {8, "toy pipeline: DP 4-shot beats 0-shot; sigma=0 matches non-private",
       300.0, Criterion8},
      {9, "MIA: null 0.5, oracle 1.0, non-private leaks more than DP", 300.0,
       Criterion9},
      {10, "cost closed form equals brute-force summation exactly", 30.0,
       Criterion10},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      criterion.run(check);
      const double elapsed_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      outcome = check.Finish(elapsed_s, criterion.budget_s);
      std::printf("%s  criterion %2d: %s [%.1fs]%s%s\n",
                  outcome.pass ? "PASS" : "FAIL", criterion.id,
                  criterion.name.c_str(), elapsed_s,
                  outcome.detail.empty() ? "" : " -- ",
                  outcome.detail.c_str());
    } catch (const std::exception& e) {
      outcome.pass = false;
      std::printf("FAIL  criterion %2d: %s -- exception: %s\n", criterion.id,
                  criterion.name.c_str(), e.what());
    }
    if (!outcome.pass) ++failures;
  }
  if (failures > 0) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  } else {
    std::printf("all %zu criteria passed\n", criteria.size());
  }
  return failures;
}

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
// dpfs: DP few-shot demonstration generation, calibration, evaluation, and
// membership-inference auditing.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpfs/accountant.hpp"
#include "dpfs/config.hpp"
#include "dpfs/dataset.hpp"
#include "dpfs/error.hpp"
#include "dpfs/eval.hpp"
#include "dpfs/generator.hpp"
#include "dpfs/lm.hpp"
#include "dpfs/prompt.hpp"
#include "dpfs/remote_lm.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitRuntimeError = 1;
constexpr int kExitConfigError = 2;

struct CommonArgs {
  std::string config_path;
  std::string task;
  std::string presets_dir = "presets";
  std::string dataset_path;
  std::string out_dir;
  std::string backend;
  std::string inference_backend;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> sigma;
  std::optional<int> shots;
  std::string seeds_csv;
};

std::vector<uint64_t> ParseSeeds(const std::string& csv) {
  std::vector<uint64_t> seeds;
  std::istringstream stream(csv);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    seeds.push_back(std::stoull(item));
  }
  return seeds;
}

// Backend spec strings: "local:<corpus>[:<order>[:<alpha>]]" or
// "remote:<base_url>,<model>".
dpfs::BackendSpec ParseBackendString(const std::string& text) {
  dpfs::BackendSpec backend;
  if (text.rfind("local:", 0) == 0) {
    backend.kind = dpfs::BackendSpec::Kind::kLocalNgram;
    std::string rest = text.substr(6);
    std::istringstream stream(rest);
    std::string part;
    std::getline(stream, part, ':');
    backend.corpus_path = part;
    if (std::getline(stream, part, ':')) backend.order = std::stoi(part);
    if (std::getline(stream, part, ':')) backend.alpha = std::stod(part);
    return backend;
  }
  if (text.rfind("remote:", 0) == 0) {
    backend.kind = dpfs::BackendSpec::Kind::kRemote;
    const std::string rest = text.substr(7);
    const size_t comma = rest.rfind(',');
    if (comma == std::string::npos) {
      throw dpfs::ConfigError("remote backend spec: remote:<base_url>,<model>");
    }
    backend.remote.base_url = rest.substr(0, comma);
    backend.remote.model = rest.substr(comma + 1);
    return backend;
  }
  throw dpfs::ConfigError("backend spec must start with local: or remote:");
}

dpfs::RunConfig ResolveRunConfig(const CommonArgs& args) {
  dpfs::RunConfig config;
  if (!args.config_path.empty()) config = dpfs::LoadRunConfig(args.config_path);
  if (!args.task.empty()) config.task = args.task;
  if (!args.dataset_path.empty()) config.dataset_path = args.dataset_path;
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.backend.empty()) {
    config.generation_backend = ParseBackendString(args.backend);
  }
  if (!args.inference_backend.empty()) {
    config.inference_backend = ParseBackendString(args.inference_backend);
  }
  if (args.epsilon.has_value()) {
    dpfs::PrivacyBudget target;
    target.epsilon = *args.epsilon;
    target.delta = args.delta.value_or(0.0);
    config.target = target;
    config.sigma.reset();
  }
  if (args.sigma.has_value()) {
    config.sigma = *args.sigma;
    config.target.reset();
  }
  if (args.shots.has_value()) config.n_shots = *args.shots;
  if (!args.seeds_csv.empty()) config.seeds = ParseSeeds(args.seeds_csv);
  if (config.seeds.empty()) config.seeds = {1};
  return config;
}

dpfs::TaskPreset ResolvePreset(const CommonArgs& args,
                               const dpfs::RunConfig& config) {
  std::string path = config.task;
  if (!fs::exists(path)) {
    path = (fs::path(args.presets_dir) / (config.task + ".toml")).string();
  }
  if (!fs::exists(path)) {
    throw dpfs::ConfigError("cannot find preset for task '" + config.task +
                            "' (looked for " + path + ")");
  }
  return dpfs::LoadTaskPreset(path);
}

// Preset mechanism defaults overlaid with run-config overrides.
dpfs::MechanismConfig EffectiveMechanism(const dpfs::TaskPreset& preset,
                                         const dpfs::RunConfig& config,
                                         bool config_has_mechanism) {
  dpfs::MechanismConfig mech =
      config_has_mechanism ? config.mechanism : preset.mechanism;
  mech.sigma = config.sigma.value_or(0.0);
  return mech;
}

std::unique_ptr<dpfs::LanguageModel> MakeBackend(const dpfs::BackendSpec& spec) {
  spec.Validate();
  if (spec.kind == dpfs::BackendSpec::Kind::kLocalNgram) {
    std::ifstream in(spec.corpus_path);
    if (!in) {
      throw dpfs::ConfigError("cannot open corpus: " + spec.corpus_path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) lines.push_back(line);
    }
    return std::make_unique<dpfs::LocalNgramLm>(
        dpfs::LocalNgramLm::TrainOnLines(lines, spec.order, spec.alpha));
  }
  return std::make_unique<dpfs::RemoteLmClient>(spec.remote);
}

double ReportDelta(const dpfs::RunConfig& config,
                   const dpfs::TaskPreset& preset) {
  if (config.target.has_value() && config.target->delta > 0.0) {
    return config.target->delta;
  }
  return preset.default_delta;
}

int CmdCalibrate(const CommonArgs& args) {
  dpfs::RunConfig config = ResolveRunConfig(args);
  const dpfs::TaskPreset preset = ResolvePreset(args, config);
  if (!config.target.has_value()) {
    throw dpfs::ConfigError("calibrate needs --epsilon (target budget mode)");
  }
  dpfs::PrivacyBudget target = *config.target;
  if (target.delta == 0.0 &&
      preset.mechanism.kind == dpfs::MechanismKind::kGaussian) {
    target.delta = preset.default_delta;
  }
  const dpfs::MechanismConfig mech = preset.mechanism;
  const double gamma = static_cast<double>(mech.subset_count) *
                       mech.subset_size / preset.pool_size;
  const int steps = preset.t_max;

  const double sigma =
      dpfs::CalibrateSigma(target, gamma, steps, mech.kind);
  const double achieved = dpfs::ComposedDelta(
      {sigma, gamma, steps, mech.kind}, target.epsilon);

  std::cout << "task=" << preset.name << " mechanism=" << ToString(mech.kind)
            << " epsilon=" << target.epsilon << " delta=" << target.delta
            << " gamma=" << gamma << " steps=" << steps << " sigma=" << sigma
            << " achieved_delta=" << achieved << "\n";

  if (!config.out_dir.empty() && config.out_dir != ".") {
    fs::create_directories(config.out_dir);
    json out{{"task", preset.name},
             {"mechanism", ToString(mech.kind)},
             {"epsilon", target.epsilon},
             {"delta", target.delta},
             {"gamma", gamma},
             {"steps", steps},
             {"sigma", sigma},
             {"achieved_delta", achieved},
             {"config_hash", dpfs::ConfigHashHex(config)}};
    std::ofstream file(fs::path(config.out_dir) / "calibration.json");
    file << out.dump(2) << "\n";
  }
  return 0;
}

int CmdGenerate(const CommonArgs& args) {
  dpfs::RunConfig config = ResolveRunConfig(args);
  const dpfs::TaskPreset preset = ResolvePreset(args, config);
  config.mechanism = preset.mechanism;
  config.Validate();

  dpfs::MechanismConfig mech = preset.mechanism;
  const double report_delta = ReportDelta(config, preset);
  if (config.sigma.has_value()) {
    mech.sigma = *config.sigma;
  } else {
    dpfs::PrivacyBudget target = *config.target;
    if (target.delta == 0.0 && mech.kind == dpfs::MechanismKind::kGaussian) {
      target.delta = preset.default_delta;
    }
    const double gamma = static_cast<double>(mech.subset_count) *
                         mech.subset_size / preset.pool_size;
    mech.sigma = dpfs::CalibrateSigma(target, gamma, preset.t_max, mech.kind);
    std::cout << "calibrated sigma=" << mech.sigma << "\n";
  }

  const dpfs::LabeledDataset dataset =
      dpfs::LoadDataset(config.dataset_path, preset.label_mode);
  std::unique_ptr<dpfs::LanguageModel> gen_lm =
      MakeBackend(config.generation_backend);

  fs::create_directories(config.out_dir);
  const std::string config_hash = dpfs::ConfigHashHex(config);
  const dpfs::ShotPolicy policy =
      preset.label_mode == dpfs::LabelMode::kFixedSet
          ? dpfs::ShotPolicy::kLabelsWithoutReplacement
          : dpfs::ShotPolicy::kOpenForm;

  for (uint64_t seed : config.seeds) {
    dpfs::RandomStream rng(seed);
    dpfs::ShotSet shots =
        dpfs::GenerateShots(dataset, mech, config.n_shots, policy,
                            /*fixed_label=*/"", *gen_lm, preset, report_delta,
                            rng);
    const std::string demos_path =
        (fs::path(config.out_dir) / ("demos-" + std::to_string(seed) + ".jsonl"))
            .string();
    const std::string sidecar_path =
        (fs::path(config.out_dir) /
         ("provenance-" + std::to_string(seed) + ".json"))
            .string();
    dpfs::SaveShotSet(shots, demos_path, sidecar_path, config_hash);
    std::cout << "seed=" << seed << " wrote " << shots.demos.size()
              << " demos to " << demos_path << "\n";
  }
  return 0;
}

std::vector<dpfs::IclQuery> LoadQueries(const std::string& path) {
  const dpfs::LabeledDataset test =
      dpfs::LoadDataset(path, dpfs::LabelMode::kOpenForm);
  std::vector<dpfs::IclQuery> queries;
  queries.reserve(test.examples.size());
  for (const dpfs::Example& example : test.examples) {
    queries.push_back({example.content, example.label});
  }
  return queries;
}

int CmdEvaluate(const CommonArgs& args, const std::string& demos_dir,
                const std::string& test_path) {
  dpfs::RunConfig config = ResolveRunConfig(args);
  const dpfs::TaskPreset preset = ResolvePreset(args, config);

  const dpfs::BackendSpec infer_spec =
      config.inference_backend.value_or(config.generation_backend);
  std::unique_ptr<dpfs::LanguageModel> infer_lm = MakeBackend(infer_spec);

  std::vector<std::vector<dpfs::Example>> demo_sets;
  json per_seed_meta = json::array();
  if (config.n_shots == 0) {
    demo_sets.push_back({});  // the 0-shot baseline
  } else {
    if (demos_dir.empty()) {
      throw dpfs::ConfigError("evaluate needs --demos (or --shots 0)");
    }
    for (uint64_t seed : config.seeds) {
      const fs::path path =
          fs::path(demos_dir) / ("demos-" + std::to_string(seed) + ".jsonl");
      if (!fs::exists(path)) {
        throw dpfs::ConfigError("missing demos file: " + path.string());
      }
      demo_sets.push_back(dpfs::LoadShotSetDemos(path.string()));
      per_seed_meta.push_back({{"seed", seed}, {"demos", path.string()}});
    }
  }

  const std::vector<dpfs::IclQuery> test_set = LoadQueries(test_path);
  const dpfs::AccuracyStats stats =
      dpfs::EvaluateAccuracy(*infer_lm, demo_sets, test_set, preset);

  std::cout << "task=" << preset.name << " n_shots=" << config.n_shots
            << " runs=" << stats.per_run.size() << " mean=" << stats.mean
            << " std=" << stats.stddev << "\n";

  json out{{"task", preset.name},
           {"n_shots", config.n_shots},
           {"mechanism", ToString(preset.mechanism.kind)},
           {"per_seed_accuracy", stats.per_run},
           {"mean", stats.mean},
           {"std", stats.stddev},
           {"seeds", config.seeds},
           {"config_hash", dpfs::ConfigHashHex(config)}};
  if (config.sigma.has_value()) out["sigma"] = *config.sigma;
  if (config.target.has_value()) {
    out["epsilon"] = config.target->epsilon;
    out["delta"] = config.target->delta;
  }
  if (!per_seed_meta.empty()) out["demo_files"] = per_seed_meta;

  fs::create_directories(config.out_dir);
  const fs::path results_path = fs::path(config.out_dir) / "results.json";
  std::ofstream file(results_path);
  file << out.dump(2) << "\n";
  std::cout << "wrote " << results_path.string() << "\n";
  return 0;
}

int CmdMia(const CommonArgs& args, int trials, int members, int nonmembers,
           bool nonprivate) {
  dpfs::RunConfig config = ResolveRunConfig(args);
  const dpfs::TaskPreset preset = ResolvePreset(args, config);
  config.mechanism = preset.mechanism;

  dpfs::MiaOptions options;
  options.trials = trials;
  options.members_per_trial = members;
  options.nonmembers_per_trial = nonmembers;
  options.dp_generation = !nonprivate;
  options.mechanism = preset.mechanism;
  options.mechanism.sigma = config.sigma.value_or(0.0);
  if (options.dp_generation && config.target.has_value()) {
    const double gamma = static_cast<double>(preset.mechanism.subset_count) *
                         preset.mechanism.subset_size / preset.pool_size;
    dpfs::PrivacyBudget target = *config.target;
    if (target.delta == 0.0 &&
        preset.mechanism.kind == dpfs::MechanismKind::kGaussian) {
      target.delta = preset.default_delta;
    }
    options.mechanism.sigma = dpfs::CalibrateSigma(
        target, gamma, preset.t_max, preset.mechanism.kind);
  }

  const dpfs::LabeledDataset dataset =
      dpfs::LoadDataset(config.dataset_path, preset.label_mode);
  std::unique_ptr<dpfs::LanguageModel> gen_lm =
      MakeBackend(config.generation_backend);
  const dpfs::BackendSpec infer_spec =
      config.inference_backend.value_or(config.generation_backend);
  std::unique_ptr<dpfs::LanguageModel> infer_lm = MakeBackend(infer_spec);

  dpfs::RandomStream rng(config.seeds.front());
  const dpfs::MiaReport report =
      dpfs::RunMia(dataset, preset, options, *gen_lm, *infer_lm, rng);

  std::cout << "trials=" << report.trials << " auc=" << report.auc << "\n";

  fs::create_directories(config.out_dir);
  const fs::path csv_path = fs::path(config.out_dir) / "mia_scores.csv";
  std::ofstream csv(csv_path);
  dpfs::WriteMiaCsv(csv, report, dpfs::ConfigHashHex(config),
                    config.seeds.front());
  json out{{"task", preset.name},
           {"auc", report.auc},
           {"trials", report.trials},
           {"members_per_trial", report.member_count},
           {"nonmembers_per_trial", report.nonmember_count},
           {"dp_generation", options.dp_generation},
           {"sigma", options.mechanism.sigma},
           {"score_kind", report.score_kind},
           {"config_hash", dpfs::ConfigHashHex(config)},
           {"seeds", config.seeds}};
  std::ofstream file(fs::path(config.out_dir) / "mia_report.json");
  file << out.dump(2) << "\n";
  std::cout << "wrote " << csv_path.string() << "\n";
  return 0;
}

int CmdCost(int64_t m, int64_t prompt_tokens, int64_t t_max, double price) {
  const dpfs::CostEstimate estimate =
      dpfs::EstimateCost(m, prompt_tokens, t_max, price);
  std::cout << "total_tokens=" << estimate.total_tokens
            << " dollars=" << estimate.dollars << "\n";
  return 0;
}

int CmdCurves(const CommonArgs& args, double sigma, double gamma, int steps,
              const std::string& kind, double eps_min, double eps_max,
              int points, const std::string& out_path) {
  dpfs::AccountantParams params;
  params.sigma = sigma;
  params.gamma = gamma;
  params.steps = steps;
  if (kind == "gaussian") {
    params.kind = dpfs::MechanismKind::kGaussian;
  } else if (kind == "rnm-exponential") {
    params.kind = dpfs::MechanismKind::kRnmExponential;
  } else {
    throw dpfs::ConfigError("kind must be gaussian or rnm-exponential");
  }
  (void)args;
  if (out_path.empty()) {
    dpfs::WriteCurveCsv(std::cout, params, eps_min, eps_max, points);
  } else {
    std::ofstream out(out_path);
    if (!out) throw dpfs::Error("cannot write " + out_path);
    dpfs::WriteCurveCsv(out, params, eps_min, eps_max, points);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

void AddCommonOptions(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run config TOML");
  cmd->add_option("--task", args.task, "task preset name or file");
  cmd->add_option("--presets-dir", args.presets_dir, "preset directory");
  cmd->add_option("--dataset", args.dataset_path, "private dataset JSONL");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--backend", args.backend,
                  "generation backend: local:<corpus>[:<order>[:<alpha>]] or "
                  "remote:<base_url>,<model>");
  cmd->add_option("--inference-backend", args.inference_backend,
                  "inference backend (defaults to --backend)");
  cmd->add_option("--epsilon", args.epsilon, "target epsilon");
  cmd->add_option("--delta", args.delta, "target delta");
  cmd->add_option("--sigma", args.sigma, "explicit noise parameter");
  cmd->add_option("--shots", args.shots, "number of demonstrations");
  cmd->add_option("--seeds", args.seeds_csv, "comma-separated seeds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DP few-shot demonstration toolkit"};
  app.require_subcommand(1);

  CommonArgs args;

  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "solve sigma for a target (epsilon, delta)");
  AddCommonOptions(calibrate, args);

  CLI::App* generate =
      app.add_subcommand("generate", "generate DP demonstrations");
  AddCommonOptions(generate, args);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "ICL evaluation over demo files");
  AddCommonOptions(evaluate, args);
  std::string demos_dir, test_path;
  evaluate->add_option("--demos", demos_dir, "directory with demos-<seed>.jsonl");
  evaluate->add_option("--test", test_path, "test set JSONL")->required();

  CLI::App* mia = app.add_subcommand("mia", "membership-inference audit");
  AddCommonOptions(mia, args);
  int trials = 100, members = 50, nonmembers = 50;
  bool nonprivate = false;
  mia->add_option("--trials", trials, "attack trials");
  mia->add_option("--members", members, "scored members per trial");
  mia->add_option("--nonmembers", nonmembers, "scored non-members per trial");
  mia->add_flag("--nonprivate", nonprivate,
                "score against the verbatim member demo instead of a DP one");

  CLI::App* cost = app.add_subcommand("cost", "token/cost estimate");
  int64_t cost_m = 1, cost_prompt = 0, cost_tmax = 0;
  double cost_price = 0.0;
  cost->add_option("--m", cost_m, "LM calls per generated token");
  cost->add_option("--prompt-tokens", cost_prompt, "expected prompt length");
  cost->add_option("--t-max", cost_tmax, "max generated tokens");
  cost->add_option("--price-per-token", cost_price, "currency per token");

  CLI::App* curves = app.add_subcommand("curves", "export the privacy curve");
  AddCommonOptions(curves, args);
  double curve_sigma = 1.0, curve_gamma = 1.0;
  int curve_steps = 1, curve_points = 50;
  double curve_eps_min = 0.0, curve_eps_max = 8.0;
  std::string curve_kind = "gaussian", curve_out;
  curves->add_option("--curve-sigma", curve_sigma, "noise parameter")->required();
  curves->add_option("--gamma", curve_gamma, "sampling rate")->required();
  curves->add_option("--steps", curve_steps, "composition steps")->required();
  curves->add_option("--kind", curve_kind, "gaussian | rnm-exponential");
  curves->add_option("--eps-min", curve_eps_min, "epsilon grid start");
  curves->add_option("--eps-max", curve_eps_max, "epsilon grid end");
  curves->add_option("--points", curve_points, "epsilon grid points");
  curves->add_option("--csv", curve_out, "output CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) return CmdCalibrate(args);
    if (generate->parsed()) return CmdGenerate(args);
    if (evaluate->parsed()) return CmdEvaluate(args, demos_dir, test_path);
    if (mia->parsed()) return CmdMia(args, trials, members, nonmembers, nonprivate);
    if (cost->parsed()) return CmdCost(cost_m, cost_prompt, cost_tmax, cost_price);
    if (curves->parsed()) {
      return CmdCurves(args, curve_sigma, curve_gamma, curve_steps, curve_kind,
                       curve_eps_min, curve_eps_max, curve_points, curve_out);
    }
  } catch (const dpfs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const dpfs::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const dpfs::CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const dpfs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return 0;
}

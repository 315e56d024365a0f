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

#include "dpfs/config.hpp"

#include <sstream>

#include "dpfs/error.hpp"
#include "dpfs/toml_lite.hpp"

namespace dpfs {
namespace {

toml::Table BackendTable(const BackendSpec& backend) {
  toml::Table table;
  table["kind"] = toml::Value(std::string(
      backend.kind == BackendSpec::Kind::kLocalNgram ? "local-ngram"
                                                     : "remote"));
  if (backend.kind == BackendSpec::Kind::kLocalNgram) {
    table["corpus"] = toml::Value(backend.corpus_path);
    table["order"] = toml::Value(static_cast<int64_t>(backend.order));
    table["alpha"] = toml::Value(backend.alpha);
  } else {
    table["base_url"] = toml::Value(backend.remote.base_url);
    table["model"] = toml::Value(backend.remote.model);
    table["logprobs"] = toml::Value(static_cast<int64_t>(backend.remote.logprobs));
    table["timeout_ms"] =
        toml::Value(static_cast<int64_t>(backend.remote.timeout_ms));
    table["max_attempts"] =
        toml::Value(static_cast<int64_t>(backend.remote.max_attempts));
    toml::Array stops;
    for (const std::string& token : backend.remote.stop_tokens) {
      stops.push_back(toml::Value(token));
    }
    table["stop_tokens"] = toml::Value(std::move(stops));
  }
  return table;
}

BackendSpec BackendFromTable(const toml::Value& table) {
  BackendSpec backend;
  const std::string kind = table.At("kind").AsString();
  if (kind == "local-ngram") {
    backend.kind = BackendSpec::Kind::kLocalNgram;
    backend.corpus_path = table.At("corpus").AsString();
    if (const toml::Value* order = table.Find("order")) {
      backend.order = static_cast<int>(order->AsInteger());
    }
    if (const toml::Value* alpha = table.Find("alpha")) {
      backend.alpha = alpha->AsNumber();
    }
  } else if (kind == "remote") {
    backend.kind = BackendSpec::Kind::kRemote;
    backend.remote.base_url = table.At("base_url").AsString();
    backend.remote.model = table.At("model").AsString();
    if (const toml::Value* v = table.Find("logprobs")) {
      backend.remote.logprobs = static_cast<int>(v->AsInteger());
    }
    if (const toml::Value* v = table.Find("timeout_ms")) {
      backend.remote.timeout_ms = static_cast<int>(v->AsInteger());
    }
    if (const toml::Value* v = table.Find("max_attempts")) {
      backend.remote.max_attempts = static_cast<int>(v->AsInteger());
    }
    if (const toml::Value* v = table.Find("stop_tokens")) {
      backend.remote.stop_tokens = v->AsStringArray();
    }
  } else {
    throw ConfigError("backend kind must be local-ngram or remote");
  }
  return backend;
}

}  // namespace

void BackendSpec::Validate() const {
  if (kind == Kind::kLocalNgram) {
    if (corpus_path.empty()) throw ConfigError("local backend needs a corpus");
    if (order < 1) throw ConfigError("n-gram order must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  } else {
    remote.Validate();
  }
}

void RunConfig::Validate() const {
  if (task.empty()) throw ConfigError("run config needs a task");
  if (target.has_value() == sigma.has_value()) {
    throw ConfigError(
        "exactly one of a target budget and an explicit sigma must be set");
  }
  if (target.has_value()) target->Validate();
  if (sigma.has_value() && !(*sigma >= 0.0)) {
    throw ConfigError("sigma must be >= 0");
  }
  if (seeds.empty()) throw ConfigError("run config needs at least one seed");
  if (n_shots < 0) throw ConfigError("n_shots must be >= 0");
  generation_backend.Validate();
  if (inference_backend.has_value()) inference_backend->Validate();

  MechanismConfig check = mechanism;
  check.sigma = sigma.value_or(1.0);
  if (check.kind == MechanismKind::kRnmExponential && check.sigma == 0.0) {
    check.sigma = 1.0;  // sigma is calibrated later
  }
  check.Validate();

  // A remote backend returns at most `logprobs` entries, so a wider RVP
  // restriction set could never be honored.
  if (generation_backend.kind == BackendSpec::Kind::kRemote && mechanism.rvp &&
      mechanism.rvp_top_k > generation_backend.remote.logprobs) {
    throw ConfigError(
        "RVP K exceeds the remote backend's logprob truncation width");
  }
}

std::string SerializeRunConfig(const RunConfig& config) {
  toml::Table root;
  root["task"] = toml::Value(config.task);
  root["dataset"] = toml::Value(config.dataset_path);
  root["n_shots"] = toml::Value(static_cast<int64_t>(config.n_shots));
  root["out_dir"] = toml::Value(config.out_dir);
  toml::Array seeds;
  for (uint64_t seed : config.seeds) {
    seeds.push_back(toml::Value(static_cast<int64_t>(seed)));
  }
  root["seeds"] = toml::Value(std::move(seeds));

  toml::Table budget;
  if (config.target.has_value()) {
    budget["epsilon"] = toml::Value(config.target->epsilon);
    budget["delta"] = toml::Value(config.target->delta);
  }
  if (config.sigma.has_value()) {
    budget["sigma"] = toml::Value(*config.sigma);
  }
  root["budget"] = toml::Value(std::move(budget));

  toml::Table mech;
  mech["dp"] = toml::Value(ToString(config.mechanism.kind));
  mech["m"] = toml::Value(static_cast<int64_t>(config.mechanism.subset_count));
  mech["n"] = toml::Value(static_cast<int64_t>(config.mechanism.subset_size));
  mech["rvp"] = toml::Value(config.mechanism.rvp);
  mech["k"] = toml::Value(static_cast<int64_t>(config.mechanism.rvp_top_k));
  mech["t_max"] = toml::Value(static_cast<int64_t>(config.mechanism.max_tokens));
  mech["sampling"] = toml::Value(std::string(
      config.mechanism.sampling == SamplingScheme::kPoisson
          ? "poisson"
          : "without-replacement"));
  root["mechanism"] = toml::Value(std::move(mech));

  root["generation_backend"] = toml::Value(BackendTable(config.generation_backend));
  if (config.inference_backend.has_value()) {
    root["inference_backend"] =
        toml::Value(BackendTable(*config.inference_backend));
  }
  return toml::Serialize(toml::Value(std::move(root)));
}

RunConfig ParseRunConfigText(const std::string& toml_text) {
  const toml::Value doc = toml::Parse(toml_text);
  RunConfig config;
  config.task = doc.At("task").AsString();
  if (const toml::Value* dataset = doc.Find("dataset")) {
    config.dataset_path = dataset->AsString();
  }
  if (const toml::Value* n_shots = doc.Find("n_shots")) {
    config.n_shots = static_cast<int>(n_shots->AsInteger());
  }
  if (const toml::Value* out_dir = doc.Find("out_dir")) {
    config.out_dir = out_dir->AsString();
  }
  if (const toml::Value* seeds = doc.Find("seeds")) {
    for (int64_t seed : seeds->AsIntegerArray()) {
      config.seeds.push_back(static_cast<uint64_t>(seed));
    }
  }

  if (const toml::Value* budget = doc.Find("budget")) {
    const toml::Value* epsilon = budget->Find("epsilon");
    const toml::Value* delta = budget->Find("delta");
    if (epsilon != nullptr) {
      PrivacyBudget target;
      target.epsilon = epsilon->AsNumber();
      if (delta != nullptr) target.delta = delta->AsNumber();
      config.target = target;
    }
    if (const toml::Value* sigma = budget->Find("sigma")) {
      config.sigma = sigma->AsNumber();
    }
  }

  if (const toml::Value* mech = doc.Find("mechanism")) {
    const std::string dp = mech->At("dp").AsString();
    if (dp == "gaussian") {
      config.mechanism.kind = MechanismKind::kGaussian;
    } else if (dp == "rnm-exponential") {
      config.mechanism.kind = MechanismKind::kRnmExponential;
    } else {
      throw ConfigError("mechanism dp must be gaussian or rnm-exponential");
    }
    config.mechanism.subset_count = static_cast<int>(mech->At("m").AsInteger());
    config.mechanism.subset_size = static_cast<int>(mech->At("n").AsInteger());
    config.mechanism.rvp = mech->At("rvp").AsBoolean();
    if (const toml::Value* k = mech->Find("k")) {
      config.mechanism.rvp_top_k = static_cast<int>(k->AsInteger());
    }
    config.mechanism.max_tokens =
        static_cast<int>(mech->At("t_max").AsInteger());
    if (const toml::Value* sampling = mech->Find("sampling")) {
      config.mechanism.sampling = sampling->AsString() == "poisson"
                                      ? SamplingScheme::kPoisson
                                      : SamplingScheme::kWithoutReplacement;
    }
  }

  if (const toml::Value* backend = doc.Find("generation_backend")) {
    config.generation_backend = BackendFromTable(*backend);
  }
  if (const toml::Value* backend = doc.Find("inference_backend")) {
    config.inference_backend = BackendFromTable(*backend);
  }
  return config;
}

RunConfig LoadRunConfig(const std::string& path) {
  const toml::Value doc = toml::ParseFile(path);
  return ParseRunConfigText(toml::Serialize(doc));
}

std::string ConfigHashHex(const RunConfig& config) {
  const std::string canonical = SerializeRunConfig(config);
  uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : canonical) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << hash;
  return out.str();
}

CostEstimate EstimateCost(int64_t subset_count, int64_t expected_prompt_tokens,
                          int64_t max_tokens, double price_per_token) {
  if (subset_count < 0 || expected_prompt_tokens < 0 || max_tokens < 0 ||
      price_per_token < 0.0) {
    throw ConfigError("cost inputs must be non-negative");
  }
  // sum_{t=P}^{P+T} t = (T + 1) * P + T (T + 1) / 2.
  const int64_t per_call = (max_tokens + 1) * expected_prompt_tokens +
                           max_tokens * (max_tokens + 1) / 2;
  CostEstimate estimate;
  estimate.total_tokens = subset_count * per_call;
  estimate.dollars = static_cast<double>(estimate.total_tokens) * price_per_token;
  return estimate;
}

}  // namespace dpfs

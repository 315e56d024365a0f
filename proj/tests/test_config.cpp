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

#include "doctest.h"
#include "dpfs/error.hpp"
#include "dpfs/rng.hpp"

namespace dpfs {
namespace {

RunConfig SampleConfig() {
  RunConfig config;
  config.task = "agnews";
  config.dataset_path = "data/private.jsonl";
  config.generation_backend.kind = BackendSpec::Kind::kLocalNgram;
  config.generation_backend.corpus_path = "data/corpus.txt";
  config.generation_backend.order = 3;
  config.generation_backend.alpha = 0.25;
  BackendSpec remote;
  remote.kind = BackendSpec::Kind::kRemote;
  remote.remote.base_url = "http://127.0.0.1:9000";
  remote.remote.model = "toy-model";
  remote.remote.logprobs = 100;
  config.inference_backend = remote;
  config.mechanism.kind = MechanismKind::kGaussian;
  config.mechanism.subset_count = 10;
  config.mechanism.subset_size = 2;
  config.mechanism.rvp = true;
  config.mechanism.rvp_top_k = 100;
  config.mechanism.max_tokens = 100;
  config.target = PrivacyBudget{1.0, 1e-5};
  config.n_shots = 4;
  config.seeds = {1, 2, 3, 4, 5};
  config.out_dir = "out";
  return config;
}

TEST_CASE("run config round-trips through TOML") {
  const RunConfig config = SampleConfig();
  const std::string text = SerializeRunConfig(config);
  const RunConfig reparsed = ParseRunConfigText(text);
  CHECK(SerializeRunConfig(reparsed) == text);
  CHECK(reparsed.task == config.task);
  CHECK(reparsed.seeds == config.seeds);
  CHECK(reparsed.target.has_value());
  CHECK(reparsed.target->epsilon == 1.0);
  CHECK(reparsed.inference_backend.has_value());
  CHECK(reparsed.inference_backend->remote.model == "toy-model");
  CHECK_NOTHROW(reparsed.Validate());
}

TEST_CASE("exactly one of target budget and sigma must be set") {
  RunConfig config = SampleConfig();
  config.sigma = 0.5;  // both set
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config.target.reset();
  CHECK_NOTHROW(config.Validate());
  config.sigma.reset();  // neither set
  CHECK_THROWS_AS(config.Validate(), ConfigError);
}

TEST_CASE("seeds must be non-empty") {
  RunConfig config = SampleConfig();
  config.seeds.clear();
  CHECK_THROWS_AS(config.Validate(), ConfigError);
}

TEST_CASE("config hashes are stable and sensitive") {
  const RunConfig config = SampleConfig();
  CHECK(ConfigHashHex(config) == ConfigHashHex(config));
  RunConfig other = SampleConfig();
  other.n_shots = 8;
  CHECK(ConfigHashHex(other) != ConfigHashHex(config));
}

TEST_CASE("cost formula on the worked examples") {
  CHECK(EstimateCost(1, 0, 3, 1.0).total_tokens == 6);  // 0 + 1 + 2 + 3
  CHECK(EstimateCost(5, 7, 0, 1.0).total_tokens == 35);  // M * P
  const CostEstimate priced = EstimateCost(2, 10, 4, 0.001);
  CHECK(priced.total_tokens == 2 * (5 * 10 + 10));
  CHECK(priced.dollars == doctest::Approx(0.12).epsilon(1e-12));
  CHECK_THROWS_AS(EstimateCost(-1, 0, 0, 0.0), ConfigError);
}

TEST_CASE("the closed form matches brute-force summation") {
  RandomStream rng(55);
  for (int round = 0; round < 1000; ++round) {
    const int64_t m = static_cast<int64_t>(rng.UniformInt(20));
    const int64_t p = static_cast<int64_t>(rng.UniformInt(500));
    const int64_t t_max = static_cast<int64_t>(rng.UniformInt(200));
    int64_t brute = 0;
    for (int64_t t = p; t <= p + t_max; ++t) brute += t;
    brute *= m;
    CHECK(EstimateCost(m, p, t_max, 0.0).total_tokens == brute);
  }
}

TEST_CASE("remote RVP width cannot exceed the provider truncation") {
  RunConfig config = SampleConfig();
  config.generation_backend = *config.inference_backend;  // remote generation
  config.mechanism.rvp_top_k = 200;
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config.mechanism.rvp_top_k = 100;
  CHECK_NOTHROW(config.Validate());
}

}  // namespace
}  // namespace dpfs

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

#include "dpfs/remote_lm.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "dpfs/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dpfs {

// Caps the number of in-flight requests.
class RequestGate {
 public:
  explicit RequestGate(int limit) : available_(limit) {}

  void Acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
  }

  void Release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++available_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

namespace {

constexpr int kProviderLogprobMax = 100;

bool RetryableStatus(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

void RemoteLmOptions::Validate() const {
  if (base_url.empty()) throw ConfigError("remote backend needs a base_url");
  if (model.empty()) throw ConfigError("remote backend needs a model name");
  if (logprobs < 1 || logprobs > kProviderLogprobMax) {
    std::ostringstream msg;
    msg << "logprob truncation width must be in [1, " << kProviderLogprobMax
        << "], got " << logprobs;
    throw ConfigError(msg.str());
  }
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (max_concurrent_requests < 1) {
    throw ConfigError("max_concurrent_requests must be >= 1");
  }
}

RemoteLmClient::RemoteLmClient(RemoteLmOptions options)
    : options_(std::move(options)) {
  options_.Validate();
  if (options_.api_key.empty()) {
    if (const char* key = std::getenv(kApiKeyEnvVar)) options_.api_key = key;
  }
  stop_set_.insert(options_.stop_tokens.begin(), options_.stop_tokens.end());
  gate_ = std::make_unique<RequestGate>(options_.max_concurrent_requests);
}

RemoteLmClient::~RemoteLmClient() = default;

int RemoteLmClient::vocab_size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return static_cast<int>(tokens_.size());
}

const std::string& RemoteLmClient::TokenText(int id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (id < 0 || id >= static_cast<int>(tokens_.size())) {
    throw ConfigError("token id out of range");
  }
  return tokens_[static_cast<size_t>(id)];
}

int RemoteLmClient::FindToken(const std::string& token) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = token_index_.find(token);
  return it == token_index_.end() ? -1 : it->second;
}

bool RemoteLmClient::IsEos(int id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (id < 0 || id >= static_cast<int>(tokens_.size())) return false;
  return stop_set_.count(tokens_[static_cast<size_t>(id)]) > 0;
}

int RemoteLmClient::InternToken(const std::string& token) {
  auto it = token_index_.find(token);
  if (it != token_index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  token_index_[token] = id;
  return id;
}

uint64_t RemoteLmClient::requests_sent() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return requests_sent_;
}

ProbVector RemoteLmClient::NextTokenDistribution(const std::string& prompt) {
  nlohmann::json body{{"model", options_.model},
                      {"prompt", prompt},
                      {"max_tokens", 1},
                      {"logprobs", options_.logprobs},
                      {"temperature", 0}};
  const std::string payload = body.dump();

  uint64_t correlation_id;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    correlation_id = next_correlation_id_++;
  }

  std::string response_body;
  std::string last_error;
  bool success = false;
  for (int attempt = 0; attempt < options_.max_attempts && !success; ++attempt) {
    if (attempt > 0) {
      const int backoff = options_.backoff_initial_ms << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    gate_->Acquire();
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_ms / 1000,
                                  (options_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(options_.timeout_ms / 1000,
                            (options_.timeout_ms % 1000) * 1000);
    httplib::Headers headers{
        {"X-Request-Id", std::to_string(correlation_id)}};
    if (!options_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + options_.api_key);
    }
    auto result = client.Post("/v1/completions", headers, payload,
                              "application/json");
    gate_->Release();

    if (!result) {
      std::ostringstream msg;
      msg << "transport error: " << httplib::to_string(result.error());
      last_error = msg.str();
      continue;
    }
    if (result->status == 200) {
      response_body = result->body;
      success = true;
      break;
    }
    std::ostringstream msg;
    msg << "HTTP " << result->status << ": " << result->body;
    last_error = msg.str();
    if (!RetryableStatus(result->status)) break;
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++requests_sent_;
  }
  if (!success) {
    std::ostringstream msg;
    msg << "completions request " << correlation_id << " to "
        << options_.base_url << " failed after " << options_.max_attempts
        << " attempt(s): " << last_error;
    throw RemoteError(msg.str());
  }

  nlohmann::json response;
  try {
    response = nlohmann::json::parse(response_body);
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(std::string("malformed provider response: ") + e.what());
  }
  if (!response.contains("choices") || response["choices"].empty() ||
      !response["choices"][0].contains("logprobs") ||
      !response["choices"][0]["logprobs"].contains("top_logprobs") ||
      response["choices"][0]["logprobs"]["top_logprobs"].empty()) {
    throw RemoteError("provider response carries no top_logprobs");
  }
  const nlohmann::json& top =
      response["choices"][0]["logprobs"]["top_logprobs"][0];
  if (!top.is_object() || top.empty()) {
    throw RemoteError("provider top_logprobs entry is empty");
  }

  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::pair<int, double>> observed;
  double total = 0.0;
  for (const auto& [token, logprob] : top.items()) {
    if (!logprob.is_number()) {
      throw RemoteError("provider logprob is not a number");
    }
    const double p = std::exp(logprob.get<double>());
    observed.emplace_back(InternToken(token), p);
    total += p;
  }
  if (!(total > 0.0)) {
    throw RemoteError("provider logprobs carry no probability mass");
  }
  // Truncated distribution, renormalized over the returned support.
  ProbVector dist(tokens_.size(), 0.0);
  for (const auto& [id, p] : observed) {
    dist[static_cast<size_t>(id)] += p / total;
  }
  return dist;
}

std::string RemoteLmClient::ContentText(const std::vector<int>& ids) const {
  std::string text = ContinuationText(ids);
  const size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const size_t end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::string RemoteLmClient::ContinuationText(const std::vector<int>& ids) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::string text;
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(tokens_.size())) {
      throw ConfigError("token id out of range");
    }
    text += tokens_[static_cast<size_t>(id)];
  }
  return text;
}

}  // namespace dpfs

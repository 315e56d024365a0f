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

#ifndef DPFS_REMOTE_LM_H_
#define DPFS_REMOTE_LM_H_

#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "dpfs/lm.hpp"

namespace dpfs {

// Environment variable holding the API key for the remote backend.
inline constexpr const char* kApiKeyEnvVar = "DPFS_API_KEY";

struct RemoteLmOptions {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string model;
  // Logprob truncation width requested per call; providers cap it at 100.
  int logprobs = 100;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_initial_ms = 250;
  int max_concurrent_requests = 4;
  // Provider token strings treated as end-of-sequence.
  std::vector<std::string> stop_tokens = {"<|endoftext|>"};
  // Taken from DPFS_API_KEY when empty.
  std::string api_key;

  void Validate() const;
};

// OpenAI-compatible completions client. Each query posts
// {model, prompt, max_tokens: 1, logprobs: K, temperature: 0} to
// {base_url}/v1/completions and turns the returned top-K logprobs into a
// truncated, renormalized distribution over the session vocabulary.
// Provider token strings are opaque: the vocabulary grows append-only as
// new tokens are observed, so earlier distributions align by zero-padding.
//
// Transport failures and retryable statuses (429, 5xx) are retried with
// bounded exponential backoff, then surface as RemoteError; a distribution
// is never silently substituted.
class RemoteLmClient : public LanguageModel {
 public:
  explicit RemoteLmClient(RemoteLmOptions options);
  ~RemoteLmClient() override;

  int vocab_size() const override;
  const std::string& TokenText(int id) const override;
  int FindToken(const std::string& token) const override;
  bool IsEos(int id) const override;

  ProbVector NextTokenDistribution(const std::string& prompt) override;

  // Provider tokens carry their own whitespace: content is the raw
  // concatenation with the ends trimmed, continuations concatenate as-is.
  std::string ContentText(const std::vector<int>& ids) const override;
  std::string ContinuationText(const std::vector<int>& ids) const override;

  uint64_t requests_sent() const;

 private:
  int InternToken(const std::string& token);

  RemoteLmOptions options_;
  mutable std::mutex mutex_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> token_index_;
  std::set<std::string> stop_set_;
  uint64_t requests_sent_ = 0;
  uint64_t next_correlation_id_ = 1;
  std::unique_ptr<class RequestGate> gate_;
};

}  // namespace dpfs

#endif  // DPFS_REMOTE_LM_H_

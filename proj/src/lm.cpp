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

#include "dpfs/lm.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "dpfs/error.hpp"

namespace dpfs {

namespace {
constexpr int kBeginSentinel = -1;
}

Vocabulary Vocabulary::FromTokens(std::vector<std::string> tokens,
                                  const std::string& eos_token) {
  Vocabulary vocab;
  for (auto& token : tokens) {
    if (vocab.index_.count(token)) {
      throw ConfigError("duplicate vocabulary token: " + token);
    }
    vocab.index_[token] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(std::move(token));
  }
  const int eos = vocab.Find(eos_token);
  if (eos < 0) throw ConfigError("EOS token missing from vocabulary");
  vocab.eos_id_ = eos;
  return vocab;
}

int Vocabulary::AddToken(const std::string& token) {
  if (index_.count(token)) {
    throw ConfigError("duplicate vocabulary token: " + token);
  }
  const int id = static_cast<int>(tokens_.size());
  index_[token] = id;
  tokens_.push_back(token);
  return id;
}

const std::string& Vocabulary::TokenText(int id) const {
  if (id < 0 || id >= size()) throw ConfigError("token id out of range");
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::Find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

void Vocabulary::set_eos_id(int id) {
  if (id < 0 || id >= size()) throw ConfigError("EOS id out of range");
  eos_id_ = id;
}

std::vector<std::string> TokenizeWhitespace(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream stream(text);
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

std::vector<int> TopKIndices(const ProbVector& dist, int k) {
  if (k < 1 || k > static_cast<int>(dist.size())) {
    std::ostringstream msg;
    msg << "invalid K = " << k << " for a distribution over " << dist.size()
        << " tokens";
    throw ConfigError(msg.str());
  }
  std::vector<int> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  // Ties go to the lower index.
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&dist](int a, int b) {
                      if (dist[a] != dist[b]) return dist[a] > dist[b];
                      return a < b;
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> TopKPublic(LanguageModel& lm, const std::string& prompt,
                            int k) {
  return TopKIndices(lm.NextTokenDistribution(prompt), k);
}

LocalNgramLm::LocalNgramLm(Vocabulary vocab, int order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha) {}

LocalNgramLm LocalNgramLm::Train(
    const std::vector<std::vector<std::string>>& corpus, int order,
    double alpha) {
  if (corpus.empty()) throw ConfigError("n-gram training corpus is empty");
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("smoothing alpha must be positive");

  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> seen;
  for (const auto& sequence : corpus) {
    for (const auto& token : sequence) {
      if (token == kEosToken) {
        throw ConfigError("corpus may not contain the reserved EOS token");
      }
      if (seen.emplace(token, 1).second) tokens.push_back(token);
    }
  }
  if (tokens.empty()) throw ConfigError("n-gram training corpus is empty");
  tokens.push_back(kEosToken);

  LocalNgramLm lm(Vocabulary::FromTokens(std::move(tokens), kEosToken), order,
                  alpha);
  const int context_len = order - 1;
  for (const auto& sequence : corpus) {
    std::vector<int> ids;
    ids.reserve(sequence.size() + 1);
    for (const auto& token : sequence) ids.push_back(lm.vocab_.Find(token));
    ids.push_back(lm.vocab_.eos_id());

    std::vector<int> context(context_len, kBeginSentinel);
    for (int id : ids) {
      auto& slot = lm.counts_[lm.ContextKey(context)];
      ++slot.token_counts[id];
      ++slot.total;
      if (context_len > 0) {
        context.erase(context.begin());
        context.push_back(id);
      }
    }
  }
  return lm;
}

LocalNgramLm LocalNgramLm::TrainOnLines(const std::vector<std::string>& lines,
                                        int order, double alpha) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(lines.size());
  for (const auto& line : lines) corpus.push_back(TokenizeWhitespace(line));
  return Train(corpus, order, alpha);
}

std::string LocalNgramLm::ContextKey(const std::vector<int>& context) const {
  // Last (order - 1) entries, front-padded with the begin sentinel.
  const int context_len = order_ - 1;
  const int n = static_cast<int>(context.size());
  std::string key;
  for (int pos = n - context_len; pos < n; ++pos) {
    if (pos < 0 || context[static_cast<size_t>(pos)] == kBeginSentinel) {
      key += "B,";
    } else {
      key += std::to_string(context[static_cast<size_t>(pos)]);
      key += ',';
    }
  }
  return key;
}

std::vector<int> LocalNgramLm::ToIds(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& token : TokenizeWhitespace(text)) {
    const int id = vocab_.Find(token);
    if (id < 0) {
      throw ConfigError("prompt token not in the model vocabulary: " + token);
    }
    ids.push_back(id);
  }
  return ids;
}

ProbVector LocalNgramLm::DistributionForContext(
    const std::vector<int>& context) const {
  const auto it = counts_.find(ContextKey(context));
  const int v = vocab_.size();
  ProbVector dist(static_cast<size_t>(v));
  if (it == counts_.end()) {
    // Unseen context: add-alpha forces the uniform distribution.
    std::fill(dist.begin(), dist.end(), 1.0 / v);
    return dist;
  }
  const ContextCounts& slot = it->second;
  const double denom = static_cast<double>(slot.total) + alpha_ * v;
  for (int id = 0; id < v; ++id) {
    const auto found = slot.token_counts.find(id);
    const double count =
        found == slot.token_counts.end() ? 0.0 : static_cast<double>(found->second);
    dist[static_cast<size_t>(id)] = (count + alpha_) / denom;
  }
  return dist;
}

ProbVector LocalNgramLm::NextTokenDistribution(const std::string& prompt) {
  return DistributionForContext(ToIds(prompt));
}

std::string LocalNgramLm::ContentText(const std::vector<int>& ids) const {
  std::string text;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) text += ' ';
    text += vocab_.TokenText(ids[i]);
  }
  return text;
}

std::string LocalNgramLm::ContinuationText(const std::vector<int>& ids) const {
  if (ids.empty()) return "";
  return " " + ContentText(ids);
}

}  // namespace dpfs

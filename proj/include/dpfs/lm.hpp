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

#ifndef DPFS_LM_H_
#define DPFS_LM_H_

#include <string>
#include <unordered_map>
#include <vector>

#include "dpfs/mechanisms.hpp"

namespace dpfs {

// Ordered token inventory with a designated end-of-sequence token.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Tokens must be unique; eos must be one of them.
  static Vocabulary FromTokens(std::vector<std::string> tokens,
                               const std::string& eos_token);

  // Appends a token (must be new) and returns its id.
  int AddToken(const std::string& token);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& TokenText(int id) const;
  // Id for the token string, or -1 when absent.
  int Find(const std::string& token) const;
  int eos_id() const { return eos_id_; }
  void set_eos_id(int id);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int eos_id_ = -1;
};

// Splits on ASCII whitespace.
std::vector<std::string> TokenizeWhitespace(const std::string& text);

// Next-token-distribution provider. Implementations may grow their
// vocabulary as new provider tokens are observed (ids are stable and
// append-only), so callers align distributions of different lengths by
// zero-padding to the current vocabulary size.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual int vocab_size() const = 0;
  virtual const std::string& TokenText(int id) const = 0;
  // Id of a token string, or -1 when the backend has not seen it.
  virtual int FindToken(const std::string& token) const = 0;
  virtual bool IsEos(int id) const = 0;

  // Distribution over the current vocabulary given a text prompt. Must sum
  // to 1 within kProbVectorSumTolerance.
  virtual ProbVector NextTokenDistribution(const std::string& prompt) = 0;

  // Renders generated token ids as demonstration content.
  virtual std::string ContentText(const std::vector<int>& ids) const = 0;

  // Renders generated token ids as text appended verbatim to a prompt that
  // does not end with whitespace. Empty ids produce "".
  virtual std::string ContinuationText(const std::vector<int>& ids) const = 0;
};

// Indices of the K largest entries of the next-token distribution under
// `prompt`, ties broken by lowest index; returned sorted ascending.
// Throws ConfigError when K exceeds the distribution size.
std::vector<int> TopKPublic(LanguageModel& lm, const std::string& prompt,
                            int k);

// Top-K indices of an explicit distribution (same tie-break contract).
std::vector<int> TopKIndices(const ProbVector& dist, int k);

// Deterministic add-alpha n-gram model over whitespace tokens. Sequences
// are front-padded with a begin sentinel and terminated with the EOS token
// during training, so prompts shorter than the context are well formed.
class LocalNgramLm : public LanguageModel {
 public:
  // order >= 1 is the n-gram order (context length order - 1); alpha > 0.
  // The vocabulary is the corpus vocabulary plus an explicit EOS token.
  static LocalNgramLm Train(const std::vector<std::vector<std::string>>& corpus,
                            int order, double alpha);

  // Convenience: whitespace-tokenizes each line first.
  static LocalNgramLm TrainOnLines(const std::vector<std::string>& lines,
                                   int order, double alpha);

  int vocab_size() const override { return vocab_.size(); }
  const std::string& TokenText(int id) const override {
    return vocab_.TokenText(id);
  }
  int FindToken(const std::string& token) const override {
    return vocab_.Find(token);
  }
  bool IsEos(int id) const override { return id == vocab_.eos_id(); }

  ProbVector NextTokenDistribution(const std::string& prompt) override;
  // Distribution for an explicit context of token ids (the tail is used).
  ProbVector DistributionForContext(const std::vector<int>& context) const;

  std::string ContentText(const std::vector<int>& ids) const override;
  std::string ContinuationText(const std::vector<int>& ids) const override;

  const Vocabulary& vocabulary() const { return vocab_; }
  int order() const { return order_; }
  double alpha() const { return alpha_; }

  // Token ids for a whitespace-tokenized text; throws ConfigError on tokens
  // outside the vocabulary.
  std::vector<int> ToIds(const std::string& text) const;

  static constexpr const char* kEosToken = "<eos>";

 private:
  LocalNgramLm(Vocabulary vocab, int order, double alpha);

  std::string ContextKey(const std::vector<int>& context) const;

  Vocabulary vocab_;
  int order_;
  double alpha_;
  struct ContextCounts {
    std::unordered_map<int, int64_t> token_counts;
    int64_t total = 0;
  };
  std::unordered_map<std::string, ContextCounts> counts_;
};

}  // namespace dpfs

#endif  // DPFS_LM_H_

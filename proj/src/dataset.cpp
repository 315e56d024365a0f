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

#include "dpfs/dataset.hpp"

#include <fstream>
#include <sstream>

#include "dpfs/error.hpp"
#include "json.hpp"

namespace dpfs {
namespace {

bool IsBlankAfterTrim(const std::string& s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

void BuildLabelIndex(LabeledDataset& dataset) {
  dataset.label_index.clear();
  for (int i = 0; i < dataset.size(); ++i) {
    dataset.label_index[dataset.examples[i].label].push_back(i);
  }
}

}  // namespace

std::vector<std::string> LabeledDataset::Labels() const {
  std::vector<std::string> labels;
  labels.reserve(label_index.size());
  for (const auto& [label, indices] : label_index) labels.push_back(label);
  return labels;
}

LabeledDataset MakeDataset(std::vector<Example> examples,
                           LabelMode label_mode) {
  for (size_t i = 0; i < examples.size(); ++i) {
    if (IsBlankAfterTrim(examples[i].content)) {
      std::ostringstream msg;
      msg << "example " << i + 1 << ": empty content";
      throw ParseError(msg.str());
    }
  }
  if (examples.empty()) throw ParseError("dataset is empty");
  LabeledDataset dataset;
  dataset.examples = std::move(examples);
  dataset.label_mode = label_mode;
  BuildLabelIndex(dataset);
  return dataset;
}

LabeledDataset LoadDataset(const std::string& path, LabelMode label_mode) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);

  std::vector<Example> examples;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (IsBlankAfterTrim(line)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << line_number << ": invalid JSON: " << e.what();
      throw ParseError(msg.str());
    }
    if (!record.is_object() || !record.contains("content") ||
        !record["content"].is_string() || !record.contains("label") ||
        !record["label"].is_string()) {
      std::ostringstream msg;
      msg << path << ":" << line_number
          << ": record must carry string fields \"content\" and \"label\"";
      throw ParseError(msg.str());
    }
    Example example{record["content"].get<std::string>(),
                    record["label"].get<std::string>()};
    if (IsBlankAfterTrim(example.content)) {
      std::ostringstream msg;
      msg << path << ":" << line_number << ": empty content";
      throw ParseError(msg.str());
    }
    examples.push_back(std::move(example));
  }
  if (examples.empty()) throw ParseError("dataset file is empty: " + path);

  LabeledDataset dataset;
  dataset.examples = std::move(examples);
  dataset.label_mode = label_mode;
  BuildLabelIndex(dataset);
  return dataset;
}

std::vector<int> PerLabelPool(const LabeledDataset& dataset,
                              const std::string& label) {
  if (dataset.label_mode == LabelMode::kOpenForm) {
    std::vector<int> all(dataset.size());
    for (int i = 0; i < dataset.size(); ++i) all[i] = i;
    return all;
  }
  auto it = dataset.label_index.find(label);
  if (it == dataset.label_index.end()) {
    throw UnknownLabelError("unknown label: " + label);
  }
  return it->second;
}

double SubsampleBatch::SamplingRate() const {
  size_t sampled = 0;
  for (const auto& subset : subsets) sampled += subset.size();
  return source_size > 0
             ? static_cast<double>(sampled) / static_cast<double>(source_size)
             : 0.0;
}

SubsampleBatch SubsampleAndSplit(const std::vector<int>& pool, int subset_count,
                                 int subset_size, RandomStream& rng) {
  if (subset_count < 1 || subset_size < 1) {
    throw ConfigError("subset count and size must be positive");
  }
  const size_t needed =
      static_cast<size_t>(subset_count) * static_cast<size_t>(subset_size);
  if (pool.size() < needed) {
    std::ostringstream msg;
    msg << "pool of " << pool.size() << " examples cannot supply " << needed
        << " (" << subset_count << " x " << subset_size << ")";
    throw InsufficientDataError(msg.str());
  }

  // Partial Fisher-Yates: the first M*N slots end up a uniform
  // without-replacement draw.
  std::vector<int> shuffled = pool;
  for (size_t i = 0; i < needed; ++i) {
    const size_t j = i + rng.UniformInt(shuffled.size() - i);
    std::swap(shuffled[i], shuffled[j]);
  }

  SubsampleBatch batch;
  batch.source_size = static_cast<int>(pool.size());
  batch.subsets.resize(subset_count);
  size_t next = 0;
  for (int m = 0; m < subset_count; ++m) {
    batch.subsets[m].assign(shuffled.begin() + next,
                            shuffled.begin() + next + subset_size);
    next += subset_size;
  }
  return batch;
}

SubsampleBatch SubsamplePoisson(const std::vector<int>& pool, int subset_count,
                                int subset_size, RandomStream& rng) {
  if (subset_count < 1 || subset_size < 1) {
    throw ConfigError("subset count and size must be positive");
  }
  if (pool.empty()) throw InsufficientDataError("pool is empty");
  const double rate =
      std::min(1.0, static_cast<double>(subset_count) * subset_size /
                        static_cast<double>(pool.size()));

  std::vector<int> sampled;
  for (int index : pool) {
    if (rng.Uniform() < rate) sampled.push_back(index);
  }
  rng.Shuffle(sampled);

  SubsampleBatch batch;
  batch.source_size = static_cast<int>(pool.size());
  batch.subsets.resize(subset_count);
  for (size_t i = 0; i < sampled.size(); ++i) {
    batch.subsets[i % subset_count].push_back(sampled[i]);
  }
  return batch;
}

}  // namespace dpfs

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

#ifndef DPFS_DATASET_H_
#define DPFS_DATASET_H_

#include <map>
#include <string>
#include <vector>

#include "dpfs/rng.hpp"

namespace dpfs {

struct Example {
  std::string content;
  std::string label;  // may be empty for open-form tasks
};

enum class LabelMode { kFixedSet, kOpenForm };

// Immutable after load; safe for concurrent read access.
struct LabeledDataset {
  std::vector<Example> examples;
  // Fixed-set mode: label -> indices; partitions {0..n-1}. Open-form mode:
  // every pool query returns all indices, the index is kept for reporting.
  std::map<std::string, std::vector<int>> label_index;
  LabelMode label_mode = LabelMode::kFixedSet;

  int size() const { return static_cast<int>(examples.size()); }
  std::vector<std::string> Labels() const;
};

// Loads a JSONL file (one {"content": ..., "label": ...} object per line).
// Preserves file order and builds the label index. Throws ParseError with
// the offending line number on malformed input, on content that is empty
// after whitespace trimming, and on an empty file.
LabeledDataset LoadDataset(const std::string& path,
                           LabelMode label_mode = LabelMode::kFixedSet);

// Builds a dataset from in-memory examples (same validation as LoadDataset).
LabeledDataset MakeDataset(std::vector<Example> examples, LabelMode label_mode);

// Indices of D^y. Fixed-set mode returns the label's partition and throws
// UnknownLabelError for an absent label; open-form mode returns all indices
// regardless of the label.
std::vector<int> PerLabelPool(const LabeledDataset& dataset,
                              const std::string& label);

// One step's subsample: M index lists drawn from a pool.
struct SubsampleBatch {
  std::vector<std::vector<int>> subsets;
  int source_size = 0;  // size of the pool sampled from

  // Sampling rate gamma = (sampled count) / source_size for reporting.
  double SamplingRate() const;
};

// Draws M*N indices from `pool` uniformly without replacement and splits
// them consecutively into M subsets of N. Deterministic given the stream
// state. Throws InsufficientDataError when |pool| < M*N.
SubsampleBatch SubsampleAndSplit(const std::vector<int>& pool, int subset_count,
                                 int subset_size, RandomStream& rng);

// Poisson variant for analysis-faithful runs: each pool element is included
// independently with probability M*N/|pool|, then the sample is split into
// M contiguous groups of near-equal size (sizes vary by draw).
SubsampleBatch SubsamplePoisson(const std::vector<int>& pool, int subset_count,
                                int subset_size, RandomStream& rng);

}  // namespace dpfs

#endif  // DPFS_DATASET_H_

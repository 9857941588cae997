// Copyright 2026 The docprobe Authors
// SPDX-License-Identifier: Apache-2.0
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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "docprobe/embedstore.hpp"
#include "docprobe/probe.hpp"
#include "docprobe/taskgen.hpp"

namespace docprobe {

struct MaterializedExamples {
  std::vector<ProbeSample<float>> samples;
  std::vector<std::size_t> source_index;  // position of each sample in the input span
  std::size_t unavailable = 0;            // refs with no token row in this bundle
};

// Gathers the input rows of each example from one layer. Whole-document
// inputs are cut to `token_budget` rows when given.
MaterializedExamples materialize(std::span<const ProbingExample> examples, const EmbeddingSource& bundle,
                                 std::uint32_t layer, std::optional<std::size_t> token_budget = std::nullopt);

// Trains a probe on the dataset's train split, early-stops on dev and
// scores test, reading vectors from `layer` of `bundle`.
TrainedProbe<float> train(const ProbeConfig& config, const ProbingDataset& dataset,
                          const EmbeddingSource& bundle, std::uint32_t layer);

}  // namespace docprobe

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

#include "docprobe/dataset_probe.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <string>

namespace docprobe {

MaterializedExamples materialize(std::span<const ProbingExample> examples, const EmbeddingSource& bundle,
                                 std::uint32_t layer, std::optional<std::size_t> token_budget) {
  struct Loaded {
    TokenMatrix rows;
    AlignmentMap alignment;
  };
  std::map<std::string, Loaded> cache;
  auto doc = [&](const std::string& id) -> const Loaded& {
    auto it = cache.find(id);
    if (it == cache.end()) {
      DocEmbedding e = bundle.load(id);
      it = cache.emplace(id, Loaded{e.layer(layer), std::move(e.alignment)}).first;
    }
    return it->second;
  };

  MaterializedExamples out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    std::vector<Eigen::Index> rows;
    bool whole_doc = false;
    const Loaded* source = nullptr;
    bool ok = !ex.inputs.empty();
    for (const auto& ref : ex.inputs) {
      const Loaded& d = doc(ref.doc_id);
      source = &d;
      if (ref.kind == VectorRef::Kind::kDocument) {
        whole_doc = true;
        continue;
      }
      auto row = ref.word < d.alignment.word_count() ? first_token_row(d.alignment, ref.word) : std::nullopt;
      if (!row || (token_budget && *row >= *token_budget)) {
        ok = false;
        break;
      }
      rows.push_back(static_cast<Eigen::Index>(*row));
    }
    if (ok && whole_doc && ex.inputs.size() != 1) ok = false;
    if (ok && whole_doc && source->rows.rows() == 0) ok = false;
    if (!ok) {
      ++out.unavailable;
      continue;
    }

    ProbeSample<float> sample;
    sample.label = ex.label;
    if (whole_doc) {
      Eigen::Index keep = source->rows.rows();
      if (token_budget) keep = std::min<Eigen::Index>(keep, static_cast<Eigen::Index>(*token_budget));
      sample.inputs = source->rows.topRows(keep);
    } else {
      sample.inputs.resize(static_cast<Eigen::Index>(rows.size()), source->rows.cols());
      for (std::size_t r = 0; r < rows.size(); ++r)
        sample.inputs.row(static_cast<Eigen::Index>(r)) = source->rows.row(rows[r]);
    }
    out.samples.push_back(std::move(sample));
    out.source_index.push_back(i);
  }
  return out;
}

TrainedProbe<float> train(const ProbeConfig& config, const ProbingDataset& dataset,
                          const EmbeddingSource& bundle, std::uint32_t layer) {
  std::array<std::vector<ProbeSample<float>>, 3> splits;
  for (Split s : kAllSplits) {
    auto m = materialize(dataset.split(s), bundle, layer);
    if (m.samples.empty())
      throw EmptySplit(task_name(dataset.task) + ": " + split_name(s) + " split has no usable examples");
    splits[static_cast<std::size_t>(s)] = std::move(m.samples);
  }
  return train_probe<float>(config, splits[0], splits[1], splits[2], dataset.n_classes);
}

}  // namespace docprobe

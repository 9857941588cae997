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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docprobe/corpus.hpp"
#include "docprobe/embedstore.hpp"
#include "json.hpp"

namespace docprobe {

enum class TaskKind { kWordCt, kSentCt, kIsArg, kArgTyp, kCoref, kCoEvnt, kEvntTyp, kEvntCt };

enum class TaskFamily { kSurface, kSemantic, kEvent };

struct TaskId {
  TaskKind kind = TaskKind::kWordCt;
  std::size_t n = 2;  // filler count, EvntTyp only

  friend bool operator==(const TaskId& a, const TaskId& b) {
    return a.kind == b.kind && (a.kind != TaskKind::kEvntTyp || a.n == b.n);
  }
};

// "WordCt", "SentCt", "IsArg", "ArgTyp", "Coref", "CoEvnt", "EvntTyp_2", "EvntCt".
std::string task_name(const TaskId& task);
TaskId parse_task(const std::string& name);
TaskFamily task_family(TaskKind kind);
const char* family_name(TaskFamily family);
// Position in the canonical column order used by reports.
int task_rank(const TaskId& task);
std::vector<TaskId> all_tasks(std::size_t evnttyp_n = 2);

// k right-open count intervals: (-inf, b0), [b0, b1), ..., [b_{k-2}, +inf).
struct BucketSpec {
  std::vector<std::int64_t> boundaries;
  std::size_t requested_k = 0;
  bool degenerate = false;  // fewer distinct values than requested_k

  std::size_t bucket_count() const { return boundaries.size() + 1; }
  std::size_t bucket_of(std::int64_t count) const;
  std::string label(std::size_t bucket) const;
};

// Boundaries at empirical quantiles of `counts`. When a tie group straddles
// a cut it goes to the lower bucket. With fewer than k distinct values the
// result falls back to one bucket per distinct value and is flagged
// degenerate.
BucketSpec quantile_buckets(std::span<const std::int64_t> counts, std::size_t k);

// Word-count strata: <=low_max, (low_max, mid_max], >=high_min. Counts
// strictly between mid_max and high_min belong to no stratum.
struct Strata {
  std::int64_t low_max = 209;
  std::int64_t mid_max = 420;
  std::int64_t high_min = 431;

  std::optional<std::size_t> stratum_of(std::int64_t words) const;
  std::string label(std::size_t stratum) const;
  std::size_t count() const { return 3; }
};

Strata parse_strata(const std::string& csv);

struct VectorRef {
  enum class Kind { kToken, kDocument };
  std::string doc_id;
  Kind kind = Kind::kToken;
  std::size_t word = 0;

  friend bool operator==(const VectorRef&, const VectorRef&) = default;
};

struct ProbingExample {
  std::vector<VectorRef> inputs;
  std::size_t label = 0;
  nlohmann::json meta = nlohmann::json::object();
};

struct ProbingDataset {
  TaskId task;
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;
  std::array<std::vector<ProbingExample>, 3> splits;
  std::optional<BucketSpec> bucket_spec;
  std::uint64_t seed = 0;

  // Every enumerated candidate ends up emitted, dropped (a needed token row
  // was truncated away) or skipped (preconditions or class balancing).
  std::size_t candidate_count = 0;
  std::size_t dropped_count = 0;
  std::size_t skipped_count = 0;
  std::vector<std::string> warnings;

  std::vector<ProbingExample>& split(Split s) { return splits[static_cast<std::size_t>(s)]; }
  const std::vector<ProbingExample>& split(Split s) const {
    return splits[static_cast<std::size_t>(s)];
  }
  std::size_t emitted_count() const;
  std::vector<std::size_t> class_counts(Split s) const;
};

struct BuildOptions {
  std::uint64_t seed = 0;
  std::size_t count_buckets = 10;  // WordCt, SentCt
  std::size_t event_buckets = 3;   // EvntCt
  Strata strata;
};

ProbingDataset build_wordct(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t k = 10,
                            const Strata& strata = {});
ProbingDataset build_sentct(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t k = 10,
                            const Strata& strata = {});
ProbingDataset build_isarg(const Corpus& corpus, const EmbeddingSource& bundle, std::uint64_t seed);
ProbingDataset build_argtyp(const Corpus& corpus, const EmbeddingSource& bundle);
ProbingDataset build_coref(const Corpus& corpus, const EmbeddingSource& bundle, std::uint64_t seed);
ProbingDataset build_coevnt(const Corpus& corpus, const EmbeddingSource& bundle, std::uint64_t seed);
ProbingDataset build_evnttyp(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t n = 2);
ProbingDataset build_evntct(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t k = 3,
                            const Strata& strata = {});

ProbingDataset build_task(const TaskId& task, const Corpus& corpus, const EmbeddingSource& bundle,
                          const BuildOptions& options);

// <dir>/{train,dev,test}.jsonl plus <dir>/dataset.json.
void write_dataset(const ProbingDataset& dataset, const std::filesystem::path& dir);
ProbingDataset read_dataset(const std::filesystem::path& dir);
std::string example_to_jsonl(const ProbingExample& example);

}  // namespace docprobe

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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docprobe/corpus.hpp"
#include "docprobe/embedstore.hpp"
#include "docprobe/probe.hpp"
#include "docprobe/taskgen.hpp"

namespace docprobe {

struct BundleSpec {
  std::string label;  // opaque; e.g. an IE-training epoch or an embedding mode
  std::filesystem::path path;
};

enum class LayerSelection { kLast, kAll, kExplicit };

struct ExperimentSpec {
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::kMucJson;
  std::uint64_t split_seed = 0;  // used when the corpus carries no split
  SplitRatios split_ratios;
  std::vector<BundleSpec> bundles;
  std::vector<TaskId> tasks = all_tasks();
  LayerSelection layer_selection = LayerSelection::kLast;
  std::vector<std::uint32_t> layers;  // kExplicit only
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  ProbeConfig probe;
  Strata strata;
  std::optional<std::size_t> token_budget;  // default: smallest bundle max_tokens
  std::size_t count_buckets = 10;
  std::size_t event_buckets = 3;
  std::filesystem::path output_dir = "results";
  std::size_t workers = 1;

  void validate() const;
};

// Relative paths in the JSON are resolved against `base_dir`.
ExperimentSpec spec_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec read_spec(const std::filesystem::path& path);

struct ResultRow {
  std::string task;
  std::string bundle;
  std::uint32_t layer = 0;
  std::string stratum = "all";
  int stratum_index = -1;  // -1 for unstratified rows
  std::vector<std::pair<std::uint64_t, double>> per_seed;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population standard deviation
  std::size_t n_seeds = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  std::size_t pending_cells = 0;  // cells not run because the sweep stopped early

  const ResultRow* find(const std::string& task, const std::string& bundle, std::uint32_t layer,
                        const std::string& stratum = "all") const;
};

// Mean and population standard deviation; recomputes a row's aggregates.
void aggregate(ResultRow& row);

struct RunOptions {
  std::optional<std::size_t> max_new_cells;  // stop after computing this many uncached cells
  bool write_outputs = true;
  std::function<void(const std::string&)> log;
};

// Already-loaded inputs, parallel to spec.bundles.
struct ExperimentInputs {
  const Corpus* corpus = nullptr;
  std::vector<const EmbeddingSource*> bundles;
};

ResultTable run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});
ResultTable run_experiment(const ExperimentSpec& spec, const ExperimentInputs& inputs,
                           const RunOptions& options = {});

// Every stored layer of the single bundle in the spec.
ResultTable layer_sweep(ExperimentSpec spec, const RunOptions& options = {});
ResultTable layer_sweep(ExperimentSpec spec, const ExperimentInputs& inputs, const RunOptions& options = {});

// Test examples grouped by the word count of their document; examples in
// no stratum are left out.
std::vector<std::vector<ProbingExample>> partition_by_stratum(std::span<const ProbingExample> examples,
                                                              const Corpus& corpus, const Strata& strata);

// One probe per cell trained on the full train split, scored on each
// word-count stratum of the test split. Top-stratum inputs are cut to the
// shared token budget.
ResultTable stratified_eval(const ExperimentSpec& spec, const RunOptions& options = {});
ResultTable stratified_eval(const ExperimentSpec& spec, const ExperimentInputs& inputs,
                            const RunOptions& options = {});

struct DeltaRow {
  std::string task;
  std::uint32_t layer = 0;
  std::string stratum;
  int stratum_index = -1;
  double fulltext_mean = 0.0;
  double sentcat_mean = 0.0;
  double delta = 0.0;      // sentcat - fulltext
  double delta_std = 0.0;  // root-sum-square of the two stds
};

std::vector<DeltaRow> compare_modes(const ResultTable& fulltext, const ResultTable& sentcat);

enum class ReportFormat { kMarkdown, kCsv };
ReportFormat parse_report_format(const std::string& name);

std::string render_report(const ResultTable& table, ReportFormat format);
std::string render_deltas(const std::vector<DeltaRow>& rows, ReportFormat format);
void write_report(const ResultTable& table, ReportFormat format, const std::filesystem::path& path);

std::string table_to_json(const ResultTable& table);
ResultTable table_from_json(const std::string& text);
ResultTable read_results(const std::filesystem::path& dir);

}  // namespace docprobe

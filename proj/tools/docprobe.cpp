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


// Command-line front end: dataset building, single probes, sweeps and reports.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "docprobe/corpus.hpp"
#include "docprobe/dataset_probe.hpp"
#include "docprobe/embedstore.hpp"
#include "docprobe/errors.hpp"
#include "docprobe/runner.hpp"
#include "docprobe/taskgen.hpp"
#include "json.hpp"

namespace {

using namespace docprobe;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

void add_probe_options(CLI::App* cmd, ProbeConfig& c) {
  cmd->add_option("--nhid", c.nhid, "hidden units")->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "dropout rate on the hidden layer")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "mini-batch size")->capture_default_str();
  cmd->add_option("--max-epoch", c.max_epoch, "epoch cap")->capture_default_str();
  cmd->add_option("--tenacity", c.tenacity, "epochs without dev improvement before stopping")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
}

int finish_sweep(const ResultTable& table, const std::filesystem::path& out_dir) {
  std::cerr << table.rows.size() << " rows written to " << out_dir.string() << "\n";
  if (table.pending_cells > 0) std::cerr << table.pending_cells << " cells not yet run; rerun to resume\n";
  for (const auto& f : table.failures) std::cerr << "failed: " << f << "\n";
  return table.failures.empty() ? kExitOk : kExitPartial;
}

RunOptions run_options(std::optional<std::size_t> max_cells, bool quiet) {
  RunOptions o;
  o.max_new_cells = max_cells;
  if (!quiet) o.log = [](const std::string& msg) { std::cerr << msg << "\n"; };
  return o;
}

void write_or_print(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw IOFailure("cannot write " + out);
  f << text;
  if (!f) throw IOFailure("write failed: " + out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probe document-level encoder embeddings for information-extraction knowledge"};
  app.require_subcommand(1);

  // build-tasks
  std::string corpus_path, corpus_format = "muc-json", bundle_path, task_text, out_dir, strata_text = "209,420,431";
  std::uint64_t seed = 0, split_seed = 0;
  std::size_t count_buckets = 10, event_buckets = 3;
  auto* build = app.add_subcommand("build-tasks", "build one probing dataset");
  build->add_option("--corpus", corpus_path, "corpus file or split directory")->required();
  build->add_option("--format", corpus_format, "muc-json or wikievents-json")->capture_default_str();
  build->add_option("--bundle", bundle_path, "embedding bundle directory")->required();
  build->add_option("--task", task_text, "task name, e.g. WordCt or EvntTyp_2")->required();
  build->add_option("--seed", seed, "sampling seed")->capture_default_str();
  build->add_option("--split-seed", split_seed, "seed for the document split when the corpus has none")
      ->capture_default_str();
  build->add_option("--count-buckets", count_buckets, "buckets for WordCt and SentCt")->capture_default_str();
  build->add_option("--event-buckets", event_buckets, "buckets for EvntCt")->capture_default_str();
  build->add_option("--strata", strata_text, "word-count strata bounds")->capture_default_str();
  build->add_option("--out", out_dir, "output directory")->required();

  // train
  std::string dataset_dir, checkpoint_path, report_path;
  std::optional<std::uint32_t> layer;
  ProbeConfig probe;
  auto* train_cmd = app.add_subcommand("train", "train and score one probe");
  train_cmd->add_option("--dataset", dataset_dir, "dataset directory from build-tasks")->required();
  train_cmd->add_option("--bundle", bundle_path, "embedding bundle directory")->required();
  train_cmd->add_option("--layer", layer, "encoder layer; defaults to the last stored layer");
  add_probe_options(train_cmd, probe);
  train_cmd->add_option("--seed", probe.seed, "initialisation and shuffling seed")->capture_default_str();
  train_cmd->add_option("--checkpoint", checkpoint_path, "write the best probe here");
  train_cmd->add_option("--report", report_path, "write the training report JSON here");

  // sweep, layer-sweep, stratify
  std::string spec_path;
  std::optional<std::size_t> workers, max_cells;
  std::optional<std::string> bounds;
  bool quiet = false;
  auto add_sweep_options = [&](CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "experiment spec JSON")->required();
    cmd->add_option("--workers", workers, "concurrent cells");
    cmd->add_option("--max-cells", max_cells, "stop after this many new cells");
    cmd->add_flag("--quiet", quiet, "no progress output");
  };
  auto* sweep = app.add_subcommand("sweep", "run every (task, bundle, layer, seed) cell of a spec");
  add_sweep_options(sweep);
  auto* lsweep = app.add_subcommand("layer-sweep", "run every stored layer of the spec's single bundle");
  add_sweep_options(lsweep);
  auto* stratify = app.add_subcommand("stratify", "score probes per document-length stratum");
  add_sweep_options(stratify);
  stratify->add_option("--bounds", bounds, "strata bounds, e.g. 209,420,431");

  // report, compare
  std::string in_dir, format_text = "markdown", out_path;
  auto* report = app.add_subcommand("report", "render a results table");
  report->add_option("--in", in_dir, "results directory or results.json")->required();
  report->add_option("--format", format_text, "markdown or csv")->capture_default_str();
  report->add_option("--out", out_path, "output file; stdout when omitted");
  std::string fulltext_dir, sentcat_dir;
  auto* compare = app.add_subcommand("compare", "SentCat minus FullText accuracy per (task, layer, stratum)");
  compare->add_option("--fulltext", fulltext_dir, "FullText results")->required();
  compare->add_option("--sentcat", sentcat_dir, "SentCat results")->required();
  compare->add_option("--format", format_text, "markdown or csv")->capture_default_str();
  compare->add_option("--out", out_path, "output file; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (build->parsed()) {
      Corpus corpus = parse_corpus(corpus_path, parse_corpus_format(corpus_format));
      if (corpus.split_assignment.empty()) corpus = split_documents(corpus, SplitRatios{}, split_seed);
      Bundle b = read_bundle(bundle_path);
      BuildOptions options;
      options.seed = seed;
      options.count_buckets = count_buckets;
      options.event_buckets = event_buckets;
      options.strata = parse_strata(strata_text);
      ProbingDataset ds = build_task(parse_task(task_text), corpus, b, options);
      write_dataset(ds, out_dir);
      std::cout << task_name(ds.task) << ": " << ds.split(Split::kTrain).size() << " train, "
                << ds.split(Split::kDev).size() << " dev, " << ds.split(Split::kTest).size() << " test; "
                << ds.dropped_count << " dropped, " << ds.skipped_count << " skipped\n";
      for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
      return kExitOk;
    }
    if (train_cmd->parsed()) {
      probe.validate();
      ProbingDataset ds = read_dataset(dataset_dir);
      Bundle b = read_bundle(bundle_path);
      std::uint32_t l = layer ? *layer : *std::max_element(b.manifest().layer_ids.begin(), b.manifest().layer_ids.end());
      TrainedProbe<float> trained = train(probe, ds, b, l);
      std::string json = report_to_json(trained.report);
      if (!checkpoint_path.empty()) save_checkpoint(trained.model, checkpoint_path);
      write_or_print(json, report_path);
      if (!report_path.empty()) std::cout << "test accuracy " << trained.report.test_accuracy << "\n";
      return kExitOk;
    }
    if (sweep->parsed() || lsweep->parsed() || stratify->parsed()) {
      ExperimentSpec spec = read_spec(spec_path);
      if (workers) spec.workers = *workers;
      if (bounds) spec.strata = parse_strata(*bounds);
      spec.validate();
      RunOptions options = run_options(max_cells, quiet);
      ResultTable table = sweep->parsed()    ? run_experiment(spec, options)
                          : lsweep->parsed() ? layer_sweep(spec, options)
                                             : stratified_eval(spec, options);
      return finish_sweep(table, spec.output_dir);
    }
    if (report->parsed()) {
      write_or_print(render_report(read_results(in_dir), parse_report_format(format_text)), out_path);
      return kExitOk;
    }
    if (compare->parsed()) {
      auto deltas = compare_modes(read_results(fulltext_dir), read_results(sentcat_dir));
      write_or_print(render_deltas(deltas, parse_report_format(format_text)), out_path);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "docprobe: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}

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


#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "docprobe/errors.hpp"
#include "docprobe/runner.hpp"
#include "fixtures.hpp"
#include "json.hpp"

namespace docprobe {
namespace {

ProbeConfig quick_probe() {
  ProbeConfig c;
  c.nhid = 8;
  c.max_epoch = 6;
  c.tenacity = 2;
  c.batch_size = 16;
  return c;
}

struct Experiment {
  Corpus corpus = fixtures::synthetic_corpus(40, 10, 10, 1);
  std::unique_ptr<InMemoryBundle> bundle =
      fixtures::make_bundle(corpus, fixtures::make_manifest(4, {0, 1, 2}), fixtures::gaussian_rows(1));
  ExperimentSpec spec;
  ExperimentInputs inputs;

  explicit Experiment(const std::string& name) {
    spec.bundles = {{"base", "mem"}};
    spec.tasks = {parse_task("IsArg"), parse_task("WordCt")};
    spec.seeds = {0, 1};
    spec.probe = quick_probe();
    spec.count_buckets = 3;
    spec.output_dir = fixtures::temp_dir(name);
    inputs.corpus = &corpus;
    inputs.bundles = {bundle.get()};
  }
  ~Experiment() { std::filesystem::remove_all(spec.output_dir); }
};

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Aggregate, MeanAndPopulationStd) {
  ResultRow r;
  r.per_seed = {{0, 0.6}, {1, 0.6}, {2, 0.6}};
  aggregate(r);
  EXPECT_DOUBLE_EQ(r.mean_accuracy, 0.6);
  EXPECT_DOUBLE_EQ(r.std_accuracy, 0.0);
  EXPECT_EQ(r.n_seeds, 3u);
  r.per_seed = {{0, 0.5}, {1, 0.7}};
  aggregate(r);
  const double mean = (0.5 + 0.7) / 2;
  const double var = ((0.5 - mean) * (0.5 - mean) + (0.7 - mean) * (0.7 - mean)) / 2;
  EXPECT_NEAR(r.mean_accuracy, 0.6, 1e-12);
  EXPECT_NEAR(r.std_accuracy, std::sqrt(var), 1e-12);
}

TEST(SpecJson, ParsesAndResolvesPaths) {
  const char* text = R"({
    "corpus_path": "data/muc.json", "bundle_paths": ["emb/bert-full", {"label": "epoch 3", "path": "/abs/e3"}],
    "tasks": ["WordCt", "EvntTyp_3"], "layers": [0, 12], "seeds": [1, 2, 3],
    "probe": {"nhid": 50, "tenacity": 4}, "strata": [100, 200, 300], "output_dir": "out", "workers": 2,
    "token_budget": 256})";
  ExperimentSpec s = spec_from_json(text, "/base");
  EXPECT_EQ(s.corpus_path, std::filesystem::path("/base/data/muc.json"));
  ASSERT_EQ(s.bundles.size(), 2u);
  EXPECT_EQ(s.bundles[0].label, "bert-full");
  EXPECT_EQ(s.bundles[1].path, std::filesystem::path("/abs/e3"));
  EXPECT_EQ(task_name(s.tasks[1]), "EvntTyp_3");
  EXPECT_EQ(s.layer_selection, LayerSelection::kExplicit);
  EXPECT_EQ(s.layers, (std::vector<std::uint32_t>{0, 12}));
  EXPECT_EQ(s.probe.nhid, 50u);
  EXPECT_EQ(s.probe.tenacity, 4u);
  EXPECT_EQ(s.probe.batch_size, 8u);
  EXPECT_EQ(s.strata.high_min, 300);
  EXPECT_EQ(s.output_dir, std::filesystem::path("/base/out"));
  EXPECT_EQ(s.token_budget, 256u);

  ExperimentSpec d = spec_from_json(R"({"corpus": "c", "bundles": ["b"]})");
  EXPECT_EQ(d.seeds.size(), 5u);
  EXPECT_EQ(d.tasks.size(), 8u);
  EXPECT_EQ(d.layer_selection, LayerSelection::kLast);
}

TEST(SpecJson, RejectsBadSpecs) {
  for (const char* text : {R"({"corpus": "c", "bundles": ["b"], "seeds": []})",
                           R"({"corpus": "c", "bundles": ["b"], "seeds": [1, 1]})",
                           R"({"corpus": "c", "bundles": []})",
                           R"({"corpus": "c", "bundles": ["b"], "colour": "red"})",
                           R"({"corpus": "c", "bundles": ["b"], "probe": {"nhid": 0}})",
                           R"({"corpus": "c", "bundles": ["b"], "layers": "middle"})",
                           R"({"corpus": "c", "bundles": ["b", "b"]})",
                           R"({"corpus": "c", "bundles": ["b"], "tasks": ["Depth"]})",
                           R"({"corpus": 3, "bundles": ["b"]})", "[1, 2]", "{"})
    EXPECT_THROW(spec_from_json(text), InvalidArgument) << text;
}

TEST(RunExperiment, OneRowPerCellWithAllSeeds) {
  Experiment e("run-basic");
  e.spec.seeds = {0, 1, 2, 3, 4};
  ResultTable t = run_experiment(e.spec, e.inputs);
  EXPECT_TRUE(t.failures.empty());
  ASSERT_EQ(t.rows.size(), 2u);
  // Rows follow the fixed task column order, not the order tasks were listed in.
  EXPECT_EQ(t.rows[0].task, "WordCt");
  EXPECT_EQ(t.rows[1].task, "IsArg");
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.n_seeds, 5u);
    EXPECT_EQ(r.layer, 2u);
    EXPECT_EQ(r.stratum, "all");
    ResultRow copy = r;
    aggregate(copy);
    EXPECT_NEAR(copy.mean_accuracy, r.mean_accuracy, 1e-9);
    EXPECT_NEAR(copy.std_accuracy, r.std_accuracy, 1e-9);
  }
  EXPECT_TRUE(std::filesystem::exists(e.spec.output_dir / "results.csv"));
  EXPECT_TRUE(std::filesystem::exists(e.spec.output_dir / "report.md"));
  ResultTable back = read_results(e.spec.output_dir);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].per_seed, t.rows[1].per_seed);
}

TEST(RunExperiment, FailedCellsAreIsolated) {
  Experiment e("run-fail");
  e.spec.tasks = {parse_task("WordCt"), parse_task("Coref")};
  // No entity in this corpus has two mentions in dev, so Coref cannot train.
  Corpus plain = fixtures::builder_fixture();
  for (auto& d : plain.documents)
    for (auto& t : d.templates)
      for (auto& [role, es] : t.roles)
        for (auto& en : es) en.mentions.resize(1);
  auto bundle = fixtures::make_bundle(plain, fixtures::make_manifest(4, {0}, 30), fixtures::gaussian_rows(2));
  e.inputs.corpus = &plain;
  e.inputs.bundles = {bundle.get()};
  ResultTable t = run_experiment(e.spec, e.inputs);
  EXPECT_EQ(t.failures.size(), 2u);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].task, "WordCt");
  EXPECT_NE(t.failures[0].find("Coref"), std::string::npos);
}

TEST(RunExperiment, LayerSelection) {
  Experiment e("run-layers");
  e.spec.tasks = {parse_task("IsArg")};
  e.spec.seeds = {0};
  e.spec.layer_selection = LayerSelection::kExplicit;
  e.spec.layers = {0, 2};
  ResultTable t = run_experiment(e.spec, e.inputs);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].layer, 0u);
  EXPECT_EQ(t.rows[1].layer, 2u);
  e.spec.layers = {7};
  EXPECT_THROW(run_experiment(e.spec, e.inputs), LayerNotInBundle);
}

TEST(LayerSweep, OneRowPerTaskAndLayer) {
  Corpus c = fixtures::synthetic_corpus(20, 5, 5, 4);
  std::vector<std::uint32_t> layers(13);
  std::iota(layers.begin(), layers.end(), 0u);
  auto bundle = fixtures::make_bundle(c, fixtures::make_manifest(2, layers), fixtures::gaussian_rows(3));
  ExperimentSpec spec;
  spec.bundles = {{"bert", "mem"}};
  spec.tasks = {parse_task("IsArg"), parse_task("ArgTyp")};
  spec.seeds = {0};
  spec.probe = quick_probe();
  spec.probe.max_epoch = 2;
  spec.output_dir = fixtures::temp_dir("layer-sweep");
  ExperimentInputs in{&c, {bundle.get()}};
  ResultTable t = layer_sweep(spec, in);
  EXPECT_EQ(t.rows.size(), 26u);
  EXPECT_NE(t.find("ArgTyp", "bert", 7), nullptr);
  spec.bundles.push_back({"other", "mem"});
  in.bundles.push_back(bundle.get());
  EXPECT_THROW(layer_sweep(spec, in), InvalidArgument);
  std::filesystem::remove_all(spec.output_dir);
}

TEST(Stratified, PartitionMatchesManualBinning) {
  const std::size_t counts[] = {50, 209, 210, 300, 420, 425, 431, 600, 1000};
  std::vector<Document> docs;
  std::vector<ProbingExample> examples;
  for (std::size_t i = 0; i < 9; ++i) {
    docs.push_back(fixtures::make_document("d" + std::to_string(i), counts[i], 50));
    ProbingExample ex;
    ex.inputs = {{docs.back().doc_id, VectorRef::Kind::kDocument, 0}};
    examples.push_back(ex);
  }
  Corpus c = fixtures::make_corpus(docs, std::vector<Split>(9, Split::kTest));
  auto parts = partition_by_stratum(examples, c, Strata{});
  std::vector<std::size_t> manual(3, 0);
  for (auto n : counts) {
    if (n <= 209) ++manual[0];
    else if (n >= 210 && n <= 420) ++manual[1];
    else if (n >= 431) ++manual[2];
  }
  ASSERT_EQ(parts.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(parts[s].size(), manual[s]);
  EXPECT_EQ(parts[1][0].inputs[0].doc_id, "d2");
}

TEST(Stratified, PerStratumRowsAndEmptyStratumWarning) {
  // Train/dev spread over lengths; the test split has only short and long documents.
  std::vector<Document> docs;
  std::vector<Split> splits;
  Rng rng(5);
  for (std::size_t i = 0; i < 40; ++i) {
    docs.push_back(fixtures::make_document("tr" + std::to_string(i), 20 + uniform_below(rng, 600), 25));
    splits.push_back(i < 30 ? Split::kTrain : Split::kDev);
  }
  for (std::size_t i = 0; i < 10; ++i) {
    docs.push_back(fixtures::make_document("te" + std::to_string(i), i < 5 ? 100 : 500, 25));
    splits.push_back(Split::kTest);
  }
  Corpus c = fixtures::make_corpus(docs, splits);
  auto bundle = fixtures::make_bundle(c, fixtures::make_manifest(3, {0}, 700), fixtures::gaussian_rows(4));
  ExperimentSpec spec;
  spec.bundles = {{"sentcat", "mem"}};
  spec.tasks = {parse_task("WordCt")};
  spec.seeds = {0, 1};
  spec.probe = quick_probe();
  spec.count_buckets = 3;
  spec.token_budget = 64;
  spec.output_dir = fixtures::temp_dir("stratified");
  ResultTable t = stratified_eval(spec, ExperimentInputs{&c, {bundle.get()}});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].stratum, "<=209");
  EXPECT_EQ(t.rows[1].stratum, ">=431");
  EXPECT_EQ(t.rows[1].stratum_index, 2);
  EXPECT_EQ(t.rows[0].n_seeds, 2u);
  bool warned = false;
  for (const auto& w : t.warnings) warned = warned || w.find("EmptyStratum") != std::string::npos;
  EXPECT_TRUE(warned);
  std::filesystem::remove_all(spec.output_dir);
}

TEST(Resume, InterruptedSweepMatchesUninterrupted) {
  Experiment full("resume-full");
  const std::string reference = render_report(run_experiment(full.spec, full.inputs), ReportFormat::kCsv);

  Experiment part("resume-part");
  RunOptions stop;
  stop.max_new_cells = 1;
  ResultTable partial = run_experiment(part.spec, part.inputs, stop);
  EXPECT_EQ(partial.pending_cells, 3u);
  // A half-written cell file from a killed run is recomputed.
  std::ofstream(part.spec.output_dir / "cells" / "ffffffffffffffff.json") << "{\"key\": ";
  stop.max_new_cells = 2;
  ResultTable second = run_experiment(part.spec, part.inputs, stop);
  EXPECT_EQ(second.pending_cells, 1u);
  ResultTable done = run_experiment(part.spec, part.inputs);
  EXPECT_EQ(done.pending_cells, 0u);
  EXPECT_EQ(render_report(done, ReportFormat::kCsv), reference);
  EXPECT_EQ(read_text(part.spec.output_dir / "results.csv"), reference);
}

TEST(Resume, ChangedSettingsInvalidateCache) {
  Experiment e("resume-change");
  e.spec.tasks = {parse_task("IsArg")};
  e.spec.seeds = {0};
  run_experiment(e.spec, e.inputs);
  e.spec.probe.nhid = 9;
  RunOptions none;
  none.max_new_cells = 0;
  EXPECT_EQ(run_experiment(e.spec, e.inputs, none).pending_cells, 1u);
}

TEST(Resume, CorruptCellFileIsRecomputed) {
  Experiment e("resume-corrupt");
  e.spec.tasks = {parse_task("IsArg")};
  e.spec.seeds = {0};
  const std::string reference = render_report(run_experiment(e.spec, e.inputs), ReportFormat::kCsv);
  for (const auto& entry : std::filesystem::directory_iterator(e.spec.output_dir / "cells"))
    std::filesystem::resize_file(entry.path(), 10);
  EXPECT_EQ(render_report(run_experiment(e.spec, e.inputs), ReportFormat::kCsv), reference);
}

TEST(Workers, ParallelRunMatchesSerial) {
  Experiment serial("workers-1");
  Experiment parallel("workers-3");
  parallel.spec.workers = 3;
  EXPECT_EQ(render_report(run_experiment(serial.spec, serial.inputs), ReportFormat::kCsv),
            render_report(run_experiment(parallel.spec, parallel.inputs), ReportFormat::kCsv));
}

ResultRow row(const std::string& task, std::uint32_t layer, std::vector<double> accs, const std::string& bundle = "b") {
  ResultRow r;
  r.task = task;
  r.bundle = bundle;
  r.layer = layer;
  for (std::size_t i = 0; i < accs.size(); ++i) r.per_seed.emplace_back(i, accs[i]);
  aggregate(r);
  return r;
}

TEST(CompareModes, Deltas) {
  ResultTable full, sent;
  full.rows = {row("WordCt", 12, {0.65, 0.65}), row("IsArg", 12, {0.8, 0.9})};
  sent.rows = {row("WordCt", 12, {0.70, 0.70}), row("IsArg", 12, {0.8, 0.9})};
  auto d = compare_modes(full, sent);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d[0].delta, 0.05, 1e-12);
  EXPECT_NEAR(d[1].delta, 0.0, 1e-12);
  EXPECT_NEAR(d[1].delta_std, std::sqrt(2 * 0.05 * 0.05), 1e-12);
  for (const auto& x : compare_modes(full, full)) EXPECT_EQ(x.delta, 0.0);

  ResultTable missing = sent;
  missing.rows.pop_back();
  EXPECT_THROW(compare_modes(full, missing), KeyMismatch);
  ResultTable two_bundles = full;
  two_bundles.rows.push_back(row("WordCt", 12, {0.1}, "other"));
  EXPECT_THROW(compare_modes(two_bundles, sent), InvalidArgument);
}

TEST(CompareModes, MatchesPerKeySubtraction) {
  Rng rng(6);
  ResultTable full, sent;
  for (std::uint32_t layer = 0; layer < 13; ++layer)
    for (const char* task : {"WordCt", "Coref", "EvntCt"}) {
      std::vector<double> a, b;
      for (int s = 0; s < 5; ++s) {
        a.push_back(uniform_unit(rng));
        b.push_back(uniform_unit(rng));
      }
      full.rows.push_back(row(task, layer, a));
      sent.rows.insert(sent.rows.begin(), row(task, layer, b));
    }
  auto deltas = compare_modes(full, sent);
  ASSERT_EQ(deltas.size(), full.rows.size());
  for (const auto& d : deltas) {
    const ResultRow* f = full.find(d.task, "b", d.layer);
    const ResultRow* s = sent.find(d.task, "b", d.layer);
    EXPECT_DOUBLE_EQ(d.delta, s->mean_accuracy - f->mean_accuracy);
    EXPECT_DOUBLE_EQ(d.delta_std, std::hypot(f->std_accuracy, s->std_accuracy));
  }
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    rows.push_back(fields);
  }
  return rows;
}

TEST(Report, CsvRoundTripReproducesAggregates) {
  ResultTable t;
  t.rows = {row("WordCt", 12, {0.61, 0.64, 0.7}, "bert, full"), row("EvntTyp_2", 3, {0.5, 0.9})};
  t.rows[1].per_seed[1].first = 7;
  aggregate(t.rows[1]);
  auto csv = parse_csv(render_report(t, ReportFormat::kCsv));
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[0], (std::vector<std::string>{"task", "family", "bundle", "layer", "stratum", "n_seeds", "mean_accuracy",
                                              "std_accuracy", "seed_0", "seed_1", "seed_2", "seed_7"}));
  EXPECT_EQ(csv[1][2], "bert, full");
  EXPECT_EQ(csv[1][1], "surface");
  EXPECT_EQ(csv[2][1], "event");
  for (std::size_t i = 1; i < csv.size(); ++i) {
    ResultRow r;
    for (std::size_t c = 8; c < csv[i].size(); ++c)
      if (!csv[i][c].empty()) r.per_seed.emplace_back(c, std::stod(csv[i][c]));
    aggregate(r);
    EXPECT_NEAR(r.mean_accuracy, std::stod(csv[i][6]), 1e-9);
    EXPECT_NEAR(r.std_accuracy, std::stod(csv[i][7]), 1e-9);
    EXPECT_EQ(std::to_string(r.n_seeds), csv[i][5]);
  }
  EXPECT_EQ(csv[2][9], "");
}

TEST(Report, MarkdownGroupsByFamily) {
  ResultTable one;
  one.rows = {row("Coref", 12, {0.75})};
  const std::string md = render_report(one, ReportFormat::kMarkdown);
  std::size_t table_rows = 0;
  std::istringstream in(md);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("| ", 0) == 0 && line.find("Bundle") == std::string::npos) ++table_rows;
  EXPECT_EQ(table_rows, 1u);
  EXPECT_NE(md.find("## Semantic"), std::string::npos);
  EXPECT_NE(md.find("75.00 ± 0.00"), std::string::npos);

  ResultTable all;
  for (const auto& task : all_tasks()) all.rows.push_back(row(task_name(task), 12, {0.5}));
  const std::string full = render_report(all, ReportFormat::kMarkdown);
  const auto surface = full.find("## Surface"), semantic = full.find("## Semantic"), event = full.find("## Event");
  ASSERT_NE(event, std::string::npos);
  EXPECT_LT(surface, semantic);
  EXPECT_LT(semantic, event);
  EXPECT_LT(full.find("WordCt"), semantic);
  EXPECT_GT(full.find("IsArg"), semantic);
  EXPECT_LT(full.find("IsArg"), event);
  EXPECT_GT(full.find("EvntTyp_2"), event);
  EXPECT_THROW(render_report(ResultTable{}, ReportFormat::kCsv), InvalidArgument);
  EXPECT_THROW(parse_report_format("html"), InvalidArgument);
}

TEST(Report, JsonRoundTrip) {
  ResultTable t;
  t.rows = {row("WordCt", 12, {0.1, 0.2}), row("IsArg", 3, {0.3})};
  t.rows[1].stratum = ">=431";
  t.rows[1].stratum_index = 2;
  t.failures = {"x"};
  t.warnings = {"y"};
  t.pending_cells = 4;
  ResultTable back = table_from_json(table_to_json(t));
  EXPECT_EQ(table_to_json(back), table_to_json(t));
  EXPECT_THROW(table_from_json("{}"), MalformedInput);
}

}  // namespace
}  // namespace docprobe

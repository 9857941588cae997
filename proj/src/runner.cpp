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


#include "docprobe/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "docprobe/dataset_probe.hpp"
#include "docprobe/errors.hpp"
#include "json.hpp"

namespace docprobe {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IOFailure("cannot write " + tmp.string());
    out << text;
    if (!out) throw IOFailure("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IOFailure("cannot rename " + tmp.string() + ": " + ec.message());
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

template <typename T>
T get_number(const json& j, const char* key) {
  if (!j.is_number()) throw InvalidArgument(std::string("spec field '") + key + "' must be a number");
  if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) throw InvalidArgument(std::string("spec field '") + key + "' must be >= 0");
  }
  return j.get<T>();
}

ProbeConfig probe_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("spec field 'probe' must be an object");
  ProbeConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "nhid") c.nhid = get_number<std::size_t>(value, "nhid");
    else if (key == "dropout") c.dropout = get_number<double>(value, "dropout");
    else if (key == "batch_size") c.batch_size = get_number<std::size_t>(value, "batch_size");
    else if (key == "max_epoch") c.max_epoch = get_number<std::size_t>(value, "max_epoch");
    else if (key == "tenacity") c.tenacity = get_number<std::size_t>(value, "tenacity");
    else if (key == "attention_heads") c.attention_heads = get_number<std::size_t>(value, "attention_heads");
    else if (key == "learning_rate") c.learning_rate = get_number<double>(value, "learning_rate");
    else throw InvalidArgument("unknown probe field '" + key + "'");
  }
  return c;
}

json probe_to_json(const ProbeConfig& c) {
  return {{"nhid", c.nhid},           {"dropout", c.dropout},
          {"batch_size", c.batch_size}, {"max_epoch", c.max_epoch},
          {"tenacity", c.tenacity},   {"attention_heads", c.attention_heads},
          {"learning_rate", c.learning_rate}};
}

struct Cell {
  std::size_t task = 0;
  std::size_t bundle = 0;
  std::uint32_t layer = 0;
  std::uint64_t seed = 0;
};

struct StratumScore {
  int index = -1;
  std::string label = "all";
  double accuracy = 0.0;
};

struct CellOutcome {
  std::vector<StratumScore> scores;
  std::vector<std::string> warnings;
};

json outcome_to_json(const json& key, const CellOutcome& o) {
  json scores = json::array();
  for (const auto& s : o.scores) scores.push_back({{"stratum", s.label}, {"index", s.index}, {"accuracy", s.accuracy}});
  return {{"key", key}, {"scores", scores}, {"warnings", o.warnings}};
}

std::optional<CellOutcome> load_cached(const std::filesystem::path& path, const json& key) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    json j = json::parse(read_file(path));
    if (j.at("key") != key) return std::nullopt;
    CellOutcome o;
    for (const auto& s : j.at("scores"))
      o.scores.push_back({s.at("index").get<int>(), s.at("stratum").get<std::string>(), s.at("accuracy").get<double>()});
    o.warnings = j.at("warnings").get<std::vector<std::string>>();
    return o;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::uint32_t> resolve_layers(const ExperimentSpec& spec, const BundleManifest& manifest,
                                          const std::string& label) {
  std::vector<std::uint32_t> ids = manifest.layer_ids;
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw LayerNotInBundle("bundle '" + label + "' stores no layers");
  switch (spec.layer_selection) {
    case LayerSelection::kLast:
      return {ids.back()};
    case LayerSelection::kAll:
      return ids;
    case LayerSelection::kExplicit:
      for (auto l : spec.layers)
        if (!std::binary_search(ids.begin(), ids.end(), l))
          throw LayerNotInBundle("layer " + std::to_string(l) + " is not stored in bundle '" + label + "'");
      return spec.layers;
  }
  return {};
}

class CellRunner {
 public:
  CellRunner(const ExperimentSpec& spec, const ExperimentInputs& inputs, bool stratified)
      : spec_(spec), inputs_(inputs), stratified_(stratified) {
    budget_ = spec.token_budget;
    if (!budget_) {
      for (const auto* b : inputs.bundles) {
        std::size_t m = b->manifest().max_tokens;
        budget_ = budget_ ? std::min(*budget_, m) : m;
      }
    }
  }

  json key(const Cell& c) const {
    const auto& b = spec_.bundles[c.bundle];
    json strata = json::array({spec_.strata.low_max, spec_.strata.mid_max, spec_.strata.high_min});
    return {{"task", task_name(spec_.tasks[c.task])},
            {"bundle", b.label},
            {"bundle_path", b.path.generic_string()},
            {"layer", c.layer},
            {"seed", c.seed},
            {"mode", stratified_ ? "stratified" : "plain"},
            {"probe", probe_to_json(spec_.probe)},
            {"count_buckets", spec_.count_buckets},
            {"event_buckets", spec_.event_buckets},
            {"strata", strata},
            {"token_budget", stratified_ && budget_ ? json(*budget_) : json(nullptr)},
            {"corpus", spec_.corpus_path.generic_string()},
            {"split_seed", spec_.split_seed}};
  }

  CellOutcome run(const Cell& c) const {
    const EmbeddingSource& bundle = *inputs_.bundles[c.bundle];
    const Corpus& corpus = *inputs_.corpus;
    BuildOptions build;
    build.seed = c.seed;
    build.count_buckets = spec_.count_buckets;
    build.event_buckets = spec_.event_buckets;
    build.strata = spec_.strata;
    ProbingDataset ds = build_task(spec_.tasks[c.task], corpus, bundle, build);

    CellOutcome out;
    out.warnings = ds.warnings;
    ProbeConfig config = spec_.probe;
    config.seed = c.seed;
    TrainedProbe<float> trained = train(config, ds, bundle, c.layer);
    if (!stratified_) {
      out.scores.push_back({-1, "all", trained.report.test_accuracy});
      return out;
    }

    const auto by_stratum = partition_by_stratum(ds.split(Split::kTest), corpus, spec_.strata);
    for (std::size_t s = 0; s < by_stratum.size(); ++s) {
      const std::string label = spec_.strata.label(s);
      if (by_stratum[s].empty()) {
        out.warnings.push_back("EmptyStratum: no test examples in stratum " + label);
        continue;
      }
      bool top = s + 1 == by_stratum.size();
      auto m = materialize(by_stratum[s], bundle, c.layer, top ? budget_ : std::nullopt);
      if (m.samples.empty()) {
        out.warnings.push_back("EmptyStratum: no usable test examples in stratum " + label);
        continue;
      }
      double acc = evaluate<float>(trained.model, m.samples);
      out.scores.push_back({static_cast<int>(s), label, acc});
    }
    return out;
  }

 private:
  const ExperimentSpec& spec_;
  const ExperimentInputs& inputs_;
  bool stratified_;
  std::optional<std::size_t> budget_;
};

std::string cell_name(const ExperimentSpec& spec, const Cell& c) {
  return task_name(spec.tasks[c.task]) + "/" + spec.bundles[c.bundle].label + "/layer " + std::to_string(c.layer) +
         "/seed " + std::to_string(c.seed);
}

void write_outputs(const ResultTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "results.json", table_to_json(table));
  if (table.rows.empty()) return;
  write_file_atomic(dir / "results.csv", render_report(table, ReportFormat::kCsv));
  write_file_atomic(dir / "report.md", render_report(table, ReportFormat::kMarkdown));
}

ResultTable run_cells(const ExperimentSpec& spec, const ExperimentInputs& inputs, bool stratified,
                      const RunOptions& options) {
  spec.validate();
  if (!inputs.corpus) throw InvalidArgument("no corpus supplied");
  if (inputs.bundles.size() != spec.bundles.size())
    throw InvalidArgument("expected " + std::to_string(spec.bundles.size()) + " bundles, got " +
                          std::to_string(inputs.bundles.size()));

  std::vector<Cell> cells;
  for (std::size_t t = 0; t < spec.tasks.size(); ++t)
    for (std::size_t b = 0; b < spec.bundles.size(); ++b)
      for (std::uint32_t layer : resolve_layers(spec, inputs.bundles[b]->manifest(), spec.bundles[b].label))
        for (std::uint64_t seed : spec.seeds) cells.push_back({t, b, layer, seed});

  CellRunner runner(spec, inputs, stratified);
  const std::filesystem::path cache_dir = spec.output_dir / "cells";
  if (options.write_outputs) std::filesystem::create_directories(cache_dir);

  std::vector<json> keys(cells.size());
  std::vector<std::optional<CellOutcome>> outcomes(cells.size());
  std::vector<std::string> errors(cells.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    keys[i] = runner.key(cells[i]);
    if (options.write_outputs)
      outcomes[i] = load_cached(cache_dir / (hex64(fnv1a(keys[i].dump())) + ".json"), keys[i]);
    if (!outcomes[i]) todo.push_back(i);
  }
  std::size_t pending = 0;
  if (options.max_new_cells && todo.size() > *options.max_new_cells) {
    pending = todo.size() - *options.max_new_cells;
    todo.resize(*options.max_new_cells);
  }

  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(msg);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) {
      std::size_t i = todo[k];
      try {
        CellOutcome o = runner.run(cells[i]);
        if (options.write_outputs)
          write_file_atomic(cache_dir / (hex64(fnv1a(keys[i].dump())) + ".json"), outcome_to_json(keys[i], o).dump());
        outcomes[i] = std::move(o);
        log("done " + cell_name(spec, cells[i]));
      } catch (const std::exception& e) {
        errors[i] = e.what();
        log("failed " + cell_name(spec, cells[i]) + ": " + e.what());
      }
    }
  };
  std::size_t n_threads = std::min(spec.workers, std::max<std::size_t>(todo.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ResultTable table;
  table.pending_cells = pending;
  std::map<std::tuple<std::size_t, std::size_t, std::uint32_t, int>, ResultRow> rows;
  std::set<std::string> seen_warnings;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    if (!errors[i].empty()) table.failures.push_back(cell_name(spec, c) + ": " + errors[i]);
    if (!outcomes[i]) continue;
    for (const auto& w : outcomes[i]->warnings) {
      std::string msg = task_name(spec.tasks[c.task]) + "/" + spec.bundles[c.bundle].label + "/seed " +
                        std::to_string(c.seed) + ": " + w;
      if (seen_warnings.insert(msg).second) table.warnings.push_back(msg);
    }
    for (const auto& s : outcomes[i]->scores) {
      ResultRow& row = rows[{c.task, c.bundle, c.layer, s.index}];
      row.task = task_name(spec.tasks[c.task]);
      row.bundle = spec.bundles[c.bundle].label;
      row.layer = c.layer;
      row.stratum = s.label;
      row.stratum_index = s.index;
      row.per_seed.emplace_back(c.seed, s.accuracy);
    }
  }
  std::vector<std::pair<std::tuple<int, std::size_t, std::uint32_t, int>, ResultRow>> ordered;
  for (auto& [k, row] : rows) {
    aggregate(row);
    ordered.push_back({{task_rank(spec.tasks[std::get<0>(k)]), std::get<1>(k), std::get<2>(k), std::get<3>(k)},
                       std::move(row)});
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [k, row] : ordered) table.rows.push_back(std::move(row));

  if (options.write_outputs) write_outputs(table, spec.output_dir);
  return table;
}

struct LoadedInputs {
  Corpus corpus;
  std::vector<Bundle> bundles;
  ExperimentInputs view() const {
    ExperimentInputs in;
    in.corpus = &corpus;
    for (const auto& b : bundles) in.bundles.push_back(&b);
    return in;
  }
};

LoadedInputs load_inputs(const ExperimentSpec& spec) {
  spec.validate();
  LoadedInputs in;
  in.corpus = parse_corpus(spec.corpus_path, spec.corpus_format);
  if (in.corpus.split_assignment.empty()) in.corpus = split_documents(in.corpus, spec.split_ratios, spec.split_seed);
  for (const auto& b : spec.bundles) in.bundles.push_back(read_bundle(b.path));
  return in;
}

}  // namespace

std::vector<std::vector<ProbingExample>> partition_by_stratum(std::span<const ProbingExample> examples,
                                                              const Corpus& corpus, const Strata& strata) {
  std::vector<std::vector<ProbingExample>> out(strata.count());
  for (const auto& ex : examples) {
    if (ex.inputs.empty()) continue;
    const Document* doc = corpus.find(ex.inputs.front().doc_id);
    if (!doc) throw UnknownDoc("doc '" + ex.inputs.front().doc_id + "' is not in the corpus");
    if (auto s = strata.stratum_of(static_cast<std::int64_t>(doc->words.size()))) out[*s].push_back(ex);
  }
  return out;
}

void ExperimentSpec::validate() const {
  if (bundles.empty()) throw InvalidArgument("experiment needs at least one bundle");
  if (tasks.empty()) throw InvalidArgument("experiment needs at least one task");
  if (seeds.empty()) throw InvalidArgument("experiment needs at least one seed");
  if (workers == 0) throw InvalidArgument("workers must be >= 1");
  if (layer_selection == LayerSelection::kExplicit && layers.empty())
    throw InvalidArgument("explicit layer list is empty");
  std::set<std::string> labels;
  for (const auto& b : bundles)
    if (!labels.insert(b.label).second) throw InvalidArgument("duplicate bundle label '" + b.label + "'");
  std::set<std::uint64_t> unique_seeds(seeds.begin(), seeds.end());
  if (unique_seeds.size() != seeds.size()) throw InvalidArgument("duplicate seeds");
  if (count_buckets < 2 || event_buckets < 2) throw InvalidArgument("bucket counts must be >= 2");
  if (token_budget && *token_budget == 0) throw InvalidArgument("token_budget must be positive");
  probe.validate();
}

ExperimentSpec spec_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("experiment spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("experiment spec must be a JSON object");

  ExperimentSpec spec;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "corpus" || key == "corpus_path") {
        spec.corpus_path = resolve(base_dir, v.get<std::string>());
      } else if (key == "corpus_format") {
        spec.corpus_format = parse_corpus_format(v.get<std::string>());
      } else if (key == "split_seed") {
        spec.split_seed = get_number<std::uint64_t>(v, "split_seed");
      } else if (key == "split_ratios") {
        auto r = v.get<std::vector<double>>();
        if (r.size() != 3) throw InvalidArgument("split_ratios needs three values");
        spec.split_ratios = {r[0], r[1], r[2]};
      } else if (key == "bundles" || key == "bundle_paths") {
        for (const auto& b : v) {
          if (b.is_string()) {
            auto path = resolve(base_dir, b.get<std::string>());
            spec.bundles.push_back({path.filename().string(), path});
          } else {
            spec.bundles.push_back({b.at("label").get<std::string>(), resolve(base_dir, b.at("path").get<std::string>())});
          }
        }
      } else if (key == "tasks") {
        if (v.is_string() && v.get<std::string>() == "all") {
          spec.tasks = all_tasks();
        } else {
          spec.tasks.clear();
          for (const auto& t : v) spec.tasks.push_back(parse_task(t.get<std::string>()));
        }
      } else if (key == "layers") {
        if (v.is_string()) {
          std::string s = v.get<std::string>();
          if (s == "last") spec.layer_selection = LayerSelection::kLast;
          else if (s == "all") spec.layer_selection = LayerSelection::kAll;
          else throw InvalidArgument("layers must be \"last\", \"all\" or a list");
        } else {
          spec.layer_selection = LayerSelection::kExplicit;
          spec.layers = v.get<std::vector<std::uint32_t>>();
        }
      } else if (key == "seeds") {
        spec.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (key == "probe") {
        spec.probe = probe_from_json(v);
      } else if (key == "strata") {
        if (v.is_string()) {
          spec.strata = parse_strata(v.get<std::string>());
        } else {
          auto s = v.get<std::vector<std::int64_t>>();
          if (s.size() != 3) throw InvalidArgument("strata needs three bounds");
          spec.strata = parse_strata(std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]));
        }
      } else if (key == "token_budget") {
        if (!v.is_null()) spec.token_budget = get_number<std::size_t>(v, "token_budget");
      } else if (key == "count_buckets") {
        spec.count_buckets = get_number<std::size_t>(v, "count_buckets");
      } else if (key == "event_buckets") {
        spec.event_buckets = get_number<std::size_t>(v, "event_buckets");
      } else if (key == "output_dir") {
        spec.output_dir = resolve(base_dir, v.get<std::string>());
      } else if (key == "workers") {
        spec.workers = get_number<std::size_t>(v, "workers");
      } else {
        throw InvalidArgument("unknown experiment spec field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec read_spec(const std::filesystem::path& path) {
  return spec_from_json(read_file(path), path.parent_path());
}

const ResultRow* ResultTable::find(const std::string& task, const std::string& bundle, std::uint32_t layer,
                                   const std::string& stratum) const {
  for (const auto& r : rows)
    if (r.task == task && r.bundle == bundle && r.layer == layer && r.stratum == stratum) return &r;
  return nullptr;
}

void aggregate(ResultRow& row) {
  row.n_seeds = row.per_seed.size();
  if (row.per_seed.empty()) {
    row.mean_accuracy = row.std_accuracy = 0.0;
    return;
  }
  double sum = 0.0;
  for (const auto& [seed, acc] : row.per_seed) sum += acc;
  double mean = sum / static_cast<double>(row.n_seeds);
  double sq = 0.0;
  for (const auto& [seed, acc] : row.per_seed) sq += (acc - mean) * (acc - mean);
  row.mean_accuracy = mean;
  row.std_accuracy = std::sqrt(sq / static_cast<double>(row.n_seeds));
}

ResultTable run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  LoadedInputs in = load_inputs(spec);
  return run_cells(spec, in.view(), false, options);
}

ResultTable run_experiment(const ExperimentSpec& spec, const ExperimentInputs& inputs, const RunOptions& options) {
  return run_cells(spec, inputs, false, options);
}

ResultTable layer_sweep(ExperimentSpec spec, const RunOptions& options) {
  if (spec.bundles.size() != 1) throw InvalidArgument("layer sweep takes exactly one bundle");
  spec.layer_selection = LayerSelection::kAll;
  LoadedInputs in = load_inputs(spec);
  return run_cells(spec, in.view(), false, options);
}

ResultTable layer_sweep(ExperimentSpec spec, const ExperimentInputs& inputs, const RunOptions& options) {
  if (spec.bundles.size() != 1) throw InvalidArgument("layer sweep takes exactly one bundle");
  spec.layer_selection = LayerSelection::kAll;
  return run_cells(spec, inputs, false, options);
}

ResultTable stratified_eval(const ExperimentSpec& spec, const RunOptions& options) {
  LoadedInputs in = load_inputs(spec);
  return run_cells(spec, in.view(), true, options);
}

ResultTable stratified_eval(const ExperimentSpec& spec, const ExperimentInputs& inputs,
                            const RunOptions& options) {
  return run_cells(spec, inputs, true, options);
}

std::vector<DeltaRow> compare_modes(const ResultTable& fulltext, const ResultTable& sentcat) {
  using Key = std::tuple<std::string, std::uint32_t, std::string>;
  auto index = [](const ResultTable& t, const char* which) {
    std::map<Key, const ResultRow*> m;
    for (const auto& r : t.rows)
      if (!m.emplace(Key{r.task, r.layer, r.stratum}, &r).second)
        throw InvalidArgument(std::string(which) + " results hold more than one bundle for " + r.task + "/layer " +
                              std::to_string(r.layer) + "/" + r.stratum);
    return m;
  };
  auto full = index(fulltext, "FullText");
  auto sent = index(sentcat, "SentCat");
  auto describe = [](const Key& k) {
    return std::get<0>(k) + "/layer " + std::to_string(std::get<1>(k)) + "/" + std::get<2>(k);
  };
  for (const auto& [k, r] : full)
    if (!sent.count(k)) throw KeyMismatch("SentCat results lack " + describe(k));
  for (const auto& [k, r] : sent)
    if (!full.count(k)) throw KeyMismatch("FullText results lack " + describe(k));

  std::vector<DeltaRow> out;
  for (const auto& r : fulltext.rows) {
    const ResultRow* s = sent.at(Key{r.task, r.layer, r.stratum});
    DeltaRow d;
    d.task = r.task;
    d.layer = r.layer;
    d.stratum = r.stratum;
    d.stratum_index = r.stratum_index;
    d.fulltext_mean = r.mean_accuracy;
    d.sentcat_mean = s->mean_accuracy;
    d.delta = s->mean_accuracy - r.mean_accuracy;
    d.delta_std = std::sqrt(r.std_accuracy * r.std_accuracy + s->std_accuracy * s->std_accuracy);
    out.push_back(std::move(d));
  }
  return out;
}

std::string table_to_json(const ResultTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json per_seed = json::array();
    for (const auto& [seed, acc] : r.per_seed) per_seed.push_back({{"seed", seed}, {"accuracy", acc}});
    rows.push_back({{"task", r.task},
                    {"bundle", r.bundle},
                    {"layer", r.layer},
                    {"stratum", r.stratum},
                    {"stratum_index", r.stratum_index},
                    {"per_seed", per_seed},
                    {"mean_accuracy", r.mean_accuracy},
                    {"std_accuracy", r.std_accuracy},
                    {"n_seeds", r.n_seeds}});
  }
  json j = {{"rows", rows},
            {"failures", table.failures},
            {"warnings", table.warnings},
            {"pending_cells", table.pending_cells}};
  return j.dump(2) + "\n";
}

ResultTable table_from_json(const std::string& text) {
  ResultTable t;
  try {
    json j = json::parse(text);
    for (const auto& r : j.at("rows")) {
      ResultRow row;
      row.task = r.at("task").get<std::string>();
      row.bundle = r.at("bundle").get<std::string>();
      row.layer = r.at("layer").get<std::uint32_t>();
      row.stratum = r.at("stratum").get<std::string>();
      row.stratum_index = r.at("stratum_index").get<int>();
      for (const auto& s : r.at("per_seed"))
        row.per_seed.emplace_back(s.at("seed").get<std::uint64_t>(), s.at("accuracy").get<double>());
      aggregate(row);
      t.rows.push_back(std::move(row));
    }
    t.failures = j.at("failures").get<std::vector<std::string>>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    t.pending_cells = j.value("pending_cells", std::size_t{0});
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("results file: ") + e.what());
  }
  return t;
}

ResultTable read_results(const std::filesystem::path& path) {
  std::filesystem::path file = std::filesystem::is_directory(path) ? path / "results.json" : path;
  return table_from_json(read_file(file));
}

}  // namespace docprobe

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


#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "docprobe/errors.hpp"
#include "docprobe/runner.hpp"
#include "json.hpp"

namespace docprobe {

namespace {

// Shortest text that reads back to the same double.
std::string number(double v) { return nlohmann::json(v).dump(); }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

TaskFamily family_of(const std::string& task) { return task_family(parse_task(task).kind); }

std::string render_csv(const ResultTable& table) {
  std::set<std::uint64_t> seeds;
  for (const auto& r : table.rows)
    for (const auto& [seed, acc] : r.per_seed) seeds.insert(seed);

  std::ostringstream out;
  out << "task,family,bundle,layer,stratum,n_seeds,mean_accuracy,std_accuracy";
  for (auto s : seeds) out << ",seed_" << s;
  out << "\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.task) << ',' << family_name(family_of(r.task)) << ',' << csv_field(r.bundle) << ','
        << r.layer << ',' << csv_field(r.stratum) << ',' << r.n_seeds << ',' << number(r.mean_accuracy) << ','
        << number(r.std_accuracy);
    std::map<std::uint64_t, double> by_seed(r.per_seed.begin(), r.per_seed.end());
    for (auto s : seeds) {
      out << ',';
      if (auto it = by_seed.find(s); it != by_seed.end()) out << number(it->second);
    }
    out << "\n";
  }
  return out.str();
}

std::string render_markdown(const ResultTable& table) {
  std::ostringstream out;
  out << "# Probing results\n\nAccuracy in percent, mean ± standard deviation over seeds.\n";
  for (TaskFamily family : {TaskFamily::kSurface, TaskFamily::kSemantic, TaskFamily::kEvent}) {
    std::vector<std::pair<int, std::string>> tasks;
    std::vector<std::tuple<std::string, std::uint32_t, std::string>> lines;
    std::map<std::tuple<std::string, std::uint32_t, std::string, std::string>, const ResultRow*> cells;
    for (const auto& r : table.rows) {
      if (family_of(r.task) != family) continue;
      std::pair<int, std::string> t{task_rank(parse_task(r.task)), r.task};
      if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) tasks.push_back(t);
      std::tuple<std::string, std::uint32_t, std::string> line{r.bundle, r.layer, r.stratum};
      if (std::find(lines.begin(), lines.end(), line) == lines.end()) lines.push_back(line);
      cells[{r.bundle, r.layer, r.stratum, r.task}] = &r;
    }
    if (tasks.empty()) continue;
    std::sort(tasks.begin(), tasks.end());

    std::string title = family_name(family);
    title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
    out << "\n## " << title << "\n\n| Bundle | Layer | Stratum |";
    for (const auto& t : tasks) out << ' ' << t.second << " |";
    out << "\n|---|---|---|";
    for (std::size_t i = 0; i < tasks.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& [bundle, layer, stratum] : lines) {
      out << "| " << bundle << " | " << layer << " | " << stratum << " |";
      for (const auto& t : tasks) {
        auto it = cells.find({bundle, layer, stratum, t.second});
        if (it == cells.end()) out << " n/a |";
        else out << ' ' << percent(it->second->mean_accuracy) << " ± " << percent(it->second->std_accuracy) << " |";
      }
      out << "\n";
    }
  }
  if (!table.failures.empty()) {
    out << "\n## Failed cells\n\n";
    for (const auto& f : table.failures) out << "- " << f << "\n";
  }
  if (!table.warnings.empty()) {
    out << "\n## Warnings\n\n";
    for (const auto& w : table.warnings) out << "- " << w << "\n";
  }
  if (table.pending_cells > 0) out << "\n" << table.pending_cells << " cells not yet run.\n";
  return out.str();
}

}  // namespace

ReportFormat parse_report_format(const std::string& name) {
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  throw InvalidArgument("unknown report format '" + name + "'");
}

std::string render_report(const ResultTable& table, ReportFormat format) {
  if (table.rows.empty()) throw InvalidArgument("result table is empty");
  return format == ReportFormat::kCsv ? render_csv(table) : render_markdown(table);
}

std::string render_deltas(const std::vector<DeltaRow>& rows, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << "task,layer,stratum,fulltext_mean,sentcat_mean,delta,delta_std\n";
    for (const auto& d : rows)
      out << csv_field(d.task) << ',' << d.layer << ',' << csv_field(d.stratum) << ',' << number(d.fulltext_mean)
          << ',' << number(d.sentcat_mean) << ',' << number(d.delta) << ',' << number(d.delta_std) << "\n";
    return out.str();
  }
  out << "| Task | Layer | Stratum | FullText | SentCat | SentCat - FullText |\n|---|---|---|---|---|---|\n";
  for (const auto& d : rows)
    out << "| " << d.task << " | " << d.layer << " | " << d.stratum << " | " << percent(d.fulltext_mean) << " | "
        << percent(d.sentcat_mean) << " | " << percent(d.delta) << " ± " << percent(d.delta_std) << " |\n";
  return out.str();
}

void write_report(const ResultTable& table, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOFailure("cannot write " + path.string());
  out << render_report(table, format);
  if (!out) throw IOFailure("write failed: " + path.string());
}

}  // namespace docprobe

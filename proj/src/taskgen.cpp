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

#include "docprobe/taskgen.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "docprobe/errors.hpp"
#include "docprobe/random.hpp"

namespace docprobe {

using nlohmann::json;

std::string task_name(const TaskId& task) {
  switch (task.kind) {
    case TaskKind::kWordCt: return "WordCt";
    case TaskKind::kSentCt: return "SentCt";
    case TaskKind::kIsArg: return "IsArg";
    case TaskKind::kArgTyp: return "ArgTyp";
    case TaskKind::kCoref: return "Coref";
    case TaskKind::kCoEvnt: return "CoEvnt";
    case TaskKind::kEvntTyp: return "EvntTyp_" + std::to_string(task.n);
    case TaskKind::kEvntCt: return "EvntCt";
  }
  return "?";
}

TaskId parse_task(const std::string& name) {
  static const std::map<std::string, TaskKind> kinds{
      {"WordCt", TaskKind::kWordCt}, {"SentCt", TaskKind::kSentCt}, {"IsArg", TaskKind::kIsArg},
      {"ArgTyp", TaskKind::kArgTyp}, {"Coref", TaskKind::kCoref},   {"CoEvnt", TaskKind::kCoEvnt},
      {"EvntCt", TaskKind::kEvntCt}};
  if (auto it = kinds.find(name); it != kinds.end()) return {it->second, 2};
  if (name == "EvntTyp") return {TaskKind::kEvntTyp, 2};
  const std::string prefix = "EvntTyp_";
  if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size()) {
    const std::string digits = name.substr(prefix.size());
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto n = std::stoul(digits);
      if (n >= 1) return {TaskKind::kEvntTyp, n};
    }
  }
  throw InvalidArgument("unknown task '" + name + "'");
}

TaskFamily task_family(TaskKind kind) {
  switch (kind) {
    case TaskKind::kWordCt:
    case TaskKind::kSentCt: return TaskFamily::kSurface;
    case TaskKind::kIsArg:
    case TaskKind::kArgTyp:
    case TaskKind::kCoref: return TaskFamily::kSemantic;
    default: return TaskFamily::kEvent;
  }
}

const char* family_name(TaskFamily family) {
  switch (family) {
    case TaskFamily::kSurface: return "surface";
    case TaskFamily::kSemantic: return "semantic";
    case TaskFamily::kEvent: return "event";
  }
  return "?";
}

int task_rank(const TaskId& task) { return static_cast<int>(task.kind); }

std::vector<TaskId> all_tasks(std::size_t evnttyp_n) {
  return {{TaskKind::kWordCt, 2}, {TaskKind::kSentCt, 2},          {TaskKind::kIsArg, 2},
          {TaskKind::kArgTyp, 2}, {TaskKind::kCoref, 2},           {TaskKind::kCoEvnt, 2},
          {TaskKind::kEvntTyp, evnttyp_n}, {TaskKind::kEvntCt, 2}};
}

std::size_t BucketSpec::bucket_of(std::int64_t count) const {
  return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), count) -
                                  boundaries.begin());
}

std::string BucketSpec::label(std::size_t bucket) const {
  if (boundaries.empty()) return "all";
  if (bucket == 0) return "<=" + std::to_string(boundaries.front() - 1);
  if (bucket >= boundaries.size()) return ">=" + std::to_string(boundaries.back());
  return std::to_string(boundaries[bucket - 1]) + "-" + std::to_string(boundaries[bucket] - 1);
}

BucketSpec quantile_buckets(std::span<const std::int64_t> counts, std::size_t k) {
  if (k < 2) throw InvalidArgument("bucket count must be at least 2");
  if (counts.empty()) throw EmptySplit("no counts to bucket");
  std::vector<std::int64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());

  // Positions i where a cut before sorted[i] separates distinct values.
  std::vector<std::size_t> cuts;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1] < sorted[i]) cuts.push_back(i);

  BucketSpec spec;
  spec.requested_k = k;
  if (cuts.size() + 1 < k) {
    spec.degenerate = true;
    for (auto i : cuts) spec.boundaries.push_back(sorted[i]);
    return spec;
  }

  const std::size_t n = sorted.size();
  std::size_t prev = 0;
  for (std::size_t j = 1; j < k; ++j) {
    const auto ideal = static_cast<std::size_t>(std::llround(static_cast<double>(j * n) / static_cast<double>(k)));
    auto c = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), ideal) - cuts.begin());
    if (j > 1) c = std::max(c, prev + 1);
    c = std::min(c, cuts.size() - (k - j));
    spec.boundaries.push_back(sorted[cuts[c]]);
    prev = c;
  }
  return spec;
}

std::optional<std::size_t> Strata::stratum_of(std::int64_t words) const {
  if (words <= low_max) return 0;
  if (words <= mid_max) return 1;
  if (words >= high_min) return 2;
  return std::nullopt;
}

std::string Strata::label(std::size_t stratum) const {
  switch (stratum) {
    case 0: return "<=" + std::to_string(low_max);
    case 1: return std::to_string(low_max + 1) + "-" + std::to_string(mid_max);
    default: return ">=" + std::to_string(high_min);
  }
}

Strata parse_strata(const std::string& csv) {
  std::vector<std::int64_t> v;
  std::stringstream in(csv);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      v.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw InvalidArgument("bad strata bound '" + part + "'");
    }
  }
  if (v.size() != 3 || !(v[0] < v[1] && v[1] < v[2]))
    throw InvalidArgument("strata need three increasing bounds, e.g. 209,420,431");
  return {v[0], v[1], v[2]};
}

std::size_t ProbingDataset::emitted_count() const {
  std::size_t n = 0;
  for (const auto& s : splits) n += s.size();
  return n;
}

std::vector<std::size_t> ProbingDataset::class_counts(Split s) const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (const auto& ex : split(s))
    if (ex.label < counts.size()) ++counts[ex.label];
  return counts;
}

namespace {

using Pair = std::pair<MentionSpan, MentionSpan>;

Split split_of(const Corpus& corpus, const Document& doc) {
  auto it = corpus.split_assignment.find(doc.doc_id);
  if (it == corpus.split_assignment.end())
    throw MalformedInput("doc '" + doc.doc_id + "' has no split assignment");
  return it->second;
}

VectorRef token_ref(const Document& doc, const MentionSpan& span) {
  return {doc.doc_id, VectorRef::Kind::kToken, span.start_word};
}

bool available(const DocShape& shape, std::size_t word) {
  if (word >= shape.alignment.word_count()) return false;
  return first_token_row(shape.alignment, word).has_value();
}

std::vector<MentionSpan> distinct_spans(const Document& doc) {
  std::set<MentionSpan> spans;
  for (const auto& f : enumerate_role_fillers(doc)) spans.insert(f.span);
  return {spans.begin(), spans.end()};
}

ProbingDataset make_dataset(TaskId task, std::size_t n_classes, std::vector<std::string> names) {
  ProbingDataset ds;
  ds.task = task;
  ds.n_classes = n_classes;
  ds.class_names = std::move(names);
  return ds;
}

std::vector<std::string> binary_names() { return {"no", "yes"}; }

// A candidate example awaiting the balancing step.
struct Candidate {
  const Document* doc = nullptr;
  ProbingExample example;
};

// Keeps a uniform sample of `keep` candidates (in original order); the rest
// count as skipped.
std::vector<Candidate> down_sample(std::vector<Candidate> items, std::size_t keep, Rng& rng,
                                   ProbingDataset& ds) {
  if (items.size() <= keep) return items;
  std::vector<Candidate> out;
  for (auto i : sample_indices(items.size(), keep, rng)) out.push_back(std::move(items[i]));
  ds.skipped_count += items.size() - keep;
  return out;
}

// Interleaves per-document blocks so that output follows corpus order.
void emit_in_doc_order(const Corpus& corpus, std::vector<Candidate> positives,
                       std::vector<Candidate> negatives, std::vector<ProbingExample>& out) {
  std::map<const Document*, std::size_t> rank;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) rank[&corpus.documents[i]] = i;
  std::vector<std::pair<std::pair<std::size_t, int>, ProbingExample>> items;
  for (auto& c : positives) items.push_back({{rank[c.doc], 0}, std::move(c.example)});
  for (auto& c : negatives) items.push_back({{rank[c.doc], 1}, std::move(c.example)});
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [_, ex] : items) out.push_back(std::move(ex));
}

ProbingDataset build_document_count(TaskId task, const Corpus& corpus, const EmbeddingSource& bundle,
                                    std::size_t k, const Strata& strata,
                                    std::int64_t (*count_of)(const Document&)) {
  std::vector<std::int64_t> train_counts;
  for (const auto& doc : corpus.documents)
    if (split_of(corpus, doc) == Split::kTrain) train_counts.push_back(count_of(doc));
  if (train_counts.empty()) throw EmptySplit(task_name(task) + ": train split has no documents");

  BucketSpec spec = quantile_buckets(train_counts, k);
  ProbingDataset ds = make_dataset(task, spec.bucket_count(), {});
  for (std::size_t b = 0; b < spec.bucket_count(); ++b) ds.class_names.push_back(spec.label(b));
  if (spec.degenerate)
    ds.warnings.push_back("DegenerateDistribution: " + std::to_string(spec.bucket_count()) +
                          " distinct train counts, requested " + std::to_string(k) + " buckets");

  for (const auto& doc : corpus.documents) {
    ++ds.candidate_count;
    const DocShape shape = bundle.shape(doc.doc_id);
    if (shape.n_tokens == 0) {
      ++ds.dropped_count;
      continue;
    }
    const std::int64_t count = count_of(doc);
    const auto words = static_cast<std::int64_t>(doc.words.size());
    ProbingExample ex;
    ex.inputs.push_back({doc.doc_id, VectorRef::Kind::kDocument, 0});
    ex.label = spec.bucket_of(count);
    ex.meta["count"] = count;
    ex.meta["bucket"] = spec.label(ex.label);
    ex.meta["word_count"] = words;
    if (auto s = strata.stratum_of(words)) ex.meta["stratum"] = strata.label(*s);
    ds.split(split_of(corpus, doc)).push_back(std::move(ex));
  }
  ds.bucket_spec = std::move(spec);
  return ds;
}

// Shared tail of the pair tasks: balance each split 1:1 by down-sampling
// the larger side.
void balance_pairs(const Corpus& corpus, std::array<std::vector<Candidate>, 3> pos,
                   std::array<std::vector<Candidate>, 3> neg, Rng& rng, ProbingDataset& ds,
                   bool warn_short_negatives) {
  for (Split s : kAllSplits) {
    auto i = static_cast<std::size_t>(s);
    const std::size_t keep = std::min(pos[i].size(), neg[i].size());
    if (warn_short_negatives && neg[i].size() < pos[i].size())
      ds.warnings.push_back(std::string("InsufficientNegatives: ") + split_name(s) + " has " +
                            std::to_string(neg[i].size()) + " negatives for " +
                            std::to_string(pos[i].size()) + " positives; positives under-sampled");
    auto p = down_sample(std::move(pos[i]), keep, rng, ds);
    auto n = down_sample(std::move(neg[i]), keep, rng, ds);
    emit_in_doc_order(corpus, std::move(p), std::move(n), ds.split(s));
  }
}

Candidate pair_candidate(const Document& doc, const Pair& pair, std::size_t label) {
  Candidate c{&doc, {}};
  c.example.inputs = {token_ref(doc, pair.first), token_ref(doc, pair.second)};
  c.example.label = label;
  return c;
}

}  // namespace

ProbingDataset build_wordct(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t k,
                            const Strata& strata) {
  return build_document_count({TaskKind::kWordCt, 2}, corpus, bundle, k, strata,
                              [](const Document& d) { return static_cast<std::int64_t>(d.words.size()); });
}

ProbingDataset build_sentct(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t k,
                            const Strata& strata) {
  return build_document_count(
      {TaskKind::kSentCt, 2}, corpus, bundle, k, strata,
      [](const Document& d) { return static_cast<std::int64_t>(d.sentence_bounds.size()); });
}

ProbingDataset build_evntct(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t k,
                            const Strata& strata) {
  return build_document_count(
      {TaskKind::kEvntCt, 2}, corpus, bundle, k, strata,
      [](const Document& d) { return static_cast<std::int64_t>(d.templates.size()); });
}

ProbingDataset build_isarg(const Corpus& corpus, const EmbeddingSource& bundle, std::uint64_t seed) {
  ProbingDataset ds = make_dataset({TaskKind::kIsArg, 2}, 2, binary_names());
  ds.seed = seed;
  Rng rng(seed);

  struct DocPool {
    const Document* doc;
    std::vector<Candidate> positives;
    std::vector<Candidate> negatives;
  };
  std::array<std::vector<DocPool>, 3> pools;
  for (const auto& doc : corpus.documents) {
    const Split split = split_of(corpus, doc);
    const DocShape shape = bundle.shape(doc.doc_id);
    DocPool pool{&doc, {}, {}};
    std::vector<bool> covered(doc.words.size(), false);
    for (const auto& span : distinct_spans(doc)) {
      for (auto w = span.start_word; w < span.end_word; ++w) covered[w] = true;
      ++ds.candidate_count;
      if (!available(shape, span.start_word)) {
        ++ds.dropped_count;
        continue;
      }
      Candidate c{&doc, {}};
      c.example.inputs = {token_ref(doc, span)};
      c.example.label = 1;
      pool.positives.push_back(std::move(c));
    }
    for (std::size_t w = 0; w < doc.words.size(); ++w) {
      if (covered[w]) continue;
      ++ds.candidate_count;
      if (!available(shape, w)) {
        ++ds.dropped_count;
        continue;
      }
      Candidate c{&doc, {}};
      c.example.inputs = {{doc.doc_id, VectorRef::Kind::kToken, w}};
      c.example.label = 0;
      pool.negatives.push_back(std::move(c));
    }
    pools[static_cast<std::size_t>(split)].push_back(std::move(pool));
  }

  for (Split s : kAllSplits) {
    std::vector<Candidate> positives, negatives, leftovers;
    std::size_t deficit = 0;
    // One negative per positive from the same document where possible.
    for (auto& pool : pools[static_cast<std::size_t>(s)]) {
      const std::size_t quota = pool.positives.size();
      const std::size_t take = std::min(quota, pool.negatives.size());
      deficit += quota - take;
      auto picked = sample_indices(pool.negatives.size(), take, rng);
      std::vector<bool> chosen(pool.negatives.size(), false);
      for (auto i : picked) chosen[i] = true;
      for (std::size_t i = 0; i < pool.negatives.size(); ++i)
        (chosen[i] ? negatives : leftovers).push_back(std::move(pool.negatives[i]));
      for (auto& p : pool.positives) positives.push_back(std::move(p));
    }
    // Shortfalls are covered from other documents of the same split.
    if (deficit > 0) {
      const std::size_t extra = std::min(deficit, leftovers.size());
      auto picked = sample_indices(leftovers.size(), extra, rng);
      for (auto i : picked) negatives.push_back(std::move(leftovers[i]));
      ds.skipped_count += leftovers.size() - extra;
      deficit -= extra;
    } else {
      ds.skipped_count += leftovers.size();
    }
    if (deficit > 0) {
      ds.warnings.push_back(std::string("InsufficientNegatives: ") + split_name(s) + " short by " +
                            std::to_string(deficit) + " negatives; positives under-sampled");
      positives = down_sample(std::move(positives), negatives.size(), rng, ds);
    }
    emit_in_doc_order(corpus, std::move(positives), std::move(negatives), ds.split(s));
  }
  return ds;
}

ProbingDataset build_argtyp(const Corpus& corpus, const EmbeddingSource& bundle) {
  ProbingDataset ds = make_dataset({TaskKind::kArgTyp, 2}, corpus.schema.roles.size(), corpus.schema.roles);
  for (const auto& doc : corpus.documents) {
    const Split split = split_of(corpus, doc);
    const DocShape shape = bundle.shape(doc.doc_id);
    std::set<std::pair<MentionSpan, std::string>> seen;
    for (const auto& f : enumerate_role_fillers(doc)) {
      if (!seen.insert({f.span, f.role}).second) continue;
      ++ds.candidate_count;
      if (!available(shape, f.span.start_word)) {
        ++ds.dropped_count;
        continue;
      }
      ProbingExample ex;
      ex.inputs = {token_ref(doc, f.span)};
      ex.label = *corpus.schema.role_index(f.role);
      ex.meta["role"] = f.role;
      ds.split(split).push_back(std::move(ex));
    }
  }
  std::size_t present = 0;
  for (auto c : ds.class_counts(Split::kTrain)) present += c > 0 ? 1 : 0;
  if (present < 2)
    ds.warnings.push_back("train split has " + std::to_string(present) + " role class(es); need 2");
  return ds;
}

ProbingDataset build_coref(const Corpus& corpus, const EmbeddingSource& bundle, std::uint64_t seed) {
  ProbingDataset ds = make_dataset({TaskKind::kCoref, 2}, 2, binary_names());
  ds.seed = seed;
  Rng rng(seed);
  std::array<std::vector<Candidate>, 3> pos, neg;
  bool any_chain = false;
  for (const auto& doc : corpus.documents) {
    const auto idx = static_cast<std::size_t>(split_of(corpus, doc));
    const auto chains = coref_chains(doc);
    std::set<Pair> positives;
    std::set<MentionSpan> spans;
    for (const auto& chain : chains) {
      any_chain = any_chain || chain.size() >= 2;
      for (std::size_t a = 0; a < chain.size(); ++a) {
        spans.insert(chain[a]);
        for (std::size_t b = a + 1; b < chain.size(); ++b) positives.insert({chain[a], chain[b]});
      }
    }
    std::vector<MentionSpan> all(spans.begin(), spans.end());
    std::vector<Pair> negatives;
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t b = a + 1; b < all.size(); ++b)
        if (!positives.count({all[a], all[b]})) negatives.emplace_back(all[a], all[b]);

    const DocShape shape = bundle.shape(doc.doc_id);
    auto take = [&](const Pair& p, std::size_t label, std::vector<Candidate>& out) {
      ++ds.candidate_count;
      if (!available(shape, p.first.start_word) || !available(shape, p.second.start_word)) {
        ++ds.dropped_count;
        return;
      }
      out.push_back(pair_candidate(doc, p, label));
    };
    for (const auto& p : positives) take(p, 1, pos[idx]);
    for (const auto& p : negatives) take(p, 0, neg[idx]);
  }
  if (!any_chain) ds.warnings.push_back("no entity has two or more mentions");
  balance_pairs(corpus, std::move(pos), std::move(neg), rng, ds, true);
  return ds;
}

ProbingDataset build_coevnt(const Corpus& corpus, const EmbeddingSource& bundle, std::uint64_t seed) {
  ProbingDataset ds = make_dataset({TaskKind::kCoEvnt, 2}, 2, binary_names());
  ds.seed = seed;
  Rng rng(seed);
  const bool multi = std::any_of(corpus.documents.begin(), corpus.documents.end(),
                                 [](const Document& d) { return d.templates.size() >= 2; });
  std::array<std::vector<Candidate>, 3> pos, neg;
  for (const auto& doc : corpus.documents) {
    const auto idx = static_cast<std::size_t>(split_of(corpus, doc));
    std::vector<std::set<MentionSpan>> per_template(doc.templates.size());
    for (const auto& f : enumerate_role_fillers(doc)) per_template[f.template_index].insert(f.span);

    std::set<Pair> positives;
    for (const auto& spans : per_template) {
      std::vector<MentionSpan> v(spans.begin(), spans.end());
      for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = a + 1; b < v.size(); ++b) positives.insert({v[a], v[b]});
    }
    // Coreferent pairs are neither clearly same-event nor cross-event.
    std::set<Pair> same_entity;
    for (const auto& chain : coref_chains(doc))
      for (std::size_t a = 0; a < chain.size(); ++a)
        for (std::size_t b = a + 1; b < chain.size(); ++b) same_entity.insert({chain[a], chain[b]});

    std::set<Pair> negatives;
    for (std::size_t i = 0; i < per_template.size(); ++i)
      for (std::size_t j = i + 1; j < per_template.size(); ++j)
        for (const auto& a : per_template[i])
          for (const auto& b : per_template[j]) {
            if (a == b) continue;
            Pair p = a < b ? Pair{a, b} : Pair{b, a};
            if (!positives.count(p) && !same_entity.count(p)) negatives.insert(std::move(p));
          }

    const DocShape shape = bundle.shape(doc.doc_id);
    auto take = [&](const Pair& p, std::size_t label, std::vector<Candidate>& out) {
      ++ds.candidate_count;
      if (!available(shape, p.first.start_word) || !available(shape, p.second.start_word)) {
        ++ds.dropped_count;
        return;
      }
      out.push_back(pair_candidate(doc, p, label));
    };
    for (const auto& p : positives) take(p, 1, pos[idx]);
    for (const auto& p : negatives) take(p, 0, neg[idx]);
  }
  if (!multi) {
    ds.warnings.push_back("NoMultiTemplateDocs: no document has two or more templates");
    for (std::size_t i = 0; i < 3; ++i) ds.skipped_count += pos[i].size() + neg[i].size();
    return ds;
  }
  balance_pairs(corpus, std::move(pos), std::move(neg), rng, ds, false);
  return ds;
}

ProbingDataset build_evnttyp(const Corpus& corpus, const EmbeddingSource& bundle, std::size_t n) {
  if (n < 1) throw InvalidArgument("EvntTyp needs n >= 1");
  ProbingDataset ds = make_dataset({TaskKind::kEvntTyp, n}, corpus.schema.incident_types.size(),
                                   corpus.schema.incident_types);
  for (const auto& doc : corpus.documents) {
    const Split split = split_of(corpus, doc);
    const DocShape shape = bundle.shape(doc.doc_id);
    std::vector<std::vector<MentionSpan>> fillers(doc.templates.size());
    for (const auto& f : enumerate_role_fillers(doc)) {
      auto& v = fillers[f.template_index];
      if (std::find(v.begin(), v.end(), f.span) == v.end()) v.push_back(f.span);
    }
    for (std::size_t t = 0; t < doc.templates.size(); ++t) {
      ++ds.candidate_count;
      if (fillers[t].size() < n) {
        ++ds.skipped_count;
        continue;
      }
      ProbingExample ex;
      bool ok = true;
      for (std::size_t i = 0; i < n; ++i) {
        ok = ok && available(shape, fillers[t][i].start_word);
        ex.inputs.push_back(token_ref(doc, fillers[t][i]));
      }
      if (!ok) {
        ++ds.dropped_count;
        continue;
      }
      ex.label = doc.templates[t].incident_type;
      ex.meta["template"] = t;
      ds.split(split).push_back(std::move(ex));
    }
  }
  return ds;
}

ProbingDataset build_task(const TaskId& task, const Corpus& corpus, const EmbeddingSource& bundle,
                          const BuildOptions& options) {
  ProbingDataset ds;
  switch (task.kind) {
    case TaskKind::kWordCt: ds = build_wordct(corpus, bundle, options.count_buckets, options.strata); break;
    case TaskKind::kSentCt: ds = build_sentct(corpus, bundle, options.count_buckets, options.strata); break;
    case TaskKind::kIsArg: ds = build_isarg(corpus, bundle, options.seed); break;
    case TaskKind::kArgTyp: ds = build_argtyp(corpus, bundle); break;
    case TaskKind::kCoref: ds = build_coref(corpus, bundle, options.seed); break;
    case TaskKind::kCoEvnt: ds = build_coevnt(corpus, bundle, options.seed); break;
    case TaskKind::kEvntTyp: ds = build_evnttyp(corpus, bundle, task.n); break;
    case TaskKind::kEvntCt: ds = build_evntct(corpus, bundle, options.event_buckets, options.strata); break;
  }
  ds.seed = options.seed;
  return ds;
}

std::string example_to_jsonl(const ProbingExample& example) {
  json inputs = json::array();
  for (const auto& ref : example.inputs) {
    json r;
    r["doc"] = ref.doc_id;
    if (ref.kind == VectorRef::Kind::kToken) {
      r["kind"] = "token";
      r["word"] = ref.word;
    } else {
      r["kind"] = "doc";
    }
    inputs.push_back(std::move(r));
  }
  json j;
  j["inputs"] = std::move(inputs);
  j["label"] = example.label;
  j["meta"] = example.meta;
  return j.dump();
}

void write_dataset(const ProbingDataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IOFailure("cannot create " + dir.string() + ": " + ec.message());
  for (Split s : kAllSplits) {
    const auto path = dir / (std::string(split_name(s)) + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOFailure("cannot write " + path.string());
    for (const auto& ex : dataset.split(s)) out << example_to_jsonl(ex) << '\n';
    if (!out) throw IOFailure("write failed for " + path.string());
  }
  json m;
  m["task"] = task_name(dataset.task);
  m["n_classes"] = dataset.n_classes;
  m["class_names"] = dataset.class_names;
  m["seed"] = dataset.seed;
  m["candidates"] = dataset.candidate_count;
  m["dropped"] = dataset.dropped_count;
  m["skipped"] = dataset.skipped_count;
  m["warnings"] = dataset.warnings;
  if (dataset.bucket_spec) {
    m["bucket_boundaries"] = dataset.bucket_spec->boundaries;
    m["bucket_requested_k"] = dataset.bucket_spec->requested_k;
    m["bucket_degenerate"] = dataset.bucket_spec->degenerate;
  } else {
    m["bucket_boundaries"] = nullptr;
  }
  json counts;
  for (Split s : kAllSplits) counts[split_name(s)] = dataset.class_counts(s);
  m["class_counts"] = std::move(counts);
  const auto path = dir / "dataset.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOFailure("cannot write " + path.string());
  out << m.dump(2) << '\n';
}

ProbingDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json", std::ios::binary);
  if (!in) throw IOFailure("cannot open " + (dir / "dataset.json").string());
  ProbingDataset ds;
  try {
    const json m = json::parse(in);
    ds.task = parse_task(m.at("task").get<std::string>());
    ds.n_classes = m.at("n_classes").get<std::size_t>();
    ds.class_names = m.at("class_names").get<std::vector<std::string>>();
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.candidate_count = m.at("candidates").get<std::size_t>();
    ds.dropped_count = m.at("dropped").get<std::size_t>();
    ds.skipped_count = m.at("skipped").get<std::size_t>();
    ds.warnings = m.at("warnings").get<std::vector<std::string>>();
    if (!m.at("bucket_boundaries").is_null()) {
      BucketSpec spec;
      spec.boundaries = m.at("bucket_boundaries").get<std::vector<std::int64_t>>();
      spec.requested_k = m.value("bucket_requested_k", spec.boundaries.size() + 1);
      spec.degenerate = m.value("bucket_degenerate", false);
      ds.bucket_spec = std::move(spec);
    }
  } catch (const json::exception& e) {
    throw MalformedInput((dir / "dataset.json").string() + ": " + e.what());
  }

  for (Split s : kAllSplits) {
    const auto path = dir / (std::string(split_name(s)) + ".jsonl");
    std::ifstream lines(path, std::ios::binary);
    if (!lines) throw IOFailure("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        ProbingExample ex;
        for (const auto& r : j.at("inputs")) {
          VectorRef ref;
          ref.doc_id = r.at("doc").get<std::string>();
          const auto kind = r.at("kind").get<std::string>();
          if (kind == "token") {
            ref.kind = VectorRef::Kind::kToken;
            ref.word = r.at("word").get<std::size_t>();
          } else if (kind == "doc") {
            ref.kind = VectorRef::Kind::kDocument;
          } else {
            throw MalformedInput("unknown input kind '" + kind + "'");
          }
          ex.inputs.push_back(std::move(ref));
        }
        ex.label = j.at("label").get<std::size_t>();
        if (ex.label >= ds.n_classes) throw MalformedInput("label out of range");
        ex.meta = j.value("meta", json::object());
        ds.split(s).push_back(std::move(ex));
      } catch (const json::exception& e) {
        throw MalformedInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      } catch (const MalformedInput& e) {
        throw MalformedInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  return ds;
}

}  // namespace docprobe

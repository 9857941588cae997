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

// Hand-built corpora and in-memory bundles shared by the unit and
// acceptance tests.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "docprobe/corpus.hpp"
#include "docprobe/embedstore.hpp"
#include "docprobe/random.hpp"

namespace docprobe::fixtures {

inline std::string join(const std::vector<std::string>& words, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += words[i];
  }
  return out;
}

inline Document make_document(const std::string& id, std::size_t n_words, std::size_t sentence_len = 10) {
  Document d;
  d.doc_id = id;
  for (std::size_t i = 0; i < n_words; ++i) d.words.push_back(id + "w" + std::to_string(i));
  for (std::size_t b = 0; b < n_words; b += sentence_len) d.sentence_bounds.emplace_back(b, std::min(n_words, b + sentence_len));
  return d;
}

inline MentionSpan span(const Document& d, std::size_t b, std::size_t e) { return {b, e, join(d.words, b, e)}; }

inline Entity entity(const Document& d, std::vector<std::pair<std::size_t, std::size_t>> spans) {
  Entity e;
  for (auto [b, end] : spans) e.mentions.push_back(span(d, b, end));
  return e;
}

inline std::size_t incident(const std::string& name) { return *muc_schema().incident_index(name); }

inline Corpus make_corpus(std::vector<Document> docs, const std::vector<Split>& splits) {
  Corpus c;
  c.schema = muc_schema();
  for (std::size_t i = 0; i < docs.size(); ++i) c.split_assignment[docs[i].doc_id] = splits[i];
  c.documents = std::move(docs);
  validate(c);
  return c;
}

inline BundleManifest make_manifest(std::uint32_t dim, std::vector<std::uint32_t> layers, std::uint32_t max_tokens = 512,
                                    EmbeddingMode mode = EmbeddingMode::kFullText) {
  BundleManifest m;
  m.encoder_name = "synthetic";
  m.mode = mode;
  m.hidden_dim = dim;
  m.layer_ids = std::move(layers);
  m.max_tokens = max_tokens;
  return m;
}

// Fills the row for one word (or a delimiter when word is npos).
using RowFn = std::function<void(const Document&, std::uint32_t layer, std::size_t word, Eigen::Ref<Eigen::RowVectorXf>)>;

// One leading delimiter token, one token per word, one trailing delimiter,
// cut to the manifest's max_tokens.
inline DocEmbedding word_aligned(const Document& doc, const BundleManifest& m, const RowFn& fill) {
  const std::size_t n_words = doc.words.size();
  const std::size_t n_tokens = n_words + 2;
  std::vector<std::uint32_t> offsets;
  for (std::size_t i = 0; i <= n_words; ++i) offsets.push_back(static_cast<std::uint32_t>(i + 1));
  DocEmbedding e;
  e.doc_id = doc.doc_id;
  e.layer_ids = m.layer_ids;
  for (auto layer : m.layer_ids) {
    TokenMatrix rows(static_cast<Eigen::Index>(n_tokens), m.hidden_dim);
    for (std::size_t t = 0; t < n_tokens; ++t) {
      std::size_t word = t == 0 || t == n_tokens - 1 ? std::string::npos : t - 1;
      Eigen::RowVectorXf row = Eigen::RowVectorXf::Zero(m.hidden_dim);
      fill(doc, layer, word, row);
      rows.row(static_cast<Eigen::Index>(t)) = row;
    }
    e.layers.push_back(std::move(rows));
  }
  e.alignment = AlignmentMap(std::move(offsets), static_cast<std::uint32_t>(n_tokens));
  return truncate(e, m.max_tokens);
}

inline std::unique_ptr<InMemoryBundle> make_bundle(const Corpus& corpus, const BundleManifest& m, const RowFn& fill) {
  auto b = std::make_unique<InMemoryBundle>(m);
  for (const auto& doc : corpus.documents) b->add(word_aligned(doc, m, fill));
  return b;
}

inline RowFn gaussian_rows(std::uint64_t seed) {
  return [seed](const Document& doc, std::uint32_t layer, std::size_t word, Eigen::Ref<Eigen::RowVectorXf> row) {
    std::uint64_t h = seed;
    for (char c : doc.doc_id) h = h * 1099511628211ULL + static_cast<unsigned char>(c);
    Rng rng(h ^ (std::uint64_t{layer} << 32) ^ (word * 0x9e3779b97f4a7c15ULL));
    for (Eigen::Index i = 0; i < row.size(); ++i) row[i] = static_cast<float>(standard_normal(rng));
  };
}

// Random MUC-style corpus: every document has a few templates whose
// fillers are disjoint multi-word spans, some entities with two mentions.
inline Corpus synthetic_corpus(std::size_t n_train, std::size_t n_dev, std::size_t n_test, std::uint64_t seed,
                               std::size_t min_words = 20, std::size_t max_words = 40) {
  Rng rng(seed);
  const auto& schema = muc_schema();
  std::vector<Document> docs;
  std::vector<Split> splits;
  const std::size_t total = n_train + n_dev + n_test;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t n_words = min_words + uniform_below(rng, max_words - min_words + 1);
    Document d = make_document("d" + std::to_string(i), n_words, 4 + uniform_below(rng, 8));
    // Disjoint slots of 3 words; each filler takes the first 1 or 2 words of a slot.
    std::vector<std::size_t> slots;
    for (std::size_t s = 0; s + 3 <= n_words; s += 3) slots.push_back(s);
    shuffle(std::span<std::size_t>(slots), rng);
    std::size_t next = 0;
    auto take = [&]() -> std::optional<std::pair<std::size_t, std::size_t>> {
      if (next >= slots.size()) return std::nullopt;
      std::size_t s = slots[next++];
      return std::make_pair(s, s + 1 + uniform_below(rng, 2));
    };
    const std::size_t n_templates = uniform_below(rng, 4);
    for (std::size_t t = 0; t < n_templates; ++t) {
      Template tmpl;
      tmpl.incident_type = uniform_below(rng, schema.incident_types.size());
      const std::size_t n_roles = 1 + uniform_below(rng, 3);
      for (std::size_t r = 0; r < n_roles; ++r) {
        const std::string& role = schema.roles[uniform_below(rng, schema.roles.size())];
        auto first = take();
        if (!first) break;
        std::vector<std::pair<std::size_t, std::size_t>> mentions{*first};
        if (uniform_below(rng, 2) == 0)
          if (auto second = take()) mentions.push_back(*second);
        tmpl.roles[role].push_back(entity(d, mentions));
      }
      if (!tmpl.roles.empty()) d.templates.push_back(std::move(tmpl));
    }
    docs.push_back(std::move(d));
    splits.push_back(i < n_train ? Split::kTrain : i < n_train + n_dev ? Split::kDev : Split::kTest);
  }
  return make_corpus(std::move(docs), splits);
}

// Eight documents covering the builder edge cases: an entity shared by two
// templates, fillers past a 30-token cut (doc t1), a template-free doc,
// overlapping spans (s0), a one-filler template (s1) and one span filling
// two roles (s2).
inline Corpus builder_fixture() {
  using R = std::vector<std::pair<std::size_t, std::size_t>>;
  auto tmpl = [](const Document& d, const char* type, std::vector<std::pair<std::string, R>> roles) {
    Template t;
    t.incident_type = incident(type);
    for (auto& [role, spans] : roles) t.roles[role].push_back(entity(d, spans));
    return t;
  };
  Document t0 = make_document("t0", 25);
  t0.templates = {tmpl(t0, "attack", {{"PerpInd", {{1, 2}, {10, 11}}}, {"Target", {{4, 6}}}}),
                  tmpl(t0, "bombing", {{"Victim", {{14, 15}}}, {"Weapon", {{18, 20}}}, {"PerpInd", {{1, 2}, {10, 11}}}})};
  Document t1 = make_document("t1", 40);
  t1.templates = {tmpl(t1, "kidnapping", {{"Victim", {{2, 3}, {33, 35}}}, {"Target", {{31, 32}}}}),
                  tmpl(t1, "robbery", {{"PerpOrg", {{5, 7}}}, {"Weapon", {{36, 37}}}})};
  Document t2 = make_document("t2", 12);
  Document v0 = make_document("v0", 15);
  v0.templates = {tmpl(v0, "arson", {{"Target", {{0, 2}}}, {"PerpInd", {{5, 6}}}, {"Victim", {{8, 9}, {11, 12}}}}),
                  tmpl(v0, "attack", {{"Target", {{3, 4}}}})};
  Document v1 = make_document("v1", 20);
  v1.templates = {tmpl(v1, "attack", {{"Victim", {{2, 3}}}, {"PerpOrg", {{6, 8}}}})};
  Document s0 = make_document("s0", 18);
  s0.templates = {tmpl(s0, "bombing", {{"Target", {{2, 5}}}, {"Victim", {{3, 4}}}, {"Weapon", {{9, 10}}}}),
                  tmpl(s0, "attack", {{"PerpInd", {{12, 13}, {15, 16}}}, {"Victim", {{3, 4}}}})};
  Document s1 = make_document("s1", 10);
  s1.templates = {tmpl(s1, "forced work stoppage", {{"PerpOrg", {{0, 1}}}})};
  Document s2 = make_document("s2", 22);
  s2.templates = {tmpl(s2, "attack", {{"Victim", {{1, 2}}}, {"Target", {{1, 2}}}}),
                  tmpl(s2, "bombing", {{"Weapon", {{7, 8}}}, {"Target", {{10, 12}}}})};
  return make_corpus({t0, t1, t2, v0, v1, s0, s1, s2},
                     {Split::kTrain, Split::kTrain, Split::kTrain, Split::kDev, Split::kDev, Split::kTest, Split::kTest,
                      Split::kTest});
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("docprobe-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace docprobe::fixtures

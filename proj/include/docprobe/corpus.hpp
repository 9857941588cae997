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
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace docprobe {

enum class Split { kTrain = 0, kDev = 1, kTest = 2 };

inline constexpr std::array<Split, 3> kAllSplits{Split::kTrain, Split::kDev, Split::kTest};

const char* split_name(Split split);
Split parse_split(const std::string& name);

// Half-open word interval [start_word, end_word).
struct MentionSpan {
  std::size_t start_word = 0;
  std::size_t end_word = 0;
  std::string surface;

  friend bool operator==(const MentionSpan& a, const MentionSpan& b) {
    return a.start_word == b.start_word && a.end_word == b.end_word;
  }
  friend std::strong_ordering operator<=>(const MentionSpan& a, const MentionSpan& b) {
    if (auto c = a.start_word <=> b.start_word; c != 0) return c;
    return a.end_word <=> b.end_word;
  }
};

// One role filler: the coreferent mentions of a single entity.
struct Entity {
  std::vector<MentionSpan> mentions;
};

struct Template {
  std::size_t incident_type = 0;                 // index into Schema::incident_types
  std::map<std::string, std::vector<Entity>> roles;  // role name -> fillers
};

// Closed label sets for a corpus. MUC fixes both lists; WikiEvents-style
// corpora collect them from the data.
struct Schema {
  std::vector<std::string> incident_types;
  std::vector<std::string> roles;

  std::optional<std::size_t> incident_index(const std::string& name) const;
  std::optional<std::size_t> role_index(const std::string& name) const;
};

const Schema& muc_schema();

struct Document {
  std::string doc_id;
  std::vector<std::string> words;
  std::vector<std::pair<std::size_t, std::size_t>> sentence_bounds;
  std::vector<Template> templates;
};

struct ParseStats {
  std::size_t duplicate_templates = 0;
  std::size_t empty_templates = 0;
  std::size_t surface_mismatches = 0;
  std::size_t duplicate_mentions = 0;
};

struct Corpus {
  Schema schema;
  std::vector<Document> documents;
  std::map<std::string, Split> split_assignment;
  ParseStats stats;

  const Document* find(const std::string& doc_id) const;
  std::vector<const Document*> documents_in(Split split) const;
};

enum class CorpusFormat { kMucJson, kWikiEventsJson };

CorpusFormat parse_corpus_format(const std::string& name);

// Reads a corpus from a JSON array / JSON-lines file, or from a directory
// holding train/dev/test files (which fixes the split assignment).
Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format);

// Parses corpus text that has already been read into memory.
Corpus parse_corpus_text(const std::string& text, CorpusFormat format);

// Writes the muc-json layout, including explicit sentence bounds.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

// Checks every structural invariant; throws MalformedInput on violation.
void validate(const Corpus& corpus);

std::vector<std::string> split_words(const std::string& text);
std::vector<std::pair<std::size_t, std::size_t>> derive_sentence_bounds(
    const std::vector<std::string>& words);

struct RoleFiller {
  MentionSpan span;
  std::string role;
  std::size_t template_index = 0;
  std::size_t entity_index = 0;  // position within the role's entity list
};

// One entry per (mention, role, template) occurrence, ordered by template
// index, role name, then span.
std::vector<RoleFiller> enumerate_role_fillers(const Document& doc);

// One chain per entity; entities with identical mention sets are merged.
// Each chain is sorted by span.
std::vector<std::vector<MentionSpan>> coref_chains(const Document& doc);

struct SplitRatios {
  double train = 13.0 / 17.0;
  double dev = 2.0 / 17.0;
  double test = 2.0 / 17.0;
};

Corpus split_documents(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace docprobe

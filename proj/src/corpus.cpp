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

#include "docprobe/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "docprobe/errors.hpp"
#include "docprobe/random.hpp"
#include "json.hpp"

namespace docprobe {

using nlohmann::json;

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw InvalidArgument("unknown split '" + name + "'");
}

std::optional<std::size_t> Schema::incident_index(const std::string& name) const {
  for (std::size_t i = 0; i < incident_types.size(); ++i)
    if (incident_types[i] == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> Schema::role_index(const std::string& name) const {
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == name) return i;
  return std::nullopt;
}

const Schema& muc_schema() {
  static const Schema schema{
      {"kidnapping", "attack", "bombing", "robbery", "forced work stoppage", "arson"},
      {"PerpInd", "PerpOrg", "Target", "Victim", "Weapon"}};
  return schema;
}

const Document* Corpus::find(const std::string& doc_id) const {
  for (const auto& doc : documents)
    if (doc.doc_id == doc_id) return &doc;
  return nullptr;
}

std::vector<const Document*> Corpus::documents_in(Split split) const {
  std::vector<const Document*> out;
  for (const auto& doc : documents) {
    auto it = split_assignment.find(doc.doc_id);
    if (it != split_assignment.end() && it->second == split) out.push_back(&doc);
  }
  return out;
}

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "muc-json") return CorpusFormat::kMucJson;
  if (name == "wikievents-json") return CorpusFormat::kWikiEventsJson;
  throw InvalidArgument("unknown corpus format '" + name + "'");
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

std::vector<std::pair<std::size_t, std::size_t>> derive_sentence_bounds(
    const std::vector<std::string>& words) {
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  std::size_t start = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const char last = words[i].back();
    if (last == '.' || last == '!' || last == '?') {
      bounds.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  if (start < words.size()) bounds.emplace_back(start, words.size());
  return bounds;
}

namespace {

std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i];
  }
  return out;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Template as it comes off the wire, before the schema is fixed.
struct RawTemplate {
  std::string incident_type;
  std::map<std::string, std::vector<Entity>> roles;
};

struct RawDocument {
  Document doc;
  std::vector<RawTemplate> templates;
};

// Resolves gold mention strings of one document to word spans.
class MentionResolver {
 public:
  MentionResolver(const Document& doc, ParseStats& stats) : doc_(doc), stats_(stats) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < doc.words.size(); ++i) {
      if (i > 0) {
        text_ += ' ';
        ++pos;
      }
      word_begin_.push_back(pos);
      text_ += doc.words[i];
      pos += doc.words[i].size();
    }
    lower_text_ = lowercase(text_);
  }

  // First occurrence whose start is not already claimed by the entity.
  MentionSpan resolve(const std::string& mention, const std::set<std::size_t>& claimed,
                      const std::string& field) {
    const auto mwords = split_words(mention);
    if (mwords.empty())
      throw MalformedInput("doc '" + doc_.doc_id + "': " + field + ": empty mention string");

    std::vector<MentionSpan> hits;
    const std::size_t len = mwords.size();
    for (std::size_t i = 0; i + len <= doc_.words.size(); ++i) {
      if (std::equal(mwords.begin(), mwords.end(), doc_.words.begin() + static_cast<long>(i)))
        hits.push_back({i, i + len, join_words(doc_.words, i, i + len)});
    }
    bool exact = !hits.empty();
    if (!exact) hits = fuzzy_hits(lowercase(join_words(mwords, 0, len)));
    if (hits.empty())
      throw OffsetResolutionError("doc '" + doc_.doc_id + "': " + field + ": mention '" +
                                  mention + "' not found in document text");
    if (!exact) ++stats_.surface_mismatches;
    for (const auto& h : hits)
      if (!claimed.count(h.start_word)) return h;
    return hits.front();
  }

 private:
  // Case-insensitive character match aligned to word-internal boundaries,
  // widened to the covering words.
  std::vector<MentionSpan> fuzzy_hits(const std::string& needle) const {
    std::vector<MentionSpan> hits;
    for (std::size_t at = lower_text_.find(needle); at != std::string::npos;
         at = lower_text_.find(needle, at + 1)) {
      const std::size_t stop = at + needle.size();
      if (at > 0 && is_word_char(lower_text_[at - 1]) && is_word_char(lower_text_[at])) continue;
      if (stop < lower_text_.size() && is_word_char(lower_text_[stop]) &&
          is_word_char(lower_text_[stop - 1]))
        continue;
      auto first = std::upper_bound(word_begin_.begin(), word_begin_.end(), at) - 1;
      auto last = std::upper_bound(word_begin_.begin(), word_begin_.end(), stop - 1) - 1;
      const auto b = static_cast<std::size_t>(first - word_begin_.begin());
      const auto e = static_cast<std::size_t>(last - word_begin_.begin()) + 1;
      MentionSpan span{b, e, join_words(doc_.words, b, e)};
      if (hits.empty() || !(hits.back() == span)) hits.push_back(std::move(span));
    }
    return hits;
  }

  const Document& doc_;
  ParseStats& stats_;
  std::string text_;
  std::string lower_text_;
  std::vector<std::size_t> word_begin_;
};

std::string field_path(std::size_t t, const std::string& role, std::size_t e) {
  return "templates[" + std::to_string(t) + "]." + role + "[" + std::to_string(e) + "]";
}

Entity dedupe_entity(Entity entity, ParseStats& stats) {
  Entity out;
  for (auto& m : entity.mentions) {
    if (std::find(out.mentions.begin(), out.mentions.end(), m) != out.mentions.end()) {
      ++stats.duplicate_mentions;
      continue;
    }
    out.mentions.push_back(std::move(m));
  }
  return out;
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedInput(where + ": missing field '" + key + "'");
  return *it;
}

std::vector<std::pair<std::size_t, std::size_t>> read_sentence_bounds(const json& j,
                                                                      const std::string& where) {
  if (!j.is_array()) throw MalformedInput(where + ".sentences: expected array");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& b = j[i];
    if (!b.is_array() || b.size() != 2 || !b[0].is_number_unsigned() || !b[1].is_number_unsigned())
      throw MalformedInput(where + ".sentences[" + std::to_string(i) +
                           "]: expected [start, end) pair of word indices");
    out.emplace_back(b[0].get<std::size_t>(), b[1].get<std::size_t>());
  }
  return out;
}

RawDocument read_muc_document(const json& j, ParseStats& stats) {
  if (!j.is_object()) throw MalformedInput("top-level entry is not an object");
  const auto& id = require(j, "docid", "document");
  if (!id.is_string()) throw MalformedInput("document: 'docid' must be a string");
  RawDocument raw;
  raw.doc.doc_id = id.get<std::string>();
  const std::string where = "doc '" + raw.doc.doc_id + "'";

  const auto& text = require(j, "doctext", where);
  if (!text.is_string()) throw MalformedInput(where + ".doctext: expected string");
  raw.doc.words = split_words(text.get<std::string>());

  if (auto it = j.find("sentences"); it != j.end())
    raw.doc.sentence_bounds = read_sentence_bounds(*it, where);
  else
    raw.doc.sentence_bounds = derive_sentence_bounds(raw.doc.words);

  const auto& templates = require(j, "templates", where);
  if (!templates.is_array()) throw MalformedInput(where + ".templates: expected array");

  MentionResolver resolver(raw.doc, stats);
  for (std::size_t t = 0; t < templates.size(); ++t) {
    const auto& tj = templates[t];
    const std::string twhere = where + ".templates[" + std::to_string(t) + "]";
    if (!tj.is_object()) throw MalformedInput(twhere + ": expected object");
    const auto& incident = require(tj, "incident_type", twhere);
    if (!incident.is_string()) throw MalformedInput(twhere + ".incident_type: expected string");
    RawTemplate tmpl;
    tmpl.incident_type = incident.get<std::string>();
    for (auto it = tj.begin(); it != tj.end(); ++it) {
      if (it.key() == "incident_type") continue;
      const std::string rwhere = twhere + "." + it.key();
      if (!it.value().is_array()) throw MalformedInput(rwhere + ": expected array of entities");
      std::vector<Entity> entities;
      for (std::size_t e = 0; e < it.value().size(); ++e) {
        const auto& ej = it.value()[e];
        const std::string field = field_path(t, it.key(), e);
        if (!ej.is_array() || ej.empty())
          throw MalformedInput(where + "." + field + ": expected non-empty array of mention strings");
        Entity entity;
        std::set<std::size_t> claimed;
        for (const auto& mj : ej) {
          if (!mj.is_string())
            throw MalformedInput(where + "." + field + ": mention must be a string");
          auto span = resolver.resolve(mj.get<std::string>(), claimed, field);
          claimed.insert(span.start_word);
          entity.mentions.push_back(std::move(span));
        }
        entities.push_back(dedupe_entity(std::move(entity), stats));
      }
      if (!entities.empty()) tmpl.roles.emplace(it.key(), std::move(entities));
    }
    raw.templates.push_back(std::move(tmpl));
  }
  return raw;
}

// WikiEvents layout: tokens, sentences, entity_mentions, event_mentions and
// optional coreference clusters of mention ids.
RawDocument read_wikievents_document(const json& j, ParseStats& stats) {
  if (!j.is_object()) throw MalformedInput("top-level entry is not an object");
  const auto& id = require(j, "doc_id", "document");
  if (!id.is_string()) throw MalformedInput("document: 'doc_id' must be a string");
  RawDocument raw;
  raw.doc.doc_id = id.get<std::string>();
  const std::string where = "doc '" + raw.doc.doc_id + "'";

  const auto& tokens = require(j, "tokens", where);
  if (!tokens.is_array()) throw MalformedInput(where + ".tokens: expected array");
  for (const auto& t : tokens) {
    if (!t.is_string()) throw MalformedInput(where + ".tokens: expected strings");
    auto parts = split_words(t.get<std::string>());
    // Whitespace-only tokens would break word indexing; keep a placeholder.
    raw.doc.words.push_back(parts.empty() ? std::string("_") : t.get<std::string>());
  }

  if (auto it = j.find("sentences"); it != j.end() && it->is_array()) {
    std::size_t start = 0;
    for (std::size_t s = 0; s < it->size(); ++s) {
      const auto& sj = (*it)[s];
      const json& toks = (sj.is_array() && !sj.empty() && sj[0].is_array()) ? sj[0] : sj;
      if (!toks.is_array())
        throw MalformedInput(where + ".sentences[" + std::to_string(s) + "]: expected token list");
      raw.doc.sentence_bounds.emplace_back(start, start + toks.size());
      start += toks.size();
    }
  } else {
    raw.doc.sentence_bounds = derive_sentence_bounds(raw.doc.words);
  }

  std::map<std::string, MentionSpan> mentions;
  const auto& ems = require(j, "entity_mentions", where);
  if (!ems.is_array()) throw MalformedInput(where + ".entity_mentions: expected array");
  for (std::size_t i = 0; i < ems.size(); ++i) {
    const auto& m = ems[i];
    const std::string mwhere = where + ".entity_mentions[" + std::to_string(i) + "]";
    const auto& mid = require(m, "id", mwhere);
    const auto& start = require(m, "start", mwhere);
    const auto& end = require(m, "end", mwhere);
    if (!mid.is_string() || !start.is_number_unsigned() || !end.is_number_unsigned())
      throw MalformedInput(mwhere + ": expected string id and unsigned start/end");
    const auto b = start.get<std::size_t>();
    const auto e = end.get<std::size_t>();
    if (b >= e || e > raw.doc.words.size())
      throw OffsetResolutionError(mwhere + ": span [" + std::to_string(b) + "," +
                                  std::to_string(e) + ") outside document");
    MentionSpan span{b, e, join_words(raw.doc.words, b, e)};
    if (auto t = m.find("text"); t != m.end() && t->is_string() &&
                                 join_words(split_words(t->get<std::string>()), 0,
                                            split_words(t->get<std::string>()).size()) !=
                                     span.surface)
      ++stats.surface_mismatches;
    mentions.emplace(mid.get<std::string>(), std::move(span));
  }

  std::map<std::string, std::vector<std::string>> cluster_of;
  if (auto it = j.find("coref_clusters"); it != j.end()) {
    if (!it->is_array()) throw MalformedInput(where + ".coref_clusters: expected array");
    for (const auto& cluster : *it) {
      std::vector<std::string> ids;
      for (const auto& c : cluster) ids.push_back(c.get<std::string>());
      for (const auto& c : ids) cluster_of[c] = ids;
    }
  }

  const auto& events = require(j, "event_mentions", where);
  if (!events.is_array()) throw MalformedInput(where + ".event_mentions: expected array");
  for (std::size_t t = 0; t < events.size(); ++t) {
    const auto& ev = events[t];
    const std::string ewhere = where + ".event_mentions[" + std::to_string(t) + "]";
    const auto& type = require(ev, "event_type", ewhere);
    if (!type.is_string()) throw MalformedInput(ewhere + ".event_type: expected string");
    RawTemplate tmpl;
    tmpl.incident_type = type.get<std::string>();
    if (auto args = ev.find("arguments"); args != ev.end()) {
      for (const auto& arg : *args) {
        const auto& eid = require(arg, "entity_id", ewhere + ".arguments");
        const auto& role = require(arg, "role", ewhere + ".arguments");
        const auto key = eid.get<std::string>();
        std::vector<std::string> ids = cluster_of.count(key) ? cluster_of[key]
                                                             : std::vector<std::string>{key};
        Entity entity;
        for (const auto& mid : ids) {
          auto m = mentions.find(mid);
          if (m == mentions.end())
            throw MalformedInput(ewhere + ": argument references unknown mention '" + mid + "'");
          entity.mentions.push_back(m->second);
        }
        std::sort(entity.mentions.begin(), entity.mentions.end());
        auto& fillers = tmpl.roles[role.get<std::string>()];
        bool seen = false;
        for (const auto& f : fillers) seen = seen || f.mentions == entity.mentions;
        if (!seen) fillers.push_back(dedupe_entity(std::move(entity), stats));
      }
    }
    raw.templates.push_back(std::move(tmpl));
  }
  return raw;
}

std::vector<json> read_entries(const std::string& text) {
  std::vector<json> entries;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return entries;
  try {
    if (text[first] == '[') {
      for (auto& e : json::parse(text)) entries.push_back(std::move(e));
    } else {
      std::istringstream in(text);
      std::string line;
      while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) entries.push_back(json::parse(line));
    }
  } catch (const json::parse_error& e) {
    throw MalformedInput(std::string("invalid JSON: ") + e.what());
  }
  return entries;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Canonical form used for duplicate-template detection: incident type plus,
// per role, the sorted set of sorted mention-string sets.
using TemplateKey =
    std::pair<std::string, std::map<std::string, std::vector<std::vector<std::string>>>>;

TemplateKey template_key(const RawTemplate& t) {
  TemplateKey key{t.incident_type, {}};
  for (const auto& [role, entities] : t.roles) {
    auto& sets = key.second[role];
    for (const auto& e : entities) {
      std::vector<std::string> strings;
      for (const auto& m : e.mentions) strings.push_back(m.surface);
      std::sort(strings.begin(), strings.end());
      sets.push_back(std::move(strings));
    }
    std::sort(sets.begin(), sets.end());
  }
  return key;
}

Corpus assemble(std::vector<std::pair<RawDocument, std::optional<Split>>> raws, CorpusFormat format,
                ParseStats stats) {
  Corpus corpus;
  corpus.stats = stats;
  if (format == CorpusFormat::kMucJson) {
    corpus.schema = muc_schema();
  } else {
    std::set<std::string> types, roles;
    for (const auto& [raw, split] : raws)
      for (const auto& t : raw.templates) {
        types.insert(t.incident_type);
        for (const auto& [role, _] : t.roles) roles.insert(role);
      }
    corpus.schema.incident_types.assign(types.begin(), types.end());
    corpus.schema.roles.assign(roles.begin(), roles.end());
  }

  for (auto& [raw, split] : raws) {
    Document doc = std::move(raw.doc);
    std::vector<TemplateKey> seen;
    for (std::size_t t = 0; t < raw.templates.size(); ++t) {
      auto& rt = raw.templates[t];
      const std::string where = "doc '" + doc.doc_id + "'.templates[" + std::to_string(t) + "]";
      std::string type = rt.incident_type;
      if (format == CorpusFormat::kMucJson) {
        type = lowercase(type);
        std::replace(type.begin(), type.end(), '-', ' ');
        std::replace(type.begin(), type.end(), '_', ' ');
      }
      const auto incident = corpus.schema.incident_index(type);
      if (!incident)
        throw MalformedInput(where + ".incident_type: unknown incident type '" + rt.incident_type + "'");
      for (const auto& [role, _] : rt.roles)
        if (!corpus.schema.role_index(role))
          throw MalformedInput(where + "." + role + ": unknown role name");
      if (rt.roles.empty()) {
        ++corpus.stats.empty_templates;
        continue;
      }
      rt.incident_type = corpus.schema.incident_types[*incident];
      auto key = template_key(rt);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
        ++corpus.stats.duplicate_templates;
        continue;
      }
      seen.push_back(std::move(key));
      doc.templates.push_back(Template{*incident, std::move(rt.roles)});
    }
    if (split) corpus.split_assignment[doc.doc_id] = *split;
    corpus.documents.push_back(std::move(doc));
  }
  validate(corpus);
  return corpus;
}

RawDocument read_document(const json& j, CorpusFormat format, ParseStats& stats) {
  return format == CorpusFormat::kMucJson ? read_muc_document(j, stats)
                                          : read_wikievents_document(j, stats);
}

}  // namespace

Corpus parse_corpus_text(const std::string& text, CorpusFormat format) {
  ParseStats stats;
  std::vector<std::pair<RawDocument, std::optional<Split>>> raws;
  for (const auto& entry : read_entries(text))
    raws.emplace_back(read_document(entry, format, stats), std::nullopt);
  return assemble(std::move(raws), format, stats);
}

Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw IOFailure("no such file or directory: " + path.string());
  if (!std::filesystem::is_directory(path)) return parse_corpus_text(read_file(path), format);

  ParseStats stats;
  std::vector<std::pair<RawDocument, std::optional<Split>>> raws;
  for (Split split : kAllSplits) {
    std::filesystem::path file;
    for (const char* ext : {".json", ".jsonl"}) {
      auto candidate = path / (std::string(split_name(split)) + ext);
      if (std::filesystem::exists(candidate)) {
        file = candidate;
        break;
      }
    }
    if (file.empty())
      throw IOFailure("corpus directory " + path.string() + " has no " + split_name(split) +
                      ".json or .jsonl");
    for (const auto& entry : read_entries(read_file(file)))
      raws.emplace_back(read_document(entry, format, stats), split);
  }
  return assemble(std::move(raws), format, stats);
}

void validate(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& doc : corpus.documents) {
    const std::string where = "doc '" + doc.doc_id + "'";
    if (!ids.insert(doc.doc_id).second) throw MalformedInput(where + ": duplicate doc id");
    std::size_t expect = 0;
    for (const auto& [b, e] : doc.sentence_bounds) {
      if (b != expect || e <= b)
        throw MalformedInput(where + ".sentences: bounds must partition the words without gaps");
      expect = e;
    }
    if (expect != doc.words.size())
      throw MalformedInput(where + ".sentences: bounds do not cover all " +
                           std::to_string(doc.words.size()) + " words");
    for (std::size_t t = 0; t < doc.templates.size(); ++t) {
      const auto& tmpl = doc.templates[t];
      if (tmpl.incident_type >= corpus.schema.incident_types.size())
        throw MalformedInput(where + ".templates[" + std::to_string(t) + "]: bad incident type");
      for (const auto& [role, entities] : tmpl.roles) {
        if (!corpus.schema.role_index(role))
          throw MalformedInput(where + ".templates[" + std::to_string(t) + "]." + role +
                               ": unknown role");
        for (std::size_t e = 0; e < entities.size(); ++e) {
          if (entities[e].mentions.empty())
            throw MalformedInput(where + "." + field_path(t, role, e) + ": entity without mentions");
          for (const auto& m : entities[e].mentions)
            if (m.start_word >= m.end_word || m.end_word > doc.words.size())
              throw MalformedInput(where + "." + field_path(t, role, e) + ": span out of range");
        }
      }
    }
  }
  for (const auto& [id, _] : corpus.split_assignment)
    if (!ids.count(id)) throw MalformedInput("split assignment names unknown doc '" + id + "'");
}

std::string serialize_corpus(const Corpus& corpus) {
  json out = json::array();
  for (const auto& doc : corpus.documents) {
    json d;
    d["docid"] = doc.doc_id;
    d["doctext"] = join_words(doc.words, 0, doc.words.size());
    json sentences = json::array();
    for (const auto& [b, e] : doc.sentence_bounds) sentences.push_back({b, e});
    d["sentences"] = std::move(sentences);
    json templates = json::array();
    for (const auto& t : doc.templates) {
      json tj;
      tj["incident_type"] = corpus.schema.incident_types.at(t.incident_type);
      for (const auto& [role, entities] : t.roles) {
        json ej = json::array();
        for (const auto& e : entities) {
          json mj = json::array();
          for (const auto& m : e.mentions) mj.push_back(join_words(doc.words, m.start_word, m.end_word));
          ej.push_back(std::move(mj));
        }
        tj[role] = std::move(ej);
      }
      templates.push_back(std::move(tj));
    }
    d["templates"] = std::move(templates);
    out.push_back(std::move(d));
  }
  return out.dump(1);
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOFailure("cannot write " + path.string());
  out << serialize_corpus(corpus) << '\n';
  if (!out) throw IOFailure("write failed for " + path.string());
}

std::vector<RoleFiller> enumerate_role_fillers(const Document& doc) {
  std::vector<RoleFiller> out;
  for (std::size_t t = 0; t < doc.templates.size(); ++t) {
    for (const auto& [role, entities] : doc.templates[t].roles) {
      std::vector<RoleFiller> block;
      for (std::size_t e = 0; e < entities.size(); ++e)
        for (const auto& m : entities[e].mentions) block.push_back({m, role, t, e});
      std::stable_sort(block.begin(), block.end(), [](const RoleFiller& a, const RoleFiller& b) {
        if (a.span != b.span) return a.span < b.span;
        return a.entity_index < b.entity_index;
      });
      out.insert(out.end(), block.begin(), block.end());
    }
  }
  return out;
}

std::vector<std::vector<MentionSpan>> coref_chains(const Document& doc) {
  std::vector<std::vector<MentionSpan>> chains;
  for (const auto& tmpl : doc.templates) {
    for (const auto& [role, entities] : tmpl.roles) {
      for (const auto& entity : entities) {
        auto chain = entity.mentions;
        std::sort(chain.begin(), chain.end());
        chain.erase(std::unique(chain.begin(), chain.end()), chain.end());
        if (std::find(chains.begin(), chains.end(), chain) == chains.end())
          chains.push_back(std::move(chain));
      }
    }
  }
  return chains;
}

Corpus split_documents(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  const std::size_t n = corpus.documents.size();
  if (n == 0) throw EmptyCorpus("cannot split a corpus without documents");
  if (n < 3) throw EmptyCorpus("need at least 3 documents for three non-empty splits");
  if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9)
    throw InvalidArgument("split ratios must be positive and sum to 1");

  std::array<std::size_t, 3> sizes{
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train)),
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.dev)), 0};
  sizes[0] = std::min(sizes[0], n);
  sizes[1] = std::min(sizes[1], n - sizes[0]);
  sizes[2] = n - sizes[0] - sizes[1];
  for (auto& s : sizes) {
    if (s > 0) continue;
    auto largest = std::max_element(sizes.begin(), sizes.end());
    --*largest;
    s = 1;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  Corpus out = corpus;
  out.split_assignment.clear();
  std::size_t pos = 0;
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < sizes[s]; ++i)
      out.split_assignment[corpus.documents[order[pos++]].doc_id] = kAllSplits[s];
  return out;
}

}  // namespace docprobe

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

#include "docprobe/embedstore.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "docprobe/errors.hpp"
#include "json.hpp"

namespace docprobe {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'P', 'E', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.append(bytes, 4);
}

void put_floats(std::string& out, const float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(data), count * sizeof(float));
  } else {
    for (std::size_t i = 0; i < count; ++i) put_u32(out, std::bit_cast<std::uint32_t>(data[i]));
  }
}

class Reader {
 public:
  Reader(std::span<const char> bytes, const std::string& doc_id) : bytes_(bytes), doc_id_(doc_id) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 4;
    return v;
  }

  void floats(float* out, std::size_t count) {
    need(count * sizeof(float));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out, bytes_.data() + pos_, count * sizeof(float));
      pos_ += count * sizeof(float);
    } else {
      for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(u32());
    }
  }

  bool magic_matches(const char (&magic)[4]) {
    need(4);
    const bool ok = std::memcmp(bytes_.data() + pos_, magic, 4) == 0;
    pos_ += 4;
    return ok;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("file shorter than its header declares");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw CorruptFile("tensor file for doc '" + doc_id_ + "': " + what);
  }

 private:
  std::span<const char> bytes_;
  const std::string& doc_id_;
  std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOFailure("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IOFailure("write failed for " + path.string());
}

std::string sanitize(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out[0] == '.') out.insert(out.begin(), '_');
  return out;
}

// Parses everything up to the payload; the reader is left at the payload.
struct Header {
  std::uint32_t n_layers = 0;
  std::uint32_t n_tokens = 0;
  std::uint32_t hidden_dim = 0;
  std::vector<std::uint32_t> layer_ids;
  std::vector<std::uint32_t> offsets;
};

Header read_header(Reader& r) {
  if (!r.magic_matches(kMagic)) r.fail("bad magic");
  Header h;
  h.n_layers = r.u32();
  h.n_tokens = r.u32();
  h.hidden_dim = r.u32();
  if (h.n_layers > r.remaining() / 4) r.fail("layer count exceeds file size");
  for (std::uint32_t i = 0; i < h.n_layers; ++i) h.layer_ids.push_back(r.u32());
  const std::uint32_t n_words = r.u32();
  if (n_words >= r.remaining() / 4) r.fail("word count exceeds file size");
  h.offsets.reserve(n_words + 1);
  for (std::uint32_t i = 0; i <= n_words; ++i) h.offsets.push_back(r.u32());
  for (std::size_t i = 1; i < h.layer_ids.size(); ++i)
    if (h.layer_ids[i] <= h.layer_ids[i - 1]) r.fail("layer ids not strictly increasing");
  for (std::size_t i = 0; i < h.offsets.size(); ++i) {
    if (i > 0 && h.offsets[i] < h.offsets[i - 1]) r.fail("word offsets decrease");
    if (h.offsets[i] > h.n_tokens) r.fail("word offset beyond token count");
  }
  return h;
}

}  // namespace

const char* mode_name(EmbeddingMode mode) {
  return mode == EmbeddingMode::kFullText ? "FullText" : "SentCat";
}

EmbeddingMode parse_mode(const std::string& name) {
  if (name == "FullText" || name == "fulltext") return EmbeddingMode::kFullText;
  if (name == "SentCat" || name == "sentcat") return EmbeddingMode::kSentCat;
  throw InvalidArgument("unknown embedding mode '" + name + "'");
}

AlignmentMap::AlignmentMap(std::vector<std::uint32_t> offsets, std::uint32_t n_tokens)
    : offsets_(std::move(offsets)) {
  if (offsets_.empty()) throw InvalidArgument("alignment needs n_words + 1 offsets");
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    if (i > 0 && offsets_[i] < offsets_[i - 1])
      throw InvalidArgument("alignment offsets must be non-decreasing");
    if (offsets_[i] > n_tokens) throw InvalidArgument("alignment offset beyond token count");
  }
  for (std::size_t w = 0; w + 1 < offsets_.size(); ++w) {
    if (offsets_[w] >= n_tokens) {
      truncated_from_ = w;
      break;
    }
  }
}

const TokenMatrix& DocEmbedding::layer(std::uint32_t layer_id) const {
  for (std::size_t i = 0; i < layer_ids.size(); ++i)
    if (layer_ids[i] == layer_id) return layers[i];
  throw LayerNotInBundle("layer " + std::to_string(layer_id) + " not stored for doc '" + doc_id + "'");
}

DocShape EmbeddingSource::shape(const std::string& doc_id) const {
  auto doc = load(doc_id);
  return {doc.n_tokens(), std::move(doc.alignment)};
}

std::string encode_tensor_file(const DocEmbedding& doc) {
  if (doc.layers.size() != doc.layer_ids.size())
    throw DimensionMismatch("doc '" + doc.doc_id + "': layer ids and tensors disagree");
  const std::size_t n_tokens = doc.n_tokens();
  const std::size_t dim = doc.hidden_dim();
  for (const auto& m : doc.layers)
    if (static_cast<std::size_t>(m.rows()) != n_tokens || static_cast<std::size_t>(m.cols()) != dim)
      throw DimensionMismatch("doc '" + doc.doc_id + "': layer matrices differ in shape");
  if (doc.alignment.offsets().back() > n_tokens)
    throw DimensionMismatch("doc '" + doc.doc_id + "': alignment exceeds token count");

  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(doc.layer_ids.size()));
  put_u32(out, static_cast<std::uint32_t>(n_tokens));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (auto id : doc.layer_ids) put_u32(out, id);
  put_u32(out, static_cast<std::uint32_t>(doc.alignment.word_count()));
  for (auto o : doc.alignment.offsets()) put_u32(out, o);
  for (const auto& m : doc.layers) put_floats(out, m.data(), static_cast<std::size_t>(m.size()));
  return out;
}

DocEmbedding decode_tensor_file(std::span<const char> bytes, const std::string& doc_id) {
  Reader r(bytes, doc_id);
  Header h = read_header(r);
  const std::size_t per_layer = static_cast<std::size_t>(h.n_tokens) * h.hidden_dim;
  if (r.remaining() != per_layer * h.n_layers * sizeof(float))
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
           std::to_string(per_layer * h.n_layers * sizeof(float)));

  DocEmbedding doc;
  doc.doc_id = doc_id;
  doc.layer_ids = h.layer_ids;
  for (std::uint32_t l = 0; l < h.n_layers; ++l) {
    TokenMatrix m(h.n_tokens, h.hidden_dim);
    r.floats(m.data(), per_layer);
    if (!m.allFinite()) r.fail("non-finite value in layer " + std::to_string(h.layer_ids[l]));
    doc.layers.push_back(std::move(m));
  }
  doc.alignment = AlignmentMap(std::move(h.offsets), h.n_tokens);
  return doc;
}

std::string manifest_to_json(const BundleManifest& manifest) {
  json j;
  j["encoder_name"] = manifest.encoder_name;
  j["mode"] = mode_name(manifest.mode);
  j["hidden_dim"] = manifest.hidden_dim;
  j["layer_ids"] = manifest.layer_ids;
  j["max_tokens"] = manifest.max_tokens;
  j["doc_index"] = manifest.doc_index;
  return j.dump(2) + "\n";
}

BundleManifest manifest_from_json(const std::string& text) {
  BundleManifest m;
  try {
    const json j = json::parse(text);
    m.encoder_name = j.at("encoder_name").get<std::string>();
    m.mode = parse_mode(j.at("mode").get<std::string>());
    m.hidden_dim = j.at("hidden_dim").get<std::uint32_t>();
    m.layer_ids = j.at("layer_ids").get<std::vector<std::uint32_t>>();
    m.max_tokens = j.at("max_tokens").get<std::uint32_t>();
    m.doc_index = j.at("doc_index").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw CorruptFile(std::string("manifest.json: ") + e.what());
  }
  if (m.hidden_dim == 0) throw CorruptFile("manifest.json: hidden_dim must be positive");
  if (m.max_tokens == 0) throw CorruptFile("manifest.json: max_tokens must be positive");
  for (std::size_t i = 1; i < m.layer_ids.size(); ++i)
    if (m.layer_ids[i] <= m.layer_ids[i - 1])
      throw CorruptFile("manifest.json: layer_ids must be strictly increasing");
  return m;
}

void check_conforms(const BundleManifest& manifest, const DocEmbedding& doc) {
  if (doc.layer_ids != manifest.layer_ids)
    throw DimensionMismatch("doc '" + doc.doc_id + "': layer set differs from manifest");
  if (doc.layers.size() != doc.layer_ids.size())
    throw DimensionMismatch("doc '" + doc.doc_id + "': layer ids and tensors disagree");
  for (const auto& m : doc.layers) {
    if (static_cast<std::uint32_t>(m.cols()) != manifest.hidden_dim)
      throw DimensionMismatch("doc '" + doc.doc_id + "': hidden size " + std::to_string(m.cols()) +
                              " differs from manifest " + std::to_string(manifest.hidden_dim));
    if (static_cast<std::size_t>(m.rows()) != doc.n_tokens())
      throw DimensionMismatch("doc '" + doc.doc_id + "': layer matrices differ in token count");
  }
  if (manifest.mode == EmbeddingMode::kFullText && doc.n_tokens() > manifest.max_tokens)
    throw DimensionMismatch("doc '" + doc.doc_id + "': " + std::to_string(doc.n_tokens()) +
                            " tokens exceed max_tokens " + std::to_string(manifest.max_tokens));
  if (doc.alignment.offsets().back() > doc.n_tokens())
    throw DimensionMismatch("doc '" + doc.doc_id + "': alignment exceeds token count");
}

Bundle::Bundle(std::filesystem::path dir, BundleManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

std::filesystem::path Bundle::tensor_path(const std::string& doc_id) const {
  auto it = manifest_.doc_index.find(doc_id);
  if (it == manifest_.doc_index.end())
    throw UnknownDoc("doc '" + doc_id + "' is not in bundle " + dir_.string());
  return dir_ / it->second;
}

DocEmbedding Bundle::load(const std::string& doc_id) const {
  const std::string bytes = read_all(tensor_path(doc_id));
  DocEmbedding doc = decode_tensor_file(bytes, doc_id);
  if (doc.layer_ids != manifest_.layer_ids)
    throw CorruptFile("tensor file for doc '" + doc_id + "': layer ids differ from manifest");
  if (doc.hidden_dim() != manifest_.hidden_dim && doc.n_tokens() > 0)
    throw CorruptFile("tensor file for doc '" + doc_id + "': hidden size differs from manifest");
  return doc;
}

DocShape Bundle::shape(const std::string& doc_id) const {
  const auto path = tensor_path(doc_id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open " + path.string());
  // Header only: magic, counts, layer ids, word count, then the offsets.
  std::string head(16, '\0');
  in.read(head.data(), 16);
  if (in.gcount() != 16) throw CorruptFile("tensor file for doc '" + doc_id + "': truncated header");
  std::uint32_t n_layers = 0;
  for (int i = 3; i >= 0; --i) n_layers = (n_layers << 8) | static_cast<unsigned char>(head[4 + i]);
  std::error_code ec;
  const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path, ec));
  if (ec || 16 + std::uint64_t{n_layers} * 4 + 4 > file_size)
    throw CorruptFile("tensor file for doc '" + doc_id + "': truncated header");
  std::string rest(static_cast<std::size_t>(n_layers) * 4 + 4, '\0');
  in.read(rest.data(), static_cast<std::streamsize>(rest.size()));
  std::uint32_t n_words = 0;
  for (int i = 3; i >= 0; --i)
    n_words = (n_words << 8) | static_cast<unsigned char>(rest[rest.size() - 4 + static_cast<std::size_t>(i)]);
  if (16 + rest.size() + (std::uint64_t{n_words} + 1) * 4 > file_size)
    throw CorruptFile("tensor file for doc '" + doc_id + "': truncated header");
  std::string offsets((static_cast<std::size_t>(n_words) + 1) * 4, '\0');
  in.read(offsets.data(), static_cast<std::streamsize>(offsets.size()));
  if (!in) throw CorruptFile("tensor file for doc '" + doc_id + "': truncated header");
  const std::string bytes = head + rest + offsets;
  Reader r(bytes, doc_id);
  Header h = read_header(r);
  return {h.n_tokens, AlignmentMap(std::move(h.offsets), h.n_tokens)};
}

InMemoryBundle::InMemoryBundle(BundleManifest manifest) : manifest_(std::move(manifest)) {
  manifest_.doc_index.clear();
}

void InMemoryBundle::add(DocEmbedding doc) {
  check_conforms(manifest_, doc);
  manifest_.doc_index[doc.doc_id] = doc.doc_id;
  docs_[doc.doc_id] = std::move(doc);
}

DocEmbedding InMemoryBundle::load(const std::string& doc_id) const {
  auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw UnknownDoc("doc '" + doc_id + "' is not in the bundle");
  return it->second;
}

DocShape InMemoryBundle::shape(const std::string& doc_id) const {
  auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw UnknownDoc("doc '" + doc_id + "' is not in the bundle");
  return {it->second.n_tokens(), it->second.alignment};
}

BundleWriter::BundleWriter(std::filesystem::path out_dir, BundleManifest manifest)
    : dir_(std::move(out_dir)), manifest_(std::move(manifest)) {
  if (manifest_.hidden_dim == 0) throw InvalidArgument("hidden_dim must be positive");
  for (std::size_t i = 1; i < manifest_.layer_ids.size(); ++i)
    if (manifest_.layer_ids[i] <= manifest_.layer_ids[i - 1])
      throw InvalidArgument("layer_ids must be strictly increasing");
  manifest_.doc_index.clear();
  std::error_code ec;
  std::filesystem::create_directories(dir_ / "tensors", ec);
  if (ec) throw IOFailure("cannot create " + (dir_ / "tensors").string() + ": " + ec.message());
}

void BundleWriter::add(const DocEmbedding& doc) {
  if (finished_) throw InvalidArgument("bundle writer already finished");
  check_conforms(manifest_, doc);
  if (manifest_.doc_index.count(doc.doc_id))
    throw InvalidArgument("doc '" + doc.doc_id + "' written twice");
  std::set<std::string> taken;
  for (const auto& [_, rel] : manifest_.doc_index) taken.insert(rel);
  const std::string stem = "tensors/" + sanitize(doc.doc_id);
  std::string rel = stem + ".dpe";
  for (int n = 1; taken.count(rel); ++n) rel = stem + "-" + std::to_string(n) + ".dpe";
  write_all(dir_ / rel, encode_tensor_file(doc));
  manifest_.doc_index[doc.doc_id] = rel;
}

BundleManifest BundleWriter::finish() {
  if (!finished_) {
    write_all(dir_ / "manifest.json", manifest_to_json(manifest_));
    finished_ = true;
  }
  return manifest_;
}

void write_bundle(const BundleManifest& manifest, std::span<const DocEmbedding> docs,
                  const std::filesystem::path& out_dir) {
  BundleWriter writer(out_dir, manifest);
  for (const auto& doc : docs) writer.add(doc);
  writer.finish();
}

Bundle read_bundle(const std::filesystem::path& dir) {
  BundleManifest manifest = manifest_from_json(read_all(dir / "manifest.json"));
  for (const auto& [id, rel] : manifest.doc_index)
    if (!std::filesystem::is_regular_file(dir / rel))
      throw CorruptFile("manifest.json: tensor file for doc '" + id + "' missing: " + rel);
  return Bundle(dir, std::move(manifest));
}

std::optional<std::size_t> first_token_row(const AlignmentMap& alignment, std::size_t word) {
  if (word >= alignment.word_count())
    throw InvalidArgument("word " + std::to_string(word) + " outside alignment of " +
                          std::to_string(alignment.word_count()) + " words");
  if (auto cut = alignment.truncated_from_word(); cut && word >= *cut) return std::nullopt;
  const auto iv = alignment.interval(word);
  if (iv.empty()) return std::nullopt;
  return iv.begin;
}

std::optional<Eigen::VectorXf> first_token_vector(const DocEmbedding& doc, std::uint32_t layer,
                                                  std::size_t word) {
  const TokenMatrix& m = doc.layer(layer);
  auto row = first_token_row(doc.alignment, word);
  if (!row) return std::nullopt;
  return Eigen::VectorXf(m.row(static_cast<Eigen::Index>(*row)).transpose());
}

DocEmbedding truncate(const DocEmbedding& doc, std::size_t max_tokens) {
  if (max_tokens < 1) throw InvalidArgument("max_tokens must be at least 1");
  if (doc.n_tokens() <= max_tokens) return doc;
  DocEmbedding out;
  out.doc_id = doc.doc_id;
  out.layer_ids = doc.layer_ids;
  const auto rows = static_cast<Eigen::Index>(max_tokens);
  for (const auto& m : doc.layers) out.layers.emplace_back(m.topRows(rows));
  std::vector<std::uint32_t> offsets = doc.alignment.offsets();
  for (auto& o : offsets) o = std::min<std::uint32_t>(o, static_cast<std::uint32_t>(max_tokens));
  out.alignment = AlignmentMap(std::move(offsets), static_cast<std::uint32_t>(max_tokens));
  return out;
}

DocEmbedding concat_doc_embeddings(std::span<const DocEmbedding> parts) {
  if (parts.empty()) throw InvalidArgument("nothing to concatenate");
  const auto& first = parts.front();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.layer_ids != first.layer_ids || p.layers.size() != first.layers.size())
      throw DimensionMismatch("doc '" + first.doc_id + "': parts store different layers");
    if (p.hidden_dim() != first.hidden_dim() && p.n_tokens() > 0 && first.n_tokens() > 0)
      throw DimensionMismatch("doc '" + first.doc_id + "': parts differ in hidden size");
    if (p.alignment.truncated_from_word())
      throw DimensionMismatch("doc '" + first.doc_id + "': cannot concatenate a truncated part");
    total += p.n_tokens();
  }
  Eigen::Index dim = 0;
  for (const auto& p : parts) dim = std::max<Eigen::Index>(dim, static_cast<Eigen::Index>(p.hidden_dim()));

  DocEmbedding out;
  out.doc_id = first.doc_id;
  out.layer_ids = first.layer_ids;
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    TokenMatrix m(static_cast<Eigen::Index>(total), dim);
    Eigen::Index row = 0;
    for (const auto& p : parts) {
      if (p.n_tokens() == 0) continue;
      m.middleRows(row, p.layers[l].rows()) = p.layers[l];
      row += p.layers[l].rows();
    }
    out.layers.push_back(std::move(m));
  }

  std::vector<std::uint32_t> offsets;
  std::uint32_t base = 0;
  std::optional<std::uint32_t> end;
  for (const auto& p : parts) {
    const auto& o = p.alignment.offsets();
    for (std::size_t w = 0; w + 1 < o.size(); ++w) offsets.push_back(base + o[w]);
    if (o.size() > 1) end = base + o.back();
    base += static_cast<std::uint32_t>(p.n_tokens());
  }
  offsets.push_back(end.value_or(offsets.empty() ? 0 : offsets.back()));
  out.alignment = AlignmentMap(std::move(offsets), static_cast<std::uint32_t>(total));
  return out;
}

}  // namespace docprobe

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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace docprobe {

enum class EmbeddingMode { kFullText, kSentCat };

const char* mode_name(EmbeddingMode mode);
EmbeddingMode parse_mode(const std::string& name);

// Token-major storage, one row per encoder token.
using TokenMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TokenInterval {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  bool empty() const { return end <= begin; }
};

// Word -> token intervals stored as n_words + 1 start offsets: word i owns
// [offsets[i], offsets[i+1]). Tokens before offsets[0] or after
// offsets[n_words] (sequence delimiters) belong to no word.
class AlignmentMap {
 public:
  AlignmentMap() : offsets_{0} {}
  AlignmentMap(std::vector<std::uint32_t> offsets, std::uint32_t n_tokens);

  std::size_t word_count() const { return offsets_.size() - 1; }
  TokenInterval interval(std::size_t word) const { return {offsets_[word], offsets_[word + 1]}; }
  const std::vector<std::uint32_t>& offsets() const { return offsets_; }

  // First word with no surviving tokens after truncation, if any.
  std::optional<std::size_t> truncated_from_word() const { return truncated_from_; }

  friend bool operator==(const AlignmentMap&, const AlignmentMap&) = default;

 private:
  std::vector<std::uint32_t> offsets_;
  std::optional<std::size_t> truncated_from_;
};

struct DocEmbedding {
  std::string doc_id;
  std::vector<std::uint32_t> layer_ids;
  std::vector<TokenMatrix> layers;  // parallel to layer_ids
  AlignmentMap alignment;

  std::size_t n_tokens() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().rows()); }
  std::size_t hidden_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().cols()); }
  const TokenMatrix& layer(std::uint32_t layer_id) const;
};

struct BundleManifest {
  std::string encoder_name;
  EmbeddingMode mode = EmbeddingMode::kFullText;
  std::uint32_t hidden_dim = 768;
  std::vector<std::uint32_t> layer_ids;
  std::uint32_t max_tokens = 512;
  std::map<std::string, std::string> doc_index;  // doc_id -> relative tensor path

  friend bool operator==(const BundleManifest&, const BundleManifest&) = default;
};

// Token count and alignment of one document, without the payload.
struct DocShape {
  std::size_t n_tokens = 0;
  AlignmentMap alignment;
};

// Read access to per-document embeddings. Implementations must allow
// concurrent calls from several threads.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual const BundleManifest& manifest() const = 0;
  virtual DocEmbedding load(const std::string& doc_id) const = 0;
  virtual DocShape shape(const std::string& doc_id) const;
  bool contains(const std::string& doc_id) const { return manifest().doc_index.count(doc_id) > 0; }
};

// A bundle directory on disk; documents load lazily on access.
class Bundle final : public EmbeddingSource {
 public:
  Bundle(std::filesystem::path dir, BundleManifest manifest);
  const BundleManifest& manifest() const override { return manifest_; }
  DocEmbedding load(const std::string& doc_id) const override;
  DocShape shape(const std::string& doc_id) const override;
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path tensor_path(const std::string& doc_id) const;

  std::filesystem::path dir_;
  BundleManifest manifest_;
};

// Embeddings held in memory; used by tests and synthetic fixtures.
class InMemoryBundle final : public EmbeddingSource {
 public:
  explicit InMemoryBundle(BundleManifest manifest);
  void add(DocEmbedding doc);
  const BundleManifest& manifest() const override { return manifest_; }
  DocEmbedding load(const std::string& doc_id) const override;
  DocShape shape(const std::string& doc_id) const override;

 private:
  BundleManifest manifest_;
  std::map<std::string, DocEmbedding> docs_;
};

// Streams documents into a bundle directory; the manifest is written by
// finish(). Throws DimensionMismatch for documents that do not match the
// manifest's layers or hidden size.
class BundleWriter {
 public:
  BundleWriter(std::filesystem::path out_dir, BundleManifest manifest);
  void add(const DocEmbedding& doc);
  BundleManifest finish();

 private:
  std::filesystem::path dir_;
  BundleManifest manifest_;
  bool finished_ = false;
};

void write_bundle(const BundleManifest& manifest, std::span<const DocEmbedding> docs,
                  const std::filesystem::path& out_dir);
Bundle read_bundle(const std::filesystem::path& dir);

void check_conforms(const BundleManifest& manifest, const DocEmbedding& doc);

// Tensor file codec ("DPE1").
std::string encode_tensor_file(const DocEmbedding& doc);
DocEmbedding decode_tensor_file(std::span<const char> bytes, const std::string& doc_id);

std::string manifest_to_json(const BundleManifest& manifest);
BundleManifest manifest_from_json(const std::string& text);

// Row of the word's first token, or nullopt when the word has no
// surviving token (truncated away or tokenized to nothing).
std::optional<std::size_t> first_token_row(const AlignmentMap& alignment, std::size_t word);

std::optional<Eigen::VectorXf> first_token_vector(const DocEmbedding& doc, std::uint32_t layer,
                                                  std::size_t word);

DocEmbedding truncate(const DocEmbedding& doc, std::size_t max_tokens);

// Row-wise concatenation of per-sentence embeddings of one document.
DocEmbedding concat_doc_embeddings(std::span<const DocEmbedding> parts);

}  // namespace docprobe

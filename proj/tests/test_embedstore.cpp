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


#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "docprobe/embedstore.hpp"
#include "docprobe/errors.hpp"
#include "fixtures.hpp"
#include "json.hpp"

namespace docprobe {
namespace {

DocEmbedding random_doc(const std::string& id, std::vector<std::uint32_t> layers, std::size_t dim,
                        std::vector<std::uint32_t> offsets, std::uint32_t n_tokens, Rng& rng) {
  DocEmbedding d;
  d.doc_id = id;
  d.layer_ids = std::move(layers);
  for (std::size_t l = 0; l < d.layer_ids.size(); ++l) {
    TokenMatrix m(n_tokens, static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(standard_normal(rng));
    d.layers.push_back(std::move(m));
  }
  d.alignment = AlignmentMap(std::move(offsets), n_tokens);
  return d;
}

// Random word alignment: a leading delimiter, 1-3 tokens per word, a trailing delimiter.
DocEmbedding random_sentence(const std::string& id, std::size_t n_words, std::size_t dim, Rng& rng) {
  std::vector<std::uint32_t> offsets{1};
  for (std::size_t w = 0; w < n_words; ++w) offsets.push_back(offsets.back() + 1 + static_cast<std::uint32_t>(uniform_below(rng, 3)));
  const std::uint32_t n_tokens = offsets.back() + 1;
  return random_doc(id, {0, 6, 12}, dim, std::move(offsets), n_tokens, rng);
}

bool bit_identical(const DocEmbedding& a, const DocEmbedding& b) {
  if (a.layer_ids != b.layer_ids || !(a.alignment == b.alignment) || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].rows() != b.layers[l].rows() || a.layers[l].cols() != b.layers[l].cols()) return false;
    if (std::memcmp(a.layers[l].data(), b.layers[l].data(), sizeof(float) * static_cast<std::size_t>(a.layers[l].size())) != 0)
      return false;
  }
  return true;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

TEST(TensorFile, MatchesHandAssembledBytes) {
  DocEmbedding d;
  d.doc_id = "x";
  d.layer_ids = {3, 7};
  for (int l = 0; l < 2; ++l) {
    TokenMatrix m(3, 4);
    for (int t = 0; t < 3; ++t)
      for (int c = 0; c < 4; ++c) m(t, c) = static_cast<float>(100 * l + 10 * t + c) + 0.5f;
    d.layers.push_back(m);
  }
  d.alignment = AlignmentMap({0, 1, 3}, 3);

  std::string expected = "DPE1";
  put_u32(expected, 2);
  put_u32(expected, 3);
  put_u32(expected, 4);
  put_u32(expected, 3);
  put_u32(expected, 7);
  put_u32(expected, 2);
  for (std::uint32_t o : {0u, 1u, 3u}) put_u32(expected, o);
  const std::size_t header = expected.size();
  for (int l = 0; l < 2; ++l)
    for (int t = 0; t < 3; ++t)
      for (int c = 0; c < 4; ++c) put_f32(expected, static_cast<float>(100 * l + 10 * t + c) + 0.5f);

  const std::string bytes = encode_tensor_file(d);
  EXPECT_EQ(bytes.size() - header, 96u);
  EXPECT_EQ(bytes, expected);
  EXPECT_TRUE(bit_identical(decode_tensor_file(bytes, "x"), d));
}

TEST(TensorFile, RejectsCorruption) {
  Rng rng(1);
  const std::string good = encode_tensor_file(random_sentence("a", 4, 5, rng));
  EXPECT_THROW(decode_tensor_file(std::string_view(good).substr(0, good.size() - 1), "a"), CorruptFile);
  EXPECT_THROW(decode_tensor_file(good + "x", "a"), CorruptFile);
  std::string magic = good;
  magic[3] = '2';
  EXPECT_THROW(decode_tensor_file(magic, "a"), CorruptFile);
  std::string nan = good;
  const float bad = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + nan.size() - 4, &bad, 4);
  EXPECT_THROW(decode_tensor_file(nan, "a"), CorruptFile);
  std::string inf = good;
  const float big = std::numeric_limits<float>::infinity();
  std::memcpy(inf.data() + inf.size() - 8, &big, 4);
  EXPECT_THROW(decode_tensor_file(inf, "a"), CorruptFile);
  EXPECT_THROW(decode_tensor_file(std::string("DP"), "a"), CorruptFile);
}

TEST(Bundle, WriteReadRoundTripIsBitIdentical) {
  auto dir = fixtures::temp_dir("bundle-rt");
  Rng rng(2);
  BundleManifest m = fixtures::make_manifest(6, {0, 6, 12}, 64);
  m.encoder_name = "bert-base-uncased";
  std::vector<DocEmbedding> docs;
  for (int i = 0; i < 5; ++i) docs.push_back(random_sentence("doc/" + std::to_string(i), 4 + i, 6, rng));
  docs.push_back(random_doc("empty", {0, 6, 12}, 6, {0}, 0, rng));
  write_bundle(m, docs, dir);

  Bundle b = read_bundle(dir);
  EXPECT_EQ(b.manifest().encoder_name, "bert-base-uncased");
  EXPECT_EQ(b.manifest().layer_ids, m.layer_ids);
  EXPECT_EQ(b.manifest().doc_index.size(), docs.size());
  for (const auto& d : docs) {
    EXPECT_TRUE(bit_identical(b.load(d.doc_id), d)) << d.doc_id;
    DocShape s = b.shape(d.doc_id);
    EXPECT_EQ(s.n_tokens, d.n_tokens());
    EXPECT_EQ(s.alignment, d.alignment);
  }
  // Byte-deterministic output.
  auto dir2 = fixtures::temp_dir("bundle-rt2");
  write_bundle(m, docs, dir2);
  for (const auto& [id, rel] : b.manifest().doc_index) {
    std::ifstream x(dir / rel, std::ios::binary), y(dir2 / rel, std::ios::binary);
    std::stringstream xs, ys;
    xs << x.rdbuf();
    ys << y.rdbuf();
    EXPECT_EQ(xs.str(), ys.str());
  }
  EXPECT_EQ(read_bundle(dir2).manifest(), b.manifest());
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST(Bundle, ManifestJsonHasSortedIndexAndModeName) {
  BundleManifest m = fixtures::make_manifest(768, {0, 1, 2}, 512, EmbeddingMode::kSentCat);
  m.doc_index = {{"b", "tensors/b.dpe"}, {"a", "tensors/a.dpe"}};
  const std::string text = manifest_to_json(m);
  auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("mode"), "SentCat");
  EXPECT_LT(text.find("\"a\""), text.find("\"b\""));
  EXPECT_EQ(manifest_from_json(text), m);
  j["layer_ids"] = {2, 1};
  EXPECT_THROW(manifest_from_json(j.dump()), CorruptFile);
}

TEST(Bundle, Errors) {
  auto dir = fixtures::temp_dir("bundle-err");
  Rng rng(3);
  BundleManifest m = fixtures::make_manifest(4, {0, 1}, 32);
  std::vector<DocEmbedding> docs{random_sentence("a", 3, 4, rng)};
  docs[0].layer_ids = {0, 1};
  docs[0].layers.resize(2);
  write_bundle(m, docs, dir);
  Bundle b = read_bundle(dir);
  EXPECT_THROW(b.load("nope"), UnknownDoc);
  EXPECT_THROW(b.load("a").layer(5), LayerNotInBundle);

  // Layer set differs from manifest.
  auto wrong = random_sentence("w", 3, 4, rng);
  EXPECT_THROW(write_bundle(m, std::vector<DocEmbedding>{wrong}, fixtures::temp_dir("bundle-err2")), DimensionMismatch);
  auto wide = random_doc("v", {0, 1}, 5, {0, 1}, 1, rng);
  EXPECT_THROW(write_bundle(m, std::vector<DocEmbedding>{wide}, fixtures::temp_dir("bundle-err3")), DimensionMismatch);
  auto long_doc = random_doc("l", {0, 1}, 4, {0, 40}, 40, rng);
  EXPECT_THROW(write_bundle(m, std::vector<DocEmbedding>{long_doc}, fixtures::temp_dir("bundle-err4")), DimensionMismatch);

  // Truncated tensor file.
  const auto path = dir / b.manifest().doc_index.at("a");
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  EXPECT_THROW(b.load("a"), CorruptFile);
  std::filesystem::resize_file(path, 10);
  EXPECT_THROW(b.shape("a"), CorruptFile);
  std::filesystem::remove(path);
  EXPECT_THROW(read_bundle(dir), CorruptFile);
  EXPECT_THROW(read_bundle(dir / "missing"), IOFailure);
  for (const char* n : {"bundle-err", "bundle-err2", "bundle-err3", "bundle-err4"})
    std::filesystem::remove_all(std::filesystem::temp_directory_path() / ("docprobe-" + std::to_string(::getpid()) + "-" + n));
}

TEST(FirstToken, Lookups) {
  Rng rng(4);
  DocEmbedding d = random_doc("a", {0}, 3, {0, 1, 3, 4}, 4, rng);
  EXPECT_EQ(first_token_row(d.alignment, 0), 0u);
  EXPECT_EQ(first_token_row(d.alignment, 1), 1u);
  EXPECT_EQ(first_token_row(d.alignment, 2), 3u);
  auto v = first_token_vector(d, 0, 2);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(*v, Eigen::VectorXf(d.layers[0].row(3).transpose()));
  EXPECT_THROW(first_token_vector(d, 9, 0), LayerNotInBundle);
  EXPECT_THROW(first_token_row(d.alignment, 3), InvalidArgument);

  DocEmbedding cut = truncate(d, 2);
  EXPECT_EQ(cut.alignment.truncated_from_word(), 2u);
  EXPECT_EQ(first_token_row(cut.alignment, 1), 1u);
  EXPECT_FALSE(first_token_row(cut.alignment, 2).has_value());
}

TEST(FirstToken, NeverPastTokenCount) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    DocEmbedding d = random_sentence("a", 1 + uniform_below(rng, 20), 2, rng);
    if (uniform_below(rng, 2)) d = truncate(d, 1 + uniform_below(rng, d.n_tokens()));
    for (std::size_t w = 0; w < d.alignment.word_count(); ++w)
      if (auto row = first_token_row(d.alignment, w)) ASSERT_LT(*row, d.n_tokens());
  }
}

TEST(Truncate, ClipsRowsAndAlignment) {
  Rng rng(6);
  std::vector<std::uint32_t> offsets;
  for (std::uint32_t w = 0; w < 5; ++w) offsets.push_back(w * 100);
  offsets.insert(offsets.end(), {510, 514, 600});
  DocEmbedding d = random_doc("a", {0, 1}, 2, offsets, 600, rng);
  DocEmbedding t = truncate(d, 512);
  EXPECT_EQ(t.n_tokens(), 512u);
  EXPECT_EQ(t.alignment.interval(5).begin, 510u);
  EXPECT_EQ(t.alignment.interval(5).end, 512u);
  EXPECT_EQ(t.alignment.truncated_from_word(), 6u);
  EXPECT_TRUE(t.layers[1] == d.layers[1].topRows(512));
  EXPECT_TRUE(bit_identical(truncate(d, 600), d));
  EXPECT_TRUE(bit_identical(truncate(d, 1000), d));
  EXPECT_THROW(truncate(d, 0), InvalidArgument);
}

TEST(Truncate, MatchesClipOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    DocEmbedding d = random_sentence("a", 1 + uniform_below(rng, 30), 2, rng);
    const std::size_t max = 1 + uniform_below(rng, d.n_tokens() + 3);
    DocEmbedding t = truncate(d, max);
    ASSERT_EQ(t.n_tokens(), std::min(max, d.n_tokens()));
    std::optional<std::size_t> cut;
    for (std::size_t w = 0; w < d.alignment.word_count(); ++w) {
      auto iv = d.alignment.interval(w);
      const std::size_t b = std::min<std::size_t>(iv.begin, max), e = std::min<std::size_t>(iv.end, max);
      ASSERT_EQ(t.alignment.interval(w).begin, b);
      ASSERT_EQ(t.alignment.interval(w).end, e);
      if (!cut && iv.begin >= max) cut = w;
    }
    ASSERT_EQ(t.alignment.truncated_from_word(), cut);
  }
}

TEST(Concat, ShapesAndIdentity) {
  Rng rng(8);
  DocEmbedding a = random_doc("d", {0, 1}, 3, {0, 1, 3}, 3, rng);
  DocEmbedding b = random_doc("d", {0, 1}, 3, {0, 2, 5}, 5, rng);
  DocEmbedding both = concat_doc_embeddings(std::vector<DocEmbedding>{a, b});
  EXPECT_EQ(both.n_tokens(), 8u);
  EXPECT_EQ(both.alignment.offsets(), (std::vector<std::uint32_t>{0, 1, 3, 5, 8}));
  EXPECT_TRUE(bit_identical(concat_doc_embeddings(std::vector<DocEmbedding>{a}), a));
  DocEmbedding other = random_doc("d", {0, 2}, 3, {0, 1}, 1, rng);
  EXPECT_THROW(concat_doc_embeddings(std::vector<DocEmbedding>{a, other}), DimensionMismatch);
  DocEmbedding cut = truncate(b, 2);
  EXPECT_THROW(concat_doc_embeddings(std::vector<DocEmbedding>{a, cut}), DimensionMismatch);
}

TEST(Concat, RebasedAlignmentMatchesTokenListOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DocEmbedding> parts;
    const std::size_t n_parts = 1 + uniform_below(rng, 4);
    for (std::size_t p = 0; p < n_parts; ++p) parts.push_back(random_sentence("d", 1 + uniform_below(rng, 6), 2, rng));
    DocEmbedding joined = concat_doc_embeddings(parts);
    // Flat token list labelled with global word ids (-1 for delimiters).
    std::vector<long> owner;
    std::vector<const float*> source;
    long word_base = 0;
    for (const auto& p : parts) {
      for (std::size_t t = 0; t < p.n_tokens(); ++t) {
        long o = -1;
        for (std::size_t w = 0; w < p.alignment.word_count(); ++w) {
          auto iv = p.alignment.interval(w);
          if (t >= iv.begin && t < iv.end) o = word_base + static_cast<long>(w);
        }
        owner.push_back(o);
        source.push_back(p.layers[2].data() + t * p.hidden_dim());
      }
      word_base += static_cast<long>(p.alignment.word_count());
    }
    ASSERT_EQ(joined.n_tokens(), owner.size());
    ASSERT_EQ(joined.alignment.word_count(), static_cast<std::size_t>(word_base));
    for (long w = 0; w < word_base; ++w) {
      const auto first = static_cast<std::size_t>(std::find(owner.begin(), owner.end(), w) - owner.begin());
      ASSERT_EQ(first_token_row(joined.alignment, static_cast<std::size_t>(w)), first);
      ASSERT_EQ(std::memcmp(joined.layers[2].row(static_cast<Eigen::Index>(first)).data(), source[first], 2 * sizeof(float)), 0);
    }
  }
}

TEST(Concat, PrefixPropertyOnRandomTensors) {
  Rng rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<DocEmbedding> parts;
    const std::size_t n_parts = 1 + uniform_below(rng, 4);
    for (std::size_t p = 0; p < n_parts; ++p) parts.push_back(random_sentence("d", 1 + uniform_below(rng, 8), 3, rng));
    DocEmbedding prefix = truncate(concat_doc_embeddings(parts), parts[0].n_tokens());
    ASSERT_EQ(prefix.n_tokens(), parts[0].n_tokens());
    for (std::size_t l = 0; l < parts[0].layers.size(); ++l)
      ASSERT_EQ(std::memcmp(prefix.layers[l].data(), parts[0].layers[l].data(),
                            sizeof(float) * static_cast<std::size_t>(parts[0].layers[l].size())),
                0);
  }
}

TEST(Truncate, Idempotent) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    DocEmbedding d = random_sentence("d", 1 + uniform_below(rng, 20), 2, rng);
    const std::size_t m = 1 + uniform_below(rng, d.n_tokens() + 2);
    DocEmbedding once = truncate(d, m);
    ASSERT_TRUE(bit_identical(truncate(once, m), once));
  }
}

TEST(InMemoryBundle, ConformsToManifest) {
  Rng rng(12);
  InMemoryBundle b(fixtures::make_manifest(2, {0, 6, 12}, 10));
  b.add(random_sentence("a", 2, 2, rng));
  EXPECT_TRUE(b.contains("a"));
  EXPECT_FALSE(b.contains("b"));
  EXPECT_THROW(b.load("b"), UnknownDoc);
  EXPECT_THROW(b.add(random_sentence("c", 2, 3, rng)), DimensionMismatch);
}

}  // namespace
}  // namespace docprobe

// Copyright 2026 The serbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "ser/embedding_store.hpp"
#include "ser/error.hpp"
#include "ser/rng.hpp"
#include "test_support.hpp"

namespace ser {
namespace {

EmbeddingStore random_store(Rng& rng, std::uint32_t dim, std::size_t count) {
  EmbeddingStore s(dim);
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& x : v) {
      // Raw bit patterns exercise every finite float, not just "nice" values.
      std::uint32_t bits;
      do {
        bits = static_cast<std::uint32_t>(rng.next_u64());
      } while (!std::isfinite(std::bit_cast<float>(bits)));
      x = std::bit_cast<float>(bits);
    }
    s.add("utt/" + std::to_string(i) + "/" + std::to_string(rng.next_u64() % 1000), v);
  }
  return s;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Internal;
}

TEST(EmbeddingStore, HeaderLayoutIsLittleEndian) {
  EmbeddingStore s(2);
  const float v[] = {1.0f, -2.5f};
  s.add("ab", v);
  const auto bytes = serialize_store(s);
  ASSERT_EQ(bytes.size(), 8u + 4 + 8 + 2 + 2 + 8);
  EXPECT_EQ(std::memcmp(bytes.data(), "SEREMB01", 8), 0);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[9] | bytes[10] | bytes[11], 0);
  EXPECT_EQ(bytes[12], 1);
  EXPECT_EQ(bytes[20], 2);
  EXPECT_EQ(bytes[21], 0);
  EXPECT_EQ(bytes[22], 'a');
  // 1.0f = 0x3F800000
  EXPECT_EQ(bytes[24], 0x00);
  EXPECT_EQ(bytes[27], 0x3F);
  EXPECT_EQ(bytes.size(), s.byte_size());
}

TEST(EmbeddingStore, RandomStoresRoundTripBitExactly) {
  Rng rng(20261016);
  testing::TempDir dir;
  for (int trial = 0; trial < 100; ++trial) {
    const auto dim = static_cast<std::uint32_t>(1 + rng.uniform_index(512));
    const auto count = static_cast<std::size_t>(rng.uniform_index(1001));
    const EmbeddingStore s = random_store(rng, dim, count);
    const auto path = dir / ("s" + std::to_string(trial) + ".seremb");
    write_store(s, path);
    const EmbeddingStore back = read_store(path);
    ASSERT_EQ(back.dim(), dim);
    ASSERT_EQ(back.size(), count);
    ASSERT_EQ(back.ids(), s.ids());
    ASSERT_EQ(std::memcmp(back.values().data(), s.values().data(), s.values().size() * sizeof(float)), 0);
    ASSERT_EQ(serialize_store(back), serialize_store(s));
  }
}

TEST(EmbeddingStore, CorruptionIsDetected) {
  EmbeddingStore s(3);
  const float v[] = {1, 2, 3};
  s.add("a", v);
  s.add("b", v);
  const auto good = serialize_store(s);

  auto bad_magic = good;
  bad_magic[7] = '2';
  EXPECT_EQ(kind_of([&] { deserialize_store(bad_magic); }), ErrorKind::BadMagic);
  EXPECT_EQ(kind_of([&] { deserialize_store(std::span(good).first(4)); }), ErrorKind::BadMagic);
  for (std::size_t cut : {12u, 19u, 21u, 30u}) {
    EXPECT_EQ(kind_of([&] { deserialize_store(std::span(good).first(cut)); }), ErrorKind::TruncatedFile) << cut;
  }
  EXPECT_EQ(kind_of([&] { deserialize_store(std::span(good).first(good.size() - 1)); }), ErrorKind::TruncatedFile);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(kind_of([&] { deserialize_store(trailing); }), ErrorKind::TruncatedFile);
  auto huge_count = good;
  huge_count[19] = 0x7F;
  EXPECT_EQ(kind_of([&] { deserialize_store(huge_count); }), ErrorKind::TruncatedFile);
}

TEST(EmbeddingStore, AddValidatesVectors) {
  EmbeddingStore s(2);
  const float ok[] = {0, 1};
  const float short_v[] = {0};
  const float nan_v[] = {0, std::numeric_limits<float>::quiet_NaN()};
  s.add("x", ok);
  EXPECT_EQ(kind_of([&] { s.add("x", ok); }), ErrorKind::DuplicateId);
  EXPECT_EQ(kind_of([&] { s.add("y", short_v); }), ErrorKind::InvalidVector);
  EXPECT_EQ(kind_of([&] { s.add("z", nan_v); }), ErrorKind::InvalidVector);
  EXPECT_EQ(s.find("x"), 0);
  EXPECT_EQ(s.find("nope"), -1);
}

TEST(EmbeddingStore, ZeroCountStore) {
  const EmbeddingStore s(7);
  const auto bytes = serialize_store(s);
  EXPECT_EQ(bytes.size(), kEmbeddingHeaderSize);
  EXPECT_EQ(deserialize_store(bytes), s);
}

TEST(EmbeddingStore, JoinAndMerge) {
  EmbeddingStore a(2), b(2), c(3);
  const float v2[] = {1, 2};
  const float v3[] = {1, 2, 3};
  a.add("D/s/1.wav", v2);
  b.add("D/s/2.wav", v2);
  b.add("D/s/9.wav", v2);
  c.add("x", v3);
  const std::vector<EmbeddingStore> ab = {a, b};
  const EmbeddingStore merged = merge_stores(ab);
  EXPECT_EQ(merged.size(), 3u);
  const std::vector<EmbeddingStore> ac = {a, c};
  EXPECT_EQ(kind_of([&] { merge_stores(ac); }), ErrorKind::DimMismatch);

  std::vector<UtteranceRecord> manifest = {testing::make_record("D", "s", "2.wav", EmotionLabel::sad),
                                           testing::make_record("D", "s", "1.wav", EmotionLabel::sad),
                                           testing::make_record("D", "s", "3.wav", EmotionLabel::sad)};
  const JoinResult j = join(manifest, merged);
  ASSERT_EQ(j.pairs.size(), 2u);
  EXPECT_EQ(j.pairs[0].first.id, "D/s/2.wav");
  EXPECT_EQ(j.pairs[1].first.id, "D/s/1.wav");
  EXPECT_EQ(j.manifest_only, 1u);
  EXPECT_EQ(j.store_only, 1u);
}

}  // namespace
}  // namespace ser

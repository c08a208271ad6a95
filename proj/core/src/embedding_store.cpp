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

#include "ser/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "ser/error.hpp"

namespace ser {

namespace {

template <typename T>
T get_le(const std::uint8_t* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i);
  return static_cast<T>(u);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorKind::TruncatedFile, std::string("file ends inside ") + what + " at byte " + std::to_string(pos_));
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

EmbeddingStore::EmbeddingStore(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) fail(ErrorKind::InvalidVector, "embedding dimension must be positive");
}

void EmbeddingStore::add(std::string id, std::span<const float> vector) {
  if (vector.size() != dim_) {
    fail(ErrorKind::InvalidVector, id + ": expected " + std::to_string(dim_) + " components, got " +
                                       std::to_string(vector.size()));
  }
  for (std::size_t k = 0; k < vector.size(); ++k) {
    if (!std::isfinite(vector[k])) fail(ErrorKind::InvalidVector, id + ": component " + std::to_string(k) + " is not finite");
  }
  if (id.size() > UINT16_MAX) fail(ErrorKind::InvalidVector, "id longer than 65535 bytes");
  if (!index_.emplace(id, ids_.size()).second) fail(ErrorKind::DuplicateId, "duplicate embedding id " + id);
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

std::ptrdiff_t EmbeddingStore::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::size_t EmbeddingStore::byte_size() const {
  std::size_t total = kEmbeddingHeaderSize;
  for (const auto& id : ids_) total += 2 + id.size() + 4 * static_cast<std::size_t>(dim_);
  return total;
}

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store) {
  std::vector<std::uint8_t> out(store.byte_size());
  std::uint8_t* p = out.data();
  auto put = [&p]<typename T>(T v) {
    for (std::size_t b = 0; b < sizeof(T); ++b) *p++ = static_cast<std::uint8_t>(v >> (8 * b));
  };
  std::memcpy(p, kEmbeddingMagic, sizeof kEmbeddingMagic);
  p += sizeof kEmbeddingMagic;
  put(store.dim());
  put(static_cast<std::uint64_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& id = store.id(i);
    put(static_cast<std::uint16_t>(id.size()));
    std::memcpy(p, id.data(), id.size());
    p += id.size();
    for (float v : store.vector(i)) put(std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kEmbeddingMagic || std::memcmp(bytes.data(), kEmbeddingMagic, sizeof kEmbeddingMagic) != 0) {
    fail(ErrorKind::BadMagic, "missing SEREMB01 magic");
  }
  Reader reader(bytes);
  reader.take(sizeof kEmbeddingMagic, "magic");
  const auto dim = get_le<std::uint32_t>(reader.take(4, "header"));
  const auto count = get_le<std::uint64_t>(reader.take(8, "header"));
  if (dim == 0) fail(ErrorKind::InvalidVector, "header declares dim 0");
  // Each entry needs at least 2 + 4*dim bytes; reject absurd counts before allocating.
  if (count > reader.remaining() / (2 + 4 * static_cast<std::uint64_t>(dim))) {
    fail(ErrorKind::TruncatedFile, "header declares " + std::to_string(count) + " entries but file is too short");
  }

  EmbeddingStore store(dim);
  std::vector<float> vec(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(reader.take(2, "id length"));
    const auto* id = reader.take(len, "id");
    const auto* body = reader.take(4 * static_cast<std::size_t>(dim), "vector");
    for (std::uint32_t k = 0; k < dim; ++k) vec[k] = std::bit_cast<float>(get_le<std::uint32_t>(body + 4 * k));
    store.add(std::string(reinterpret_cast<const char*>(id), len), vec);
  }
  if (reader.remaining() != 0) {
    fail(ErrorKind::TruncatedFile, "count mismatch: " + std::to_string(reader.remaining()) + " trailing bytes");
  }
  return store;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  const auto bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "write failed: " + path.string());
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_store(bytes);
}

JoinResult join(std::span<const UtteranceRecord> manifest, const EmbeddingStore& store) {
  JoinResult result;
  std::unordered_set<std::string> matched;
  for (const auto& record : manifest) {
    const auto idx = store.find(record.id);
    if (idx < 0) {
      ++result.manifest_only;
      continue;
    }
    matched.insert(record.id);
    auto v = store.vector(static_cast<std::size_t>(idx));
    result.pairs.emplace_back(record, std::vector<float>(v.begin(), v.end()));
  }
  result.store_only = store.size() - matched.size();
  return result;
}

EmbeddingStore merge_stores(std::span<const EmbeddingStore> stores) {
  if (stores.empty()) fail(ErrorKind::InvalidArgument, "no stores to merge");
  EmbeddingStore merged(stores.front().dim());
  for (const auto& s : stores) {
    if (s.dim() != merged.dim()) {
      fail(ErrorKind::DimMismatch, "cannot mix stores of dim " + std::to_string(merged.dim()) + " and " +
                                       std::to_string(s.dim()));
    }
    for (std::size_t i = 0; i < s.size(); ++i) merged.add(s.id(i), s.vector(i));
  }
  return merged;
}

}  // namespace ser

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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ser/record.hpp"

namespace ser {

/// Fixed-dimension float32 vectors keyed by utterance id, in insertion order.
///
/// On disk (little-endian, no padding):
///   "SEREMB01" | u32 dim | u64 count | count x (u16 id_len | id bytes | dim x f32)
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::uint32_t dim);

  /// Throws InvalidVector on wrong length or non-finite components and
  /// DuplicateId on a repeated id.
  void add(std::string id, std::span<const float> vector);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  /// Index of `id`, or -1.
  std::ptrdiff_t find(const std::string& id) const;

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& values() const { return values_; }

  /// Exact serialized size in bytes.
  std::size_t byte_size() const;

  bool operator==(const EmbeddingStore& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && values_ == other.values_;
  }

 private:
  std::uint32_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr char kEmbeddingMagic[8] = {'S', 'E', 'R', 'E', 'M', 'B', '0', '1'};
inline constexpr std::size_t kEmbeddingHeaderSize = 8 + 4 + 8;

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store);
/// Throws BadMagic, TruncatedFile or InvalidVector.
EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes);

void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);

struct JoinResult {
  std::vector<std::pair<UtteranceRecord, std::vector<float>>> pairs;  // manifest order
  std::size_t manifest_only = 0;
  std::size_t store_only = 0;
};

/// Inner join on id.
JoinResult join(std::span<const UtteranceRecord> manifest, const EmbeddingStore& store);

/// Concatenates stores of equal dimension. Throws DimMismatch otherwise.
EmbeddingStore merge_stores(std::span<const EmbeddingStore> stores);

}  // namespace ser

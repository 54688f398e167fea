// Copyright 2026 SpikeStream Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spikestream/tensor.hpp"

namespace spikestream::io {

// All multi-byte integers are little-endian on disk. Readers validate before
// trusting any length field; corrupt input raises format errors with offsets,
// never crashes.

// ---- TensorFile ----------------------------------------------------------
// magic "SCLT" | version u32 | rank u32 | extents rank*u32 | payload f32[]

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

void append_tensor_bytes(std::vector<uint8_t>& out, const Tensor& t);
Tensor parse_tensor_bytes(const uint8_t* data, size_t size, size_t& offset);

// ---- StoreFile -----------------------------------------------------------
// magic "SCST" | version u32 | kind u8 | dim u32 | count u32 |
// count * { id_len u16 | id bytes | dim * f32 }

enum class StoreKind : uint8_t {
  kImageEmbedding = 0,
  kTextEmbedding = 1,
  kClassProbabilities = 2,
};

const char* store_kind_name(StoreKind kind);

/**
 * Id-keyed float records of one common dimension. Probability stores are
 * validated on load: entries nonnegative and each record summing to 1 within
 * 1e-5. Read-only once loaded; training never writes teacher vectors.
 */
class TeacherStore {
 public:
  TeacherStore() = default;
  TeacherStore(StoreKind kind, uint32_t dim) : kind_(kind), dim_(dim) {}

  StoreKind kind() const { return kind_; }
  uint32_t dim() const { return dim_; }
  size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  void add(const std::string& id, const std::vector<float>& vec);
  const float* find(const std::string& id) const;  // nullptr when absent
  const float* require(const std::string& id) const;
  Tensor vector_of(const std::string& id) const;

  void validate() const;

 private:
  StoreKind kind_ = StoreKind::kImageEmbedding;
  uint32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<float> values_;
};

void write_store(const std::string& path, const TeacherStore& store);
TeacherStore read_store(const std::string& path);

// ---- Checkpoint ----------------------------------------------------------
// magic "SCCK" | version u32 | config_len u32 | config bytes |
// param_count u32 | count * { name_len u16 | name | blob_len u32 | SCLT blob }
// | fnv1a64 over everything before the trailer

struct Checkpoint {
  std::string config_text;  // resolved config snapshot of the producing run
  std::vector<std::pair<std::string, Tensor>> params;
  uint64_t content_hash = 0;  // filled on write/read

  const Tensor* find(const std::string& name) const;
  const Tensor& require(const std::string& name) const;
};

void write_checkpoint(const std::string& path, Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

uint64_t fnv1a64(const uint8_t* data, size_t size);

// ---- Dataset manifests ---------------------------------------------------
// UTF-8 lines: id <TAB> tensorfile-path <TAB> class-index. Iteration follows
// manifest order; tensors are read lazily per item.

struct DatasetItem {
  std::string id;
  std::string tensor_path;
  int64_t label = 0;
};

// num_classes < 0 skips the range check.
std::vector<DatasetItem> load_manifest(const std::string& path,
                                       int64_t num_classes);
Tensor load_item_tensor(const DatasetItem& item);

// Plain UTF-8 text lines, trailing '\r' stripped, empty lines dropped.
std::vector<std::string> read_lines(const std::string& path);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<uint8_t>& bytes);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace spikestream::io

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

#include "spikestream/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spikestream/error.hpp"

namespace spikestream::io {

namespace {

constexpr uint32_t kTensorVersion = 1;
constexpr uint32_t kStoreVersion = 1;
constexpr uint32_t kCheckpointVersion = 1;
constexpr uint32_t kMaxRank = 8;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Bounds-checked cursor; every failure names the field and offset.
class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  size_t offset() const { return off_; }
  size_t remaining() const { return size_ - off_; }

  void need(size_t n, const char* what) const {
    if (size_ - off_ < n)
      throw format_error(std::string("truncated ") + what + " at offset " +
                         std::to_string(off_) + ": expected " +
                         std::to_string(n) + " bytes, have " +
                         std::to_string(size_ - off_));
  }

  uint8_t u8(const char* what) {
    need(1, what);
    return data_[off_++];
  }

  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(data_[off_]) |
                 static_cast<uint16_t>(data_[off_ + 1]) << 8;
    off_ += 2;
    return v;
  }

  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[off_ + i]) << (8 * i);
    off_ += 4;
    return v;
  }

  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[off_ + i]) << (8 * i);
    off_ += 8;
    return v;
  }

  float f32(const char* what) {
    const uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str(size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_ + off_), n);
    off_ += n;
    return s;
  }

  void expect_magic(const char* magic) {
    need(4, "magic");
    if (std::memcmp(data_ + off_, magic, 4) != 0)
      throw format_error(std::string("bad magic, expected \"") + magic + "\"");
    off_ += 4;
  }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t off_ = 0;
};

}  // namespace

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::string& path,
                      const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("short write to " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  out << text;
  if (!out) throw data_error("short write to " + path);
}

void append_tensor_bytes(std::vector<uint8_t>& out, const Tensor& t) {
  out.push_back('S');
  out.push_back('C');
  out.push_back('L');
  out.push_back('T');
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<uint32_t>(t.rank()));
  for (int64_t e : t.shape) put_u32(out, static_cast<uint32_t>(e));
  for (float v : t.data) put_f32(out, v);
}

Tensor parse_tensor_bytes(const uint8_t* data, size_t size, size_t& offset) {
  ByteReader r(data + offset, size - offset);
  r.expect_magic("SCLT");
  const uint32_t version = r.u32("version");
  if (version != kTensorVersion)
    throw format_error("unsupported tensor version " + std::to_string(version));
  const uint32_t rank = r.u32("rank");
  if (rank == 0 || rank > kMaxRank)
    throw format_error("tensor rank " + std::to_string(rank) +
                       " outside (0, " + std::to_string(kMaxRank) + "]");
  std::vector<int64_t> shape(rank);
  uint64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t e = r.u32("extent");
    if (e == 0) throw format_error("zero extent in tensor shape");
    numel *= e;
    if (numel > (1ull << 31)) throw format_error("tensor too large");
    shape[i] = e;
  }
  r.need(static_cast<size_t>(numel) * 4, "payload");
  Tensor t = Tensor::zeros(shape);
  for (uint64_t i = 0; i < numel; ++i) t.data[i] = r.f32("payload");
  offset += r.offset();
  return t;
}

void write_tensor(const std::string& path, const Tensor& t) {
  std::vector<uint8_t> bytes;
  append_tensor_bytes(bytes, t);
  write_file_bytes(path, bytes);
}

Tensor read_tensor(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  size_t offset = 0;
  Tensor t = parse_tensor_bytes(bytes.data(), bytes.size(), offset);
  if (offset != bytes.size())
    throw format_error("trailing bytes after tensor payload in " + path);
  return t;
}

const char* store_kind_name(StoreKind kind) {
  switch (kind) {
    case StoreKind::kImageEmbedding: return "image_embedding";
    case StoreKind::kTextEmbedding: return "text_embedding";
    case StoreKind::kClassProbabilities: return "class_probabilities";
  }
  return "?";
}

void TeacherStore::add(const std::string& id, const std::vector<float>& vec) {
  if (vec.size() != dim_)
    throw data_error("record \"" + id + "\" has " + std::to_string(vec.size()) +
                     " values, store dim is " + std::to_string(dim_));
  if (index_.count(id)) throw format_error("duplicate store id \"" + id + "\"");
  index_[id] = ids_.size();
  ids_.push_back(id);
  values_.insert(values_.end(), vec.begin(), vec.end());
}

const float* TeacherStore::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return nullptr;
  return values_.data() + it->second * dim_;
}

const float* TeacherStore::require(const std::string& id) const {
  const float* p = find(id);
  if (p == nullptr)
    throw data_error("no " + std::string(store_kind_name(kind_)) +
                     " record for id \"" + id + "\"");
  return p;
}

Tensor TeacherStore::vector_of(const std::string& id) const {
  const float* p = require(id);
  Tensor t = Tensor::zeros({static_cast<int64_t>(dim_)});
  for (uint32_t i = 0; i < dim_; ++i) t.data[i] = p[i];
  return t;
}

void TeacherStore::validate() const {
  if (kind_ != StoreKind::kClassProbabilities) return;
  for (size_t rec = 0; rec < ids_.size(); ++rec) {
    double sum = 0.0;
    for (uint32_t i = 0; i < dim_; ++i) {
      const float v = values_[rec * dim_ + i];
      if (v < 0.0f)
        throw data_error("probability record \"" + ids_[rec] +
                         "\" has a negative entry");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-5)
      throw data_error("probability record \"" + ids_[rec] +
                       "\" sums to " + std::to_string(sum));
  }
}

void write_store(const std::string& path, const TeacherStore& store) {
  std::vector<uint8_t> bytes;
  bytes.push_back('S');
  bytes.push_back('C');
  bytes.push_back('S');
  bytes.push_back('T');
  put_u32(bytes, kStoreVersion);
  bytes.push_back(static_cast<uint8_t>(store.kind()));
  put_u32(bytes, store.dim());
  put_u32(bytes, static_cast<uint32_t>(store.size()));
  for (const std::string& id : store.ids()) {
    if (id.size() > 0xffff) throw data_error("store id too long: " + id);
    put_u16(bytes, static_cast<uint16_t>(id.size()));
    bytes.insert(bytes.end(), id.begin(), id.end());
    const float* v = store.find(id);
    for (uint32_t i = 0; i < store.dim(); ++i) put_f32(bytes, v[i]);
  }
  write_file_bytes(path, bytes);
}

TeacherStore read_store(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size());
  r.expect_magic("SCST");
  const uint32_t version = r.u32("version");
  if (version != kStoreVersion)
    throw format_error("unsupported store version " + std::to_string(version));
  const uint8_t kind = r.u8("kind");
  if (kind > 2)
    throw format_error("unknown store kind tag " + std::to_string(kind));
  const uint32_t dim = r.u32("dim");
  if (dim == 0 || dim > (1u << 24)) throw format_error("implausible store dim");
  const uint32_t count = r.u32("count");

  TeacherStore store(static_cast<StoreKind>(kind), dim);
  for (uint32_t rec = 0; rec < count; ++rec) {
    const uint16_t id_len = r.u16("id length");
    const std::string id = r.str(id_len, "id");
    std::vector<float> vec(dim);
    r.need(static_cast<size_t>(dim) * 4, "record payload");
    for (uint32_t i = 0; i < dim; ++i) vec[i] = r.f32("record payload");
    store.add(id, vec);
  }
  if (r.remaining() != 0)
    throw format_error("trailing bytes after " + std::to_string(count) +
                       " records in " + path);
  store.validate();
  return store;
}

uint64_t fnv1a64(const uint8_t* data, size_t size) {
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : params)
    if (n == name) return &t;
  return nullptr;
}

const Tensor& Checkpoint::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw data_error("checkpoint has no parameter " + name);
  return *t;
}

void write_checkpoint(const std::string& path, Checkpoint& ckpt) {
  std::vector<uint8_t> bytes;
  bytes.push_back('S');
  bytes.push_back('C');
  bytes.push_back('C');
  bytes.push_back('K');
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<uint32_t>(ckpt.config_text.size()));
  bytes.insert(bytes.end(), ckpt.config_text.begin(), ckpt.config_text.end());
  put_u32(bytes, static_cast<uint32_t>(ckpt.params.size()));
  for (const auto& [name, tensor] : ckpt.params) {
    if (name.size() > 0xffff) throw data_error("parameter name too long");
    put_u16(bytes, static_cast<uint16_t>(name.size()));
    bytes.insert(bytes.end(), name.begin(), name.end());
    std::vector<uint8_t> blob;
    append_tensor_bytes(blob, tensor);
    put_u32(bytes, static_cast<uint32_t>(blob.size()));
    bytes.insert(bytes.end(), blob.begin(), blob.end());
  }
  ckpt.content_hash = fnv1a64(bytes.data(), bytes.size());
  put_u64(bytes, ckpt.content_hash);
  write_file_bytes(path, bytes);
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() < 8) throw format_error("checkpoint shorter than its hash");
  const uint64_t stored_hash = [&] {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    return v;
  }();
  const uint64_t actual = fnv1a64(bytes.data(), bytes.size() - 8);
  if (actual != stored_hash)
    throw format_error("checkpoint hash mismatch in " + path);

  ByteReader r(bytes.data(), bytes.size() - 8);
  r.expect_magic("SCCK");
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw format_error("unsupported checkpoint version " +
                       std::to_string(version));
  Checkpoint ckpt;
  const uint32_t cfg_len = r.u32("config length");
  ckpt.config_text = r.str(cfg_len, "config snapshot");
  const uint32_t count = r.u32("parameter count");
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16("parameter name length");
    std::string name = r.str(name_len, "parameter name");
    for (const auto& [existing, t] : ckpt.params)
      if (existing == name)
        throw format_error("duplicate checkpoint parameter " + name);
    const uint32_t blob_len = r.u32("tensor blob length");
    r.need(blob_len, "tensor blob");
    const size_t blob_start = r.offset();
    size_t off = blob_start;
    Tensor t = parse_tensor_bytes(bytes.data(), blob_start + blob_len, off);
    if (off != blob_start + blob_len)
      throw format_error("tensor blob length mismatch for " + name);
    ckpt.params.emplace_back(std::move(name), std::move(t));
    r.str(blob_len, "tensor blob");  // advance past the blob
  }
  if (r.remaining() != 0)
    throw format_error("trailing bytes in checkpoint " + path);
  ckpt.content_hash = stored_hash;
  return ckpt;
}

std::vector<DatasetItem> load_manifest(const std::string& path,
                                       int64_t num_classes) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open manifest " + path);
  std::vector<DatasetItem> items;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos
                                              : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw data_error("manifest line " + std::to_string(line_no) +
                       " is not id<TAB>path<TAB>class");
    DatasetItem item;
    item.id = line.substr(0, t1);
    item.tensor_path = line.substr(t1 + 1, t2 - t1 - 1);
    try {
      item.label = std::stoll(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw data_error("manifest line " + std::to_string(line_no) +
                       " has a non-numeric class index");
    }
    if (item.label < 0 || (num_classes >= 0 && item.label >= num_classes))
      throw data_error("class index " + std::to_string(item.label) +
                       " out of range for item " + item.id);
    items.push_back(std::move(item));
  }
  return items;
}

Tensor load_item_tensor(const DatasetItem& item) {
  return read_tensor(item.tensor_path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace spikestream::io

// Copyright 2026 The PST2 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pst2/formats.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pst2/errors.h"

namespace pst2 {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

constexpr char kSeqMagic[4] = {'P', 'S', 'T', 'S'};
constexpr char kCkptMagic[4] = {'P', 'S', 'T', 'W'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, const char* what) : in_(in), what_(what) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > in_.size() - pos_) {
      throw IoError(std::string(what_) + ": truncated input at byte " + std::to_string(pos_));
    }
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  const char* what_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
  if (std::memcmp(r.take(4), magic, 4) != 0) throw IoError(std::string(what) + ": bad magic");
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw IoError(std::string(what) + ": value does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

void put_f32(Writer& w, const Tensor& t) {
  const Tensor f = t.astype(DType::kFloat32);
  w.bytes(f.data<float>().data(), f.numel() * sizeof(float));
}

Tensor get_f32(Reader& r, Shape shape) {
  Tensor t(std::move(shape), DType::kFloat32);
  const std::size_t n = t.numel() * sizeof(float);
  if (n > 0) std::memcpy(t.mutable_data<float>().data(), r.take(n), n);
  return t;
}

}  // namespace

std::string encode_sequence(const PointCloudSequence& seq) {
  const std::size_t n = seq.frames.empty() ? 0 : seq.frames[0].size();
  const std::size_t fw = seq.feat_width();
  for (const auto& f : seq.frames) {
    if (f.size() != n || f.feat_width() != fw) {
      throw ContractError("encode_sequence: frames differ in point count or feature width");
    }
    if (seq.num_classes > 0 && !f.labels) {
      throw ContractError("encode_sequence: labeled sequence has a frame without labels");
    }
  }
  if (seq.num_classes > 0x10000) throw ContractError("encode_sequence: too many classes for u16 labels");
  Writer w;
  w.bytes(kSeqMagic, 4);
  w.put<std::uint16_t>(kSequenceFileVersion);
  w.put<std::uint32_t>(to_u32(seq.frames.size(), "encode_sequence"));
  w.put<std::uint32_t>(to_u32(n, "encode_sequence"));
  w.put<std::uint32_t>(to_u32(fw, "encode_sequence"));
  w.put<std::uint32_t>(to_u32(seq.num_classes, "encode_sequence"));
  for (const auto& f : seq.frames) {
    put_f32(w, f.coords);
    if (fw > 0) put_f32(w, f.feats);
    if (seq.num_classes > 0) {
      for (std::int32_t l : *f.labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= seq.num_classes) {
          throw ContractError("encode_sequence: label out of range");
        }
        w.put<std::uint16_t>(static_cast<std::uint16_t>(l));
      }
    }
  }
  return w.take();
}

PointCloudSequence decode_sequence(const std::string& bytes) {
  Reader r(bytes, "decode_sequence");
  check_magic(r, kSeqMagic, "decode_sequence");
  const auto version = r.get<std::uint16_t>();
  if (version != kSequenceFileVersion) {
    throw IoError("decode_sequence: unsupported version " + std::to_string(version));
  }
  const std::size_t t = r.get<std::uint32_t>();
  const std::size_t n = r.get<std::uint32_t>();
  const std::size_t fw = r.get<std::uint32_t>();
  PointCloudSequence seq;
  seq.num_classes = r.get<std::uint32_t>();
  const std::size_t frame_bytes = n * (3 + fw) * 4 + (seq.num_classes > 0 ? n * 2 : 0);
  if (frame_bytes > 0 && t > bytes.size() / frame_bytes) throw IoError("decode_sequence: truncated input");
  for (std::size_t i = 0; i < t; ++i) {
    PointCloudFrame f;
    f.coords = get_f32(r, {n, 3});
    f.feats = get_f32(r, {n, fw});
    if (seq.num_classes > 0) {
      std::vector<std::int32_t> labels(n);
      for (auto& l : labels) {
        l = r.get<std::uint16_t>();
        if (static_cast<std::size_t>(l) >= seq.num_classes) {
          throw IoError("decode_sequence: label out of range");
        }
      }
      f.labels = std::move(labels);
    }
    seq.frames.push_back(std::move(f));
  }
  if (!r.done()) throw IoError("decode_sequence: trailing bytes");
  return seq;
}

void write_sequence_file(const std::filesystem::path& path, const PointCloudSequence& seq) {
  write_file_atomic(path, encode_sequence(seq));
}

PointCloudSequence read_sequence_file(const std::filesystem::path& path) {
  return decode_sequence(read_file(path));
}

Checkpoint make_checkpoint(std::string config_text, std::span<Param* const> params) {
  Checkpoint c;
  c.config_text = std::move(config_text);
  for (const Param* p : params) c.params.emplace_back(p->name, p->value.astype(DType::kFloat32));
  return c;
}

void load_checkpoint_into(const Checkpoint& ckpt, std::span<Param* const> params) {
  for (Param* p : params) {
    const Tensor* found = nullptr;
    for (const auto& [name, value] : ckpt.params) {
      if (name == p->name) {
        found = &value;
        break;
      }
    }
    if (found == nullptr) throw IoError("checkpoint has no parameter '" + p->name + "'");
    if (found->shape() != p->value.shape()) {
      throw IoError("checkpoint parameter '" + p->name + "' has shape " +
                    shape_to_string(found->shape()) + ", expected " +
                    shape_to_string(p->value.shape()));
    }
    p->value = found->astype(p->value.dtype());
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCkptMagic, 4);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint32_t>(to_u32(ckpt.config_text.size(), "encode_checkpoint"));
  w.bytes(ckpt.config_text.data(), ckpt.config_text.size());
  w.put<std::uint32_t>(to_u32(ckpt.params.size(), "encode_checkpoint"));
  for (const auto& [name, value] : ckpt.params) {
    if (name.size() > 0xFFFF) throw ContractError("encode_checkpoint: parameter name too long");
    if (value.rank() > 255) throw ContractError("encode_checkpoint: rank too large");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(value.rank()));
    for (std::size_t d : value.shape()) w.put<std::uint32_t>(to_u32(d, "encode_checkpoint"));
    put_f32(w, value);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes, "decode_checkpoint");
  check_magic(r, kCkptMagic, "decode_checkpoint");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw IoError("decode_checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  const std::size_t text_len = r.get<std::uint32_t>();
  c.config_text.assign(r.take(text_len), text_len);
  const std::size_t count = r.get<std::uint32_t>();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = r.get<std::uint16_t>();
    std::string name(r.take(len), len);
    const std::size_t rank = r.get<std::uint8_t>();
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.get<std::uint32_t>();
      if (d != 0 && numel > bytes.size() / d) throw IoError("decode_checkpoint: truncated input");
      numel *= d;
    }
    c.params.emplace_back(std::move(name), get_f32(r, std::move(shape)));
  }
  if (!r.done()) throw IoError("decode_checkpoint: trailing bytes");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pst2

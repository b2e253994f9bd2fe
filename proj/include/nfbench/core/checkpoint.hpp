#pragma once

// Binary checkpoint container.
//
// Layout (all integers little-endian):
//   magic   8 bytes  "NFBCKPT\0"
//   version u32      currently 1
//   records until EOF, each:
//     name_len u32
//     name     name_len bytes (UTF-8, no terminator)
//     rank     u32
//     extents  rank x u32
//     values   product(extents) x f32   (rank 0 means a single scalar)
//
// A ParamStore named <prefix> contributes, per parameter <p>:
//   <prefix>/p/<p>  values
//   <prefix>/m/<p>  Adam first moment
//   <prefix>/v/<p>  Adam second moment
// plus one scalar record <prefix>/t holding the Adam step counter.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nfbench/core/param_store.hpp"
#include "nfbench/core/tensor.hpp"

namespace nfbench {

namespace ckpt_detail {

constexpr char kMagic[8] = {'N', 'F', 'B', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
      (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  return true;
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(os, bits);
}

inline bool get_f32(std::istream& is, float& f) {
  std::uint32_t bits;
  if (!get_u32(is, bits)) return false;
  std::memcpy(&f, &bits, 4);
  return true;
}

}  // namespace ckpt_detail

struct CheckpointRecord {
  Shape shape;  // empty = scalar
  std::vector<float> values;
};

class CheckpointWriter {
 public:
  explicit CheckpointWriter(const std::string& path)
      : os_(path, std::ios::binary) {
    require(os_.good(), "checkpoint: cannot open '" + path + "' for writing");
    os_.write(ckpt_detail::kMagic, 8);
    ckpt_detail::put_u32(os_, ckpt_detail::kVersion);
  }

  void add(const std::string& name, const Shape& shape, const float* values,
           std::size_t count) {
    ckpt_detail::put_u32(os_, static_cast<std::uint32_t>(name.size()));
    os_.write(name.data(), static_cast<std::streamsize>(name.size()));
    ckpt_detail::put_u32(os_, static_cast<std::uint32_t>(shape.size()));
    for (int e : shape) ckpt_detail::put_u32(os_, static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < count; ++i) ckpt_detail::put_f32(os_, values[i]);
  }

  void add_scalar(const std::string& name, float v) { add(name, {}, &v, 1); }

  template <typename T>
  void add_tensor(const std::string& name, const Tensor<T>& t) {
    if constexpr (std::is_same_v<T, float>) {
      add(name, t.shape(), t.data(), t.size());
    } else {
      std::vector<float> tmp(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        tmp[i] = static_cast<float>(t[i]);
      add(name, t.shape(), tmp.data(), tmp.size());
    }
  }

  template <typename T>
  void add_store(const std::string& prefix, const ParamStore<T>& store) {
    for (std::size_t i = 0; i < store.entry_count(); ++i) {
      const auto& e = store.entry_at(i);
      add_tensor(prefix + "/p/" + e.name, e.value);
      add_tensor(prefix + "/m/" + e.name, e.m);
      add_tensor(prefix + "/v/" + e.name, e.v);
    }
    add_scalar(prefix + "/t", static_cast<float>(store.step_count()));
  }

  void close() { os_.close(); }

 private:
  std::ofstream os_;
};

class Checkpoint {
 public:
  static Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "checkpoint: cannot open '" + path + "'");
    char magic[8];
    require(bool(is.read(magic, 8)) &&
                std::memcmp(magic, ckpt_detail::kMagic, 8) == 0,
            "checkpoint: bad magic in '" + path + "'");
    std::uint32_t version = 0;
    require(ckpt_detail::get_u32(is, version) && version == ckpt_detail::kVersion,
            "checkpoint: unsupported version in '" + path + "'");
    Checkpoint ck;
    std::uint32_t name_len = 0;
    while (ckpt_detail::get_u32(is, name_len)) {
      std::string name(name_len, '\0');
      require(bool(is.read(name.data(), name_len)),
              "checkpoint: truncated record name in '" + path + "'");
      std::uint32_t rank = 0;
      require(ckpt_detail::get_u32(is, rank),
              "checkpoint: truncated record '" + name + "'");
      CheckpointRecord rec;
      std::size_t count = 1;
      for (std::uint32_t r = 0; r < rank; ++r) {
        std::uint32_t e = 0;
        require(ckpt_detail::get_u32(is, e),
                "checkpoint: truncated extents in record '" + name + "'");
        rec.shape.push_back(static_cast<int>(e));
        count *= e;
      }
      rec.values.resize(count);
      for (std::size_t i = 0; i < count; ++i)
        require(ckpt_detail::get_f32(is, rec.values[i]),
                "checkpoint: truncated values in record '" + name + "'");
      ck.records_[name] = std::move(rec);
    }
    return ck;
  }

  bool has(const std::string& name) const { return records_.count(name) > 0; }

  const CheckpointRecord& record(const std::string& name) const {
    auto it = records_.find(name);
    require(it != records_.end(), "checkpoint: no record '" + name + "'");
    return it->second;
  }

  template <typename T>
  void restore_store(const std::string& prefix, ParamStore<T>& store) const {
    for (std::size_t i = 0; i < store.entry_count(); ++i) {
      auto& e = store.entry_at(i);
      restore_tensor(prefix + "/p/" + e.name, e.value);
      restore_tensor(prefix + "/m/" + e.name, e.m);
      restore_tensor(prefix + "/v/" + e.name, e.v);
    }
    store.set_step_count(
        static_cast<std::int64_t>(record(prefix + "/t").values.at(0)));
  }

  template <typename T>
  void restore_tensor(const std::string& name, Tensor<T>& t) const {
    const CheckpointRecord& rec = record(name);
    require(rec.values.size() == t.size(),
            "checkpoint: record '" + name + "' has " +
                std::to_string(rec.values.size()) + " values, expected " +
                std::to_string(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<T>(rec.values[i]);
  }

  const std::map<std::string, CheckpointRecord>& records() const {
    return records_;
  }

 private:
  std::map<std::string, CheckpointRecord> records_;
};

}  // namespace nfbench

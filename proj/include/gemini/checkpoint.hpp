#pragma once

// Parameter checkpoint:
//   "GEMNCKPT" | u32 version | u64 config fingerprint | u32 tensor count
//   per tensor: u32 name length | name | u32 rows | u32 cols | rows*cols f64 (column-major)
// All integers and floats little-endian.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "gemini/config.hpp"
#include "gemini/error.hpp"
#include "gemini/io.hpp"
#include "gemini/model.hpp"

namespace gemini {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'G', 'E', 'M', 'N', 'C', 'K', 'P', 'T'};

namespace detail {

template <typename T>
void put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
public:
  Reader(const std::string &data, std::string origin) : data_(data), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ValidationError(origin_ + ": truncated checkpoint");
  }
  const std::string &data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_params(const ModelParams &p, std::uint64_t config_fingerprint) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put(out, kCheckpointVersion);
  detail::put(out, config_fingerprint);
  std::uint32_t count = 0;
  for_each_param(p, [&](const std::string &, const Tensor2 &) { ++count; });
  detail::put(out, count);
  for_each_param(p, [&](const std::string &name, const Tensor2 &t) {
    detail::put(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put(out, static_cast<std::uint32_t>(t.value.rows()));
    detail::put(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) detail::put(out, t.value.data()[i]);
  });
  return out;
}

// Fills parameters shaped for `cfg`; names, shapes and fingerprint must match.
inline ModelParams deserialize_params(const std::string &data, const ModelConfig &cfg,
                                      const std::string &origin = "checkpoint") {
  detail::Reader r(data, origin);
  if (r.bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic)))
    throw ValidationError(origin + ": not a checkpoint file");
  if (auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
    throw ValidationError(origin + ": unsupported checkpoint version " + std::to_string(v));
  if (r.get<std::uint64_t>() != fingerprint(cfg))
    throw ValidationError(origin + ": checkpoint was written for a different configuration");

  ModelParams p = allocate_params(cfg);
  std::uint32_t expected = 0;
  for_each_param(p, [&](const std::string &, const Tensor2 &) { ++expected; });
  if (r.get<std::uint32_t>() != expected) throw ValidationError(origin + ": tensor count mismatch");

  for_each_param(p, [&](const std::string &name, Tensor2 &t) {
    const auto len = r.get<std::uint32_t>();
    if (r.bytes(len) != name) throw ValidationError(origin + ": expected tensor '" + name + "'");
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows != t.value.rows() || cols != t.value.cols())
      throw ValidationError(origin + ": shape mismatch for '" + name + "'");
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.get<double>();
  });
  if (!r.done()) throw ValidationError(origin + ": trailing bytes after last tensor");
  return p;
}

inline void save_checkpoint(const ModelParams &p, const ModelConfig &cfg, const std::filesystem::path &path) {
  detail::write_text_file(path, serialize_params(p, fingerprint(cfg)));
}

inline ModelParams load_checkpoint(const std::filesystem::path &path, const ModelConfig &cfg) {
  return deserialize_params(detail::read_text_file(path), cfg, path.string());
}

} // namespace gemini

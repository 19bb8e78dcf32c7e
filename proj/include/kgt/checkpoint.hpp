#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgt/kgformer.hpp"

namespace kgt {

enum class CheckpointError { bad_magic, bad_version, truncated, malformed };

inline const char* checkpoint_error_name(CheckpointError e) {
  switch (e) {
    case CheckpointError::bad_magic: return "bad_magic";
    case CheckpointError::bad_version: return "bad_version";
    case CheckpointError::truncated: return "truncated";
    case CheckpointError::malformed: return "malformed";
  }
  return "unknown";
}

class CheckpointIoError : public std::runtime_error {
 public:
  CheckpointIoError(CheckpointError code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  CheckpointError code() const { return code_; }

 private:
  CheckpointError code_;
};

// Binary layout, all little-endian: magic "KGTC", u32 version (1), u32 n_e,
// n_r, d, L, H, d_ff, then every parameter matrix row-major as f32 in
// param_matrices order.
inline constexpr char kCheckpointMagic[4] = {'K', 'G', 'T', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32(std::vector<char>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() {
    if (at_ + 4 > size_)
      throw CheckpointIoError(CheckpointError::truncated,
                              "checkpoint: truncated at byte " + std::to_string(at_));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[at_ + i])) << (8 * i);
    at_ += 4;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  void raw(char* dst, std::size_t n) {
    if (at_ + n > size_)
      throw CheckpointIoError(CheckpointError::truncated,
                              "checkpoint: truncated at byte " + std::to_string(at_));
    std::memcpy(dst, data_ + at_, n);
    at_ += n;
  }

  std::size_t remaining() const { return size_ - at_; }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t at_ = 0;
};

}  // namespace detail

inline void checkpoint_save(const ModelParams& p, const std::string& path) {
  std::vector<char> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 4);
  detail::put_u32(buf, kCheckpointVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(p.entity_count));
  detail::put_u32(buf, static_cast<std::uint32_t>(p.relation_count));
  detail::put_u32(buf, static_cast<std::uint32_t>(p.dim));
  detail::put_u32(buf, static_cast<std::uint32_t>(p.layer_count()));
  detail::put_u32(buf, static_cast<std::uint32_t>(p.heads));
  detail::put_u32(buf, static_cast<std::uint32_t>(p.ff_dim));
  for (const Eigen::MatrixXd* m : param_matrices(p))
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j)
        detail::put_f32(buf, static_cast<float>((*m)(i, j)));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint_save: cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint_save: write failed for " + path);
}

inline ModelParams checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint_load: cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader reader(buf.data(), buf.size());

  char magic[4];
  reader.raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CheckpointIoError(CheckpointError::bad_magic, "checkpoint: bad magic in " + path);
  const std::uint32_t version = reader.u32();
  if (version != kCheckpointVersion)
    throw CheckpointIoError(CheckpointError::bad_version,
                            "checkpoint: unsupported version " + std::to_string(version));

  ModelParams p;
  p.entity_count = static_cast<std::int32_t>(reader.u32());
  p.relation_count = static_cast<std::int32_t>(reader.u32());
  p.dim = static_cast<std::int32_t>(reader.u32());
  const std::int32_t layer_count = static_cast<std::int32_t>(reader.u32());
  p.heads = static_cast<std::int32_t>(reader.u32());
  p.ff_dim = static_cast<std::int32_t>(reader.u32());
  if (p.entity_count <= 0 || p.relation_count < 0 || p.dim <= 0 || layer_count <= 0 ||
      p.heads <= 0 || p.ff_dim <= 0 || p.dim % p.heads != 0)
    throw CheckpointIoError(CheckpointError::malformed,
                            "checkpoint: inconsistent header dimensions");

  const std::int32_t d_h = p.dim / p.heads;
  p.embeddings.resize(p.entity_count + p.relation_count, p.dim);
  p.layers.resize(static_cast<std::size_t>(layer_count));
  for (LayerParams& l : p.layers) {
    for (std::int32_t h = 0; h < p.heads; ++h) {
      l.w_query.emplace_back(p.dim, d_h);
      l.w_key.emplace_back(p.dim, d_h);
      l.w_value.emplace_back(p.dim, d_h);
    }
    l.w_out.resize(p.dim, p.dim);
    l.w_ff1.resize(p.dim, p.ff_dim);
    l.b_ff1.resize(1, p.ff_dim);
    l.w_ff2.resize(p.ff_dim, p.dim);
    l.b_ff2.resize(1, p.dim);
    l.ln_attn_gain.resize(1, p.dim);
    l.ln_attn_bias.resize(1, p.dim);
    l.ln_ff_gain.resize(1, p.dim);
    l.ln_ff_bias.resize(1, p.dim);
  }
  for (Eigen::MatrixXd* m : param_matrices(p))
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j)
        (*m)(i, j) = static_cast<double>(reader.f32());
  if (reader.remaining() != 0)
    throw CheckpointIoError(CheckpointError::malformed,
                            "checkpoint: " + std::to_string(reader.remaining()) +
                                " trailing bytes in " + path);
  return p;
}

}  // namespace kgt

#ifndef VTON_PIPELINE_CHECKPOINT_HPP
#define VTON_PIPELINE_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "vton/nn/optim.hpp"
#include "vton/pipeline/config.hpp"

namespace vton::pipeline {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'V', 'T', 'O', 'N', 'C', 'K', 'P', 'T'};

// A checkpoint is a named bag of float blocks plus run metadata. Weights are
// stored under "param.", batch-norm statistics under "buffer.", optimizer
// moments under "adam1."/"adam2.". Round-trips bit-exactly.
struct Checkpoint {
  std::string stage;
  std::int64_t iteration = 0;
  std::int64_t adam_steps = 0;
  std::uint64_t seed = 0;
  std::uint32_t version = kCheckpointVersion;
  std::string config_json;
  std::vector<std::pair<std::string, Tensor<float>>> blocks;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : blocks)
      if (n == name) return &t;
    return nullptr;
  }

  void add(std::string name, Tensor<float> t) { blocks.emplace_back(std::move(name), std::move(t)); }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_i64(std::ostream& os, std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

inline std::string read_string(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (1ull << 32)) throw DataError("checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace detail

inline void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot write " + path);
  os.write(kCheckpointMagic, 8);
  detail::write_u32(os, version);
  detail::write_string(os, stage);
  detail::write_i64(os, iteration);
  detail::write_i64(os, adam_steps);
  detail::write_u64(os, seed);
  detail::write_string(os, config_json);
  detail::write_u64(os, blocks.size());
  for (const auto& [name, t] : blocks) {
    detail::write_string(os, name);
    detail::write_u32(os, static_cast<std::uint32_t>(t.ndim()));
    for (int d = 0; d < t.ndim(); ++d) detail::write_u32(os, static_cast<std::uint32_t>(t.dim(d)));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!os) throw DataError("checkpoint: write failed for " + path);
}

inline Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IntegrityError("checkpoint: bad magic in " + path);
  Checkpoint c;
  c.version = detail::read_u32(is);
  if (c.version != kCheckpointVersion)
    throw IntegrityError("checkpoint: unsupported format version " + std::to_string(c.version));
  c.stage = detail::read_string(is);
  c.iteration = detail::read_i64(is);
  c.adam_steps = detail::read_i64(is);
  c.seed = detail::read_u64(is);
  c.config_json = detail::read_string(is);
  const std::uint64_t n = detail::read_u64(is);
  if (n > (1u << 20)) throw IntegrityError("checkpoint: implausible block count");
  c.blocks.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = detail::read_string(is);
    const std::uint32_t nd = detail::read_u32(is);
    if (nd > 8) throw IntegrityError("checkpoint: implausible rank for block " + name);
    std::vector<int> shape(nd);
    for (auto& d : shape) d = static_cast<int>(detail::read_u32(is));
    Tensor<float> t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!is) throw IntegrityError("checkpoint: truncated block " + name + " in " + path);
    c.blocks.emplace_back(std::move(name), std::move(t));
  }
  return c;
}

// Snapshot of one module (weights + buffers) and optionally its optimizer.
inline Checkpoint make_checkpoint(const std::string& stage, std::int64_t iteration, std::uint64_t seed,
                                  const PipelineConfig& cfg, nn::Module<float>& module,
                                  const nn::Adam<float>* adam = nullptr) {
  Checkpoint c;
  c.stage = stage;
  c.iteration = iteration;
  c.seed = seed;
  c.config_json = config_to_json(cfg).dump();
  for (const auto& p : module.parameters()) c.add("param." + p.name, p.param->value);
  for (const auto& b : module.named_buffers()) c.add("buffer." + b.name, *b.value);
  if (adam) {
    c.adam_steps = adam->step_count();
    for (std::size_t i = 0; i < adam->size(); ++i) {
      c.add("adam1." + adam->name(i), adam->moment1(i));
      c.add("adam2." + adam->name(i), adam->moment2(i));
    }
  }
  return c;
}

inline void load_block_into(const Checkpoint& c, const std::string& name, Tensor<float>& dst) {
  const Tensor<float>* src = c.find(name);
  if (!src) throw DataError("checkpoint: missing block " + name);
  if (src->shape() != dst.shape())
    throw DataError("checkpoint: shape mismatch for " + name + ": stored " + src->shape_str() + ", expected " +
                    dst.shape_str());
  dst = *src;
}

inline void load_into_module(const Checkpoint& c, nn::Module<float>& module, nn::Adam<float>* adam = nullptr) {
  for (auto& p : module.parameters()) load_block_into(c, "param." + p.name, p.param->value);
  for (auto& b : module.named_buffers()) load_block_into(c, "buffer." + b.name, *b.value);
  if (adam) {
    adam->set_step_count(c.adam_steps);
    for (std::size_t i = 0; i < adam->size(); ++i) {
      load_block_into(c, "adam1." + adam->name(i), adam->moment1(i));
      load_block_into(c, "adam2." + adam->name(i), adam->moment2(i));
    }
  }
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_CHECKPOINT_HPP

#ifndef VTON_COMMON_HPP
#define VTON_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace vton {

// Error taxonomy. The CLI maps these onto process exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// Data that is present but violates a hard invariant (e.g. out-of-range
// labels); unlike an ordinary DataError this is never downgraded to a
// per-record warning.
struct IntegrityError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// Contract violations on tensor shapes / argument dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Deterministic RNG handle used everywhere a random draw happens.
// One engine per logical stream keeps runs reproducible under a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::mt19937_64& engine() { return gen_; }
  std::uint64_t seed() const { return seed_; }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }

  // Inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen_);
  }

  // Derives an independent stream, e.g. per item or per training stage.
  Rng fork(std::uint64_t salt) const {
    std::uint64_t h = seed_ ^ (salt + 0x9e3779b97f4a7c15ull);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return Rng(h);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// FNV-1a over raw bytes; used to fingerprint weight blobs in reports.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace vton

#endif  // VTON_COMMON_HPP

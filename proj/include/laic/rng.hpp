#pragma once

#include "laic/core.hpp"

#include <cstdint>
#include <random>

namespace laic {

/// Independent streams inside one replicate. Truth and observation streams
/// never depend on the assimilation scheme.
enum class StreamId : std::uint64_t {
  truth = 1,
  observations = 2,
  background = 3,
  assimilation = 4,
  auxiliary = 5,
  truth_noise = 6,
  model_error = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate, StreamId stream) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (replicate + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(stream) * 0x8cb92ba72f3d8dd7ULL));
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}
  RngStream(std::uint64_t master, std::uint64_t replicate, StreamId stream)
      : engine_(derive_seed(master, replicate, stream)) {}

  double normal() { return normal_(engine_); }

  Vector standard_normal(Eigen::Index n) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal_(engine_);
    return z;
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace laic

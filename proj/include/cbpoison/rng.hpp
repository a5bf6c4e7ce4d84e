#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Core>

namespace cbpoison {

using Rng = std::mt19937_64;

/// Draws one context vector. Samplers must be deterministic functions of the
/// generator state so that seeded runs replay exactly.
using ContextSampler = std::function<Eigen::VectorXd(Rng&)>;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the `index`-th stream of `stream` under `master`. Streams are
/// independent of evaluation order, which lets per-item work run in parallel
/// and still match a sequential run bit for bit.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) + index);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

}  // namespace cbpoison

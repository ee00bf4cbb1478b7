#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lampos {

/// Feasibility tolerance for constraint residuals (infinity norm).
inline constexpr double kFeasTol = 1e-7;
/// Integrality tolerance: y is binary-valued if within this of {0,1}.
inline constexpr double kIntTol = 1e-6;

using BitVec = std::vector<std::uint8_t>;

std::string bits_to_string(const BitVec& bits);
BitVec bits_from_string(const std::string& s);

/// Counter-based deterministic generator. Streams derived from one master
/// seed are independent of thread scheduling, so concurrent sampling stays
/// reproducible.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return n == 0 ? 0 : next() % n;
  }
};

/// Derives an independent stream from a master seed and a stream index.
SplitMix64 substream(std::uint64_t seed, std::uint64_t stream);

/// FNV-1a over a byte string, used for content-addressed ids.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Worker count: hardware concurrency capped by the LAMPOS_THREADS
/// environment variable when set.
int worker_count();

/// Runs fn(i) for i in [0, n) on a pool of workers. Results must be written
/// to per-index slots by the caller; completion order is not deterministic,
/// slot contents are.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lampos

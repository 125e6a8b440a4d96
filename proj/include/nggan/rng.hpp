#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nggan {

// Deterministic random source.
//
// Algorithm (pinned): the engine is std::mt19937_64, whose output sequence is
// fixed by the C++ standard. It is seeded with splitmix64(key), where key is the
// user seed for the root stream and splitmix64(parent_key ^ (id + 0x9E3779B97F4A7C15))
// for substream `id`. Uniform doubles take the top 53 bits of one engine draw;
// Gaussian draws use the Box-Muller transform on two uniforms and return the
// cosine branch first, then the cached sine branch.
//
// Substreams are derived from the key only, never from the current position, so
// `rng.substream(i)` yields the same sequence no matter how much of the parent
// stream has been consumed or in what order tasks run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }

  Rng substream(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform01();
  double gaussian01();
  // Uniform on [0, n).
  std::size_t below(std::size_t n);

  // Engine text state plus Box-Muller cache, for checkpoint resume.
  std::string state() const;
  void set_state(const std::string& text);

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// n values uniform on [lo, hi). Throws InvalidArgument unless lo < hi.
std::vector<double> rng_uniform(Rng& rng, std::size_t n, double lo, double hi);

// n values from N(mean, std^2). Throws InvalidArgument if std < 0 or not finite.
std::vector<double> rng_gaussian(Rng& rng, std::size_t n, double mean, double std);

}  // namespace nggan

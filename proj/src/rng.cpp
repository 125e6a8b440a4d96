#include "nggan/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nggan/error.hpp"

namespace nggan {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : Rng(seed, seed) {}

Rng::Rng(std::uint64_t seed, std::uint64_t key)
    : seed_(seed), key_(key), engine_(splitmix64(key)) {}

Rng Rng::substream(std::uint64_t id) const {
  return Rng(seed_, splitmix64(key_ ^ (id + 0x9E3779B97F4A7C15ULL)));
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian01() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(theta);
  has_cached_ = true;
  return radius * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  if (n == 0) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << key_ << ' ' << (has_cached_ ? 1 : 0) << ' ';
  os.precision(17);
  os << std::hexfloat << cached_ << std::defaultfloat << ' ' << engine_;
  return os.str();
}

void Rng::set_state(const std::string& text) {
  std::istringstream is(text);
  int cached_flag = 0;
  std::string cached_text;
  is >> seed_ >> key_ >> cached_flag >> cached_text >> engine_;
  if (!is) throw FormatError("malformed RNG state");
  has_cached_ = cached_flag != 0;
  cached_ = std::strtod(cached_text.c_str(), nullptr);
}

std::vector<double> rng_uniform(Rng& rng, std::size_t n, double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("rng_uniform: need finite lo < hi");
  }
  std::vector<double> out(n);
  const double width = hi - lo;
  for (auto& v : out) {
    v = lo + width * rng.uniform01();
    if (v >= hi) v = std::nextafter(hi, lo);
  }
  return out;
}

std::vector<double> rng_gaussian(Rng& rng, std::size_t n, double mean, double std) {
  if (!(std >= 0.0) || !std::isfinite(std) || !std::isfinite(mean)) {
    throw InvalidArgument("rng_gaussian: std must be finite and >= 0");
  }
  std::vector<double> out(n);
  for (auto& v : out) v = mean + std * rng.gaussian01();
  return out;
}

}  // namespace nggan

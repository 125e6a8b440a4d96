#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nggan {

// One fixed-length sampled waveform in volts.
class NoiseTrace {
 public:
  NoiseTrace(std::vector<float> samples, double sample_rate_hz);

  std::span<const float> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double sample_rate_hz() const { return sample_rate_hz_; }

 private:
  std::vector<float> samples_;
  double sample_rate_hz_;
};

// Immutable collection of equal-length traces sharing one sample rate.
// Storage is a single row-major count x length buffer.
class TraceSet {
 public:
  TraceSet(std::string name, double sample_rate_hz, std::size_t length, std::vector<float> data);

  static TraceSet from_traces(std::string name, const std::vector<NoiseTrace>& traces);

  const std::string& name() const { return name_; }
  double sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t size() const { return count_; }
  std::size_t length() const { return length_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> trace(std::size_t i) const;
  NoiseTrace at(std::size_t i) const;

  // Traces [first, first + count) as a new set.
  TraceSet slice(std::size_t first, std::size_t count) const;
  TraceSet renamed(std::string name) const;

  friend bool operator==(const TraceSet& a, const TraceSet& b) {
    return a.sample_rate_hz_ == b.sample_rate_hz_ && a.length_ == b.length_ &&
           a.count_ == b.count_ && a.data_ == b.data_;
  }

 private:
  std::string name_;
  double sample_rate_hz_;
  std::size_t length_;
  std::size_t count_;
  std::vector<float> data_;
};

// Binary trace file, little-endian:
//   "NGTS" | u8 version (1) | u32 count | u32 length | f64 sample_rate_hz |
//   count * length f32 samples, row-major.
inline constexpr std::size_t kTraceHeaderBytes = 21;
inline constexpr unsigned char kTraceFormatVersion = 1;

std::vector<unsigned char> encode_traceset(const TraceSet& set);
TraceSet decode_traceset(std::span<const unsigned char> bytes, std::string name = "");

void save_traceset(const TraceSet& set, const std::filesystem::path& path);
TraceSet load_traceset(const std::filesystem::path& path);

// One trace per row, comma separated, printed with enough digits to round-trip f32.
void save_traceset_csv(const TraceSet& set, const std::filesystem::path& path);
TraceSet load_traceset_csv(const std::filesystem::path& path, double sample_rate_hz);

// Divides every sample by the global max |sample|. Returns the set and the scale.
std::pair<TraceSet, double> normalize_maxabs(const TraceSet& set);
TraceSet rescale(const TraceSet& set, double scale);

}  // namespace nggan

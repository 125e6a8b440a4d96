#include "nggan/trace.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "common/bytes.hpp"
#include "nggan/error.hpp"

namespace nggan {

using detail::get_le;
using detail::put_le;

namespace {

void check_finite(std::span<const float> xs, const char* what) {
  for (float x : xs) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + ": non-finite sample");
  }
}

void check_rate(double fs) {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw InvalidArgument("sample_rate_hz must be finite and > 0");
}

}  // namespace

NoiseTrace::NoiseTrace(std::vector<float> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (samples_.empty()) throw InvalidArgument("NoiseTrace: empty");
  check_rate(sample_rate_hz_);
  check_finite(samples_, "NoiseTrace");
}

TraceSet::TraceSet(std::string name, double sample_rate_hz, std::size_t length, std::vector<float> data)
    : name_(std::move(name)), sample_rate_hz_(sample_rate_hz), length_(length), data_(std::move(data)) {
  check_rate(sample_rate_hz_);
  if (length_ == 0) throw InvalidArgument("TraceSet: trace length must be >= 1");
  if (data_.empty() || data_.size() % length_ != 0) {
    throw InvalidArgument("TraceSet: buffer size " + std::to_string(data_.size()) +
                          " is not a positive multiple of length " + std::to_string(length_));
  }
  count_ = data_.size() / length_;
  check_finite(data_, "TraceSet");
}

TraceSet TraceSet::from_traces(std::string name, const std::vector<NoiseTrace>& traces) {
  if (traces.empty()) throw InvalidArgument("TraceSet: need at least one trace");
  const std::size_t length = traces.front().size();
  const double fs = traces.front().sample_rate_hz();
  std::vector<float> data;
  data.reserve(length * traces.size());
  for (const auto& t : traces) {
    if (t.size() != length) {
      throw InvalidArgument("TraceSet: mismatched trace lengths " + std::to_string(length) + " vs " +
                            std::to_string(t.size()));
    }
    if (t.sample_rate_hz() != fs) throw InvalidArgument("TraceSet: mismatched sample rates");
    data.insert(data.end(), t.samples().begin(), t.samples().end());
  }
  return TraceSet(std::move(name), fs, length, std::move(data));
}

std::span<const float> TraceSet::trace(std::size_t i) const {
  if (i >= count_) throw OutOfRange("TraceSet: trace index " + std::to_string(i) + " out of range");
  return std::span<const float>(data_).subspan(i * length_, length_);
}

NoiseTrace TraceSet::at(std::size_t i) const {
  auto s = trace(i);
  return NoiseTrace(std::vector<float>(s.begin(), s.end()), sample_rate_hz_);
}

TraceSet TraceSet::slice(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > count_) throw OutOfRange("TraceSet::slice out of range");
  auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * length_);
  return TraceSet(name_, sample_rate_hz_, length_,
                  std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(count * length_)));
}

TraceSet TraceSet::renamed(std::string name) const {
  TraceSet copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

std::vector<unsigned char> encode_traceset(const TraceSet& set) {
  if (set.size() > std::numeric_limits<std::uint32_t>::max() ||
      set.length() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("TraceSet too large for the u32 header fields");
  }
  std::vector<unsigned char> out;
  out.reserve(kTraceHeaderBytes + set.data().size() * 4);
  for (char c : {'N', 'G', 'T', 'S'}) out.push_back(static_cast<unsigned char>(c));
  out.push_back(kTraceFormatVersion);
  put_le(out, static_cast<std::uint32_t>(set.size()));
  put_le(out, static_cast<std::uint32_t>(set.length()));
  put_le(out, std::bit_cast<std::uint64_t>(set.sample_rate_hz()));
  for (float x : set.data()) put_le(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

TraceSet decode_traceset(std::span<const unsigned char> bytes, std::string name) {
  if (bytes.size() < kTraceHeaderBytes) {
    throw FormatError("trace file truncated: header needs " + std::to_string(kTraceHeaderBytes) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "NGTS", 4) != 0) throw FormatError("bad magic: not an NGTS trace file");
  if (bytes[4] != kTraceFormatVersion) {
    throw FormatError("unsupported trace file version " + std::to_string(bytes[4]));
  }
  const auto count = get_le<std::uint32_t>(bytes.data() + 5);
  const auto length = get_le<std::uint32_t>(bytes.data() + 9);
  const double fs = std::bit_cast<double>(get_le<std::uint64_t>(bytes.data() + 13));
  if (count == 0 || length == 0) throw FormatError("trace file declares zero traces or zero length");
  if (!(fs > 0.0) || !std::isfinite(fs)) throw FormatError("trace file has invalid sample rate");
  const std::uint64_t expected = kTraceHeaderBytes + std::uint64_t{count} * length * 4;
  if (bytes.size() != expected) {
    throw FormatError("trace file payload size mismatch: expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<float> data(std::size_t{count} * length);
  const unsigned char* p = bytes.data() + kTraceHeaderBytes;
  for (auto& x : data) {
    x = std::bit_cast<float>(get_le<std::uint32_t>(p));
    p += 4;
    if (!std::isfinite(x)) throw FormatError("trace file contains a non-finite sample");
  }
  return TraceSet(std::move(name), fs, length, std::move(data));
}

void save_traceset(const TraceSet& set, const std::filesystem::path& path) {
  detail::write_file(path, encode_traceset(set));
}

TraceSet load_traceset(const std::filesystem::path& path) {
  return decode_traceset(detail::read_file(path), path.stem().string());
}

void save_traceset_csv(const TraceSet& set, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto tr = set.trace(i);
    for (std::size_t n = 0; n < tr.size(); ++n) {
      auto res = std::to_chars(buf, buf + sizeof(buf), tr[n]);
      if (n) os.put(',');
      os.write(buf, res.ptr - buf);
    }
    os.put('\n');
  }
  if (!os) throw IoError("write failed for " + path.string());
}

TraceSet load_traceset_csv(const std::filesystem::path& path, double sample_rate_hz) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<NoiseTrace> traces;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<float> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == ',' || *p == '\r')) ++p;
      if (p >= end) break;
      float v = 0.0f;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw FormatError("bad number in " + path.string());
      row.push_back(v);
      p = res.ptr;
    }
    traces.emplace_back(std::move(row), sample_rate_hz);
  }
  return TraceSet::from_traces(path.stem().string(), traces);
}

std::pair<TraceSet, double> normalize_maxabs(const TraceSet& set) {
  double peak = 0.0;
  for (float x : set.data()) peak = std::max(peak, static_cast<double>(std::fabs(x)));
  if (peak == 0.0) throw DegenerateInput("normalize_maxabs: all samples are zero");
  std::vector<float> out(set.data().size());
  std::transform(set.data().begin(), set.data().end(), out.begin(),
                 [peak](float x) { return static_cast<float>(static_cast<double>(x) / peak); });
  return {TraceSet(set.name(), set.sample_rate_hz(), set.length(), std::move(out)), peak};
}

TraceSet rescale(const TraceSet& set, double scale) {
  std::vector<float> out(set.data().size());
  std::transform(set.data().begin(), set.data().end(), out.begin(),
                 [scale](float x) { return static_cast<float>(static_cast<double>(x) * scale); });
  return TraceSet(set.name(), set.sample_rate_hz(), set.length(), std::move(out));
}

}  // namespace nggan

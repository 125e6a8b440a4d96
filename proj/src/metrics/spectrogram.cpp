#include "nggan/metrics/spectrogram.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nggan/error.hpp"
#include "nggan/fft.hpp"

namespace nggan::metrics {

Spectrogram spectrogram(std::span<const double> x, double fs, std::size_t win_len, std::size_t hop) {
  if (win_len == 0 || win_len > x.size()) {
    throw LengthError("spectrogram: window length " + std::to_string(win_len) + " does not fit trace length " +
                      std::to_string(x.size()));
  }
  if (hop == 0) throw InvalidArgument("spectrogram: hop must be >= 1");
  if (!(fs > 0.0)) throw InvalidArgument("spectrogram: sample rate must be > 0");
  std::vector<double> w(win_len);
  for (std::size_t i = 0; i < win_len; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win_len));
  }
  Spectrogram s;
  s.frames = (x.size() - win_len) / hop + 1;
  s.bins = win_len / 2 + 1;
  s.magnitude.resize(s.frames * s.bins);
  for (std::size_t k = 0; k < s.bins; ++k) s.freqs_hz.push_back(static_cast<double>(k) * fs / static_cast<double>(win_len));
  std::vector<double> frame(win_len);
  for (std::size_t m = 0; m < s.frames; ++m) {
    for (std::size_t i = 0; i < win_len; ++i) frame[i] = x[m * hop + i] * w[i];
    const auto spec = fft::rfft(frame);
    for (std::size_t k = 0; k < s.bins; ++k) s.magnitude[m * s.bins + k] = std::abs(spec[k]);
    s.times_s.push_back((static_cast<double>(m * hop) + 0.5 * static_cast<double>(win_len)) / fs);
  }
  return s;
}

Spectrogram spectrogram(std::span<const float> samples, double fs, std::size_t win_len, std::size_t hop) {
  const std::vector<double> x(samples.begin(), samples.end());
  return spectrogram(std::span<const double>(x), fs, win_len, hop);
}

}  // namespace nggan::metrics

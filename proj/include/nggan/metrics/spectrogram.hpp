#pragma once

#include <span>
#include <vector>

namespace nggan::metrics {

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;  // win_len / 2 + 1
  std::vector<double> times_s;  // frame centers
  std::vector<double> freqs_hz;
  std::vector<double> magnitude;  // frames x bins, row-major, |DFT| of the windowed frame

  double at(std::size_t frame, std::size_t bin) const { return magnitude[frame * bins + bin]; }
};

// Periodic Hann window, frames start at 0, hop, 2 hop, ... while they fit.
// Throws LengthError if win_len is 0 or exceeds the trace, InvalidArgument if hop is 0.
Spectrogram spectrogram(std::span<const float> samples, double sample_rate_hz, std::size_t win_len, std::size_t hop);
Spectrogram spectrogram(std::span<const double> samples, double sample_rate_hz, std::size_t win_len,
                        std::size_t hop);

}  // namespace nggan::metrics

#include "nggan/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>

#include "nggan/error.hpp"
#include "nggan/fft.hpp"
#include "nggan/parallel.hpp"

namespace nggan::synth {

namespace {

bool positive(double x) { return x > 0.0 && std::isfinite(x); }
bool nonneg(double x) { return x >= 0.0 && std::isfinite(x); }

void check_common(double cycle_period_s, double fs, const char* who) {
  if (!positive(cycle_period_s)) throw InvalidArgument(std::string(who) + ": cycle_period_s must be > 0");
  if (!positive(fs)) throw InvalidArgument(std::string(who) + ": sample_rate_hz must be > 0");
}

// Frequency of bin k of an n-point complex DFT, folded to [0, fs/2].
double bin_abs_freq(std::size_t k, std::size_t n, double fs) {
  const std::size_t folded = std::min(k, n - k);
  return static_cast<double>(folded) * fs / static_cast<double>(n);
}

// White N(0,1) excitation, shaped in frequency by `gain(|f|)`, back to time.
// Returns the real part; throws if the imaginary residue is not negligible.
template <typename Gain>
std::vector<double> shaped_noise(Rng& rng, std::size_t n, double fs, Gain&& gain) {
  std::vector<fft::cplx> x(n);
  for (auto& v : x) v = fft::cplx(rng.gaussian01(), 0.0);
  auto spectrum = fft::forward(x);
  for (std::size_t k = 0; k < n; ++k) spectrum[k] *= gain(bin_abs_freq(k, n, fs));
  auto time = fft::inverse(spectrum);
  std::vector<double> out(n);
  double sum_re2 = 0.0;
  double max_im = 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = time[i].real() * inv;
    sum_re2 += out[i] * out[i];
    max_im = std::max(max_im, std::fabs(time[i].imag() * inv));
  }
  const double rms = std::sqrt(sum_re2 / static_cast<double>(n));
  if (max_im > 1e-9 * rms && max_im > 1e-300) {
    throw NumericsError("spectral shaping left an imaginary residue of " + std::to_string(max_im));
  }
  return out;
}

}  // namespace

void FreshConfig::validate() const {
  check_common(cycle_period_s, sample_rate_hz, "FreshConfig");
  for (const auto& p : spectral_peaks) {
    if (!positive(p.decay_left_hz) || !positive(p.decay_right_hz)) {
      throw InvalidArgument("FreshConfig: spectral decay parameters must be > 0");
    }
    if (!nonneg(p.amplitude)) throw InvalidArgument("FreshConfig: peak amplitude must be >= 0");
    if (!std::isfinite(p.f0_hz)) throw InvalidArgument("FreshConfig: peak f0_hz must be finite");
  }
  if (!(temporal_center_frac >= 0.0 && temporal_center_frac < 1.0)) {
    throw InvalidArgument("FreshConfig: temporal_center_frac must lie in [0, 1)");
  }
  if (!positive(temporal_decay_s)) throw InvalidArgument("FreshConfig: temporal_decay_s must be > 0");
}

void PscgmConfig::validate() const {
  check_common(cycle_period_s, sample_rate_hz, "PscgmConfig");
  if (regions.size() < 2 || regions.size() > 3) {
    throw InvalidArgument("PscgmConfig: need 2 or 3 regions, got " + std::to_string(regions.size()));
  }
  double total = 0.0;
  for (const auto& r : regions) {
    if (!positive(r.duration_s)) throw InvalidArgument("PscgmConfig: region duration_s must be > 0");
    if (!nonneg(r.rms_volts)) throw InvalidArgument("PscgmConfig: region rms_volts must be >= 0");
    if (r.psd_shape.empty()) throw InvalidArgument("PscgmConfig: region psd_shape is empty");
    for (const auto& t : r.psd_shape) {
      if (!nonneg(t.gain)) throw InvalidArgument("PscgmConfig: psd gain must be finite and >= 0");
      if (!positive(t.decay_hz)) throw InvalidArgument("PscgmConfig: psd decay_hz must be > 0");
      if (!std::isfinite(t.center_hz)) throw InvalidArgument("PscgmConfig: psd center_hz must be finite");
    }
    total += r.duration_s;
  }
  if (std::fabs(total - cycle_period_s) > 1.0 / sample_rate_hz) {
    throw InvalidArgument("PscgmConfig: region durations sum to " + std::to_string(total) +
                          " s but the cycle is " + std::to_string(cycle_period_s) + " s");
  }
}

double spectral_shape_eval(const SpectralPeak& peak, double f_hz) {
  const double decay = f_hz < peak.f0_hz ? peak.decay_left_hz : peak.decay_right_hz;
  return peak.amplitude * std::exp(-std::fabs(f_hz - peak.f0_hz) / decay);
}

double fresh_spectral_gain(const FreshConfig& cfg, double f_hz) {
  const double f = std::fabs(f_hz);
  return spectral_shape_eval(cfg.spectral_peaks[0], f) + spectral_shape_eval(cfg.spectral_peaks[1], f);
}

double temporal_shape_eval(const FreshConfig& cfg, double t_s) {
  if (!(t_s >= 0.0 && t_s < cfg.cycle_period_s)) {
    throw OutOfRange("temporal_shape_eval: t = " + std::to_string(t_s) + " s is outside the cycle");
  }
  const double center = cfg.temporal_center_frac * cfg.cycle_period_s;
  return std::exp(-std::fabs(t_s - center) / cfg.temporal_decay_s);
}

double region_spectral_gain(const RegionSpec& region, double f_hz) {
  const double f = std::fabs(f_hz);
  double g = 0.0;
  for (const auto& t : region.psd_shape) g += t.gain * std::exp(-std::fabs(f - t.center_hz) / t.decay_hz);
  return g;
}

TraceSet gen_fresh(const FreshConfig& cfg, std::size_t n_traces, std::size_t trace_len, const Rng& rng,
                   unsigned threads) {
  cfg.validate();
  if (n_traces == 0) throw InvalidArgument("gen_fresh: n_traces must be >= 1");
  if (trace_len < 2 || !std::has_single_bit(trace_len)) {
    throw LengthError("gen_fresh: trace_len must be a power of two, got " + std::to_string(trace_len));
  }
  const double fs = cfg.sample_rate_hz;
  const double period = cfg.cycle_period_s;
  if (static_cast<double>(trace_len) < 2.0 * period * fs) {
    throw LengthError("gen_fresh: trace_len " + std::to_string(trace_len) + " is shorter than two cycles (" +
                      std::to_string(2.0 * period * fs) + " samples)");
  }
  std::vector<float> data(n_traces * trace_len);
  parallel_for(n_traces, threads, [&](std::size_t i) {
    Rng stream = rng.substream(i);
    const double phase = cfg.random_phase ? stream.uniform01() * period : 0.0;
    auto y = shaped_noise(stream, trace_len, fs, [&](double f) { return fresh_spectral_gain(cfg, f); });
    float* row = data.data() + i * trace_len;
    for (std::size_t n = 0; n < trace_len; ++n) {
      double t = std::fmod(static_cast<double>(n) / fs + phase, period);
      if (t >= period) t = 0.0;
      row[n] = static_cast<float>(y[n] * temporal_shape_eval(cfg, t));
    }
  });
  return TraceSet("fresh", fs, trace_len, std::move(data));
}

TraceSet gen_pscgm(const PscgmConfig& cfg, std::size_t n_traces, std::size_t trace_len, const Rng& rng,
                   unsigned threads) {
  cfg.validate();
  if (n_traces == 0) throw InvalidArgument("gen_pscgm: n_traces must be >= 1");
  const double fs = cfg.sample_rate_hz;
  const double period = cfg.cycle_period_s;
  if (static_cast<double>(trace_len) < period * fs) {
    throw LengthError("gen_pscgm: trace_len " + std::to_string(trace_len) + " is shorter than one cycle (" +
                      std::to_string(period * fs) + " samples)");
  }
  const std::size_t n_regions = cfg.regions.size();

  // Region start offsets within a cycle, in seconds.
  std::vector<double> offsets(n_regions + 1, 0.0);
  for (std::size_t r = 0; r < n_regions; ++r) offsets[r + 1] = offsets[r] + cfg.regions[r].duration_s;

  // Power normalisation per region for an n-point shaping: E[y^2] = mean_k |H_k|^2.
  auto region_scale = [&](std::size_t r, std::size_t n) {
    double power = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double g = region_spectral_gain(cfg.regions[r], bin_abs_freq(k, n, fs));
      power += g * g;
    }
    power /= static_cast<double>(n);
    return power > 0.0 ? cfg.regions[r].rms_volts / std::sqrt(power) : 0.0;
  };

  // Crossfade width at the boundary after region r: 10% of the shorter neighbour.
  std::vector<long> fade(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    const auto a = std::llround(cfg.regions[r].duration_s * fs);
    const auto b = std::llround(cfg.regions[(r + 1) % n_regions].duration_s * fs);
    fade[r] = std::max<long>(1, std::lround(0.1 * static_cast<double>(std::min(a, b))));
  }

  std::vector<float> data(n_traces * trace_len);
  const auto len = static_cast<long>(trace_len);
  parallel_for(n_traces, threads, [&](std::size_t i) {
    Rng stream = rng.substream(i);
    const double phase = cfg.random_phase ? stream.uniform01() * period : 0.0;
    std::vector<double> acc(trace_len, 0.0);
    auto boundary = [&](long cycle, std::size_t idx) {
      const double t = static_cast<double>(cycle) * period + offsets[idx] - phase;
      return static_cast<long>(std::llround(t * fs));
    };
    // Cycle -1 supplies the fade-in across t = 0.
    const auto n_cycles = static_cast<long>(std::ceil((static_cast<double>(trace_len) / fs + phase) / period)) + 1;
    for (long c = -1; c < n_cycles; ++c) {
      for (std::size_t r = 0; r < n_regions; ++r) {
        const long fade_in = fade[(r + n_regions - 1) % n_regions];
        const long fade_out = fade[r];
        const long in_begin = boundary(c, r) - fade_in / 2;
        const long out_begin = boundary(c, r + 1) - fade_out / 2;
        const long seg_end = out_begin + fade_out;
        const auto n = static_cast<std::size_t>(std::max<long>(seg_end - in_begin, 1));
        // Drawn unconditionally so the stream position never depends on clipping.
        auto y = shaped_noise(stream, n, fs, [&](double f) { return region_spectral_gain(cfg.regions[r], f); });
        if (seg_end <= 0 || in_begin >= len) continue;
        const double scale = region_scale(r, n);
        // Power-complementary ramps: w^2 follows the raised cosine 0.5(1 - cos(pi u)).
        for (long pos = std::max<long>(in_begin, 0); pos < std::min(seg_end, len); ++pos) {
          double w = 1.0;
          if (pos - in_begin < fade_in) {
            const double u = (static_cast<double>(pos - in_begin) + 0.5) / static_cast<double>(fade_in);
            w = std::sin(0.5 * std::numbers::pi * u);
          }
          if (pos >= out_begin) {
            const double u = (static_cast<double>(pos - out_begin) + 0.5) / static_cast<double>(fade_out);
            w *= std::cos(0.5 * std::numbers::pi * u);
          }
          acc[static_cast<std::size_t>(pos)] += w * scale * y[static_cast<std::size_t>(pos - in_begin)];
        }
      }
    }
    float* row = data.data() + i * trace_len;
    for (std::size_t n = 0; n < trace_len; ++n) row[n] = static_cast<float>(acc[n]);
  });
  return TraceSet("pscgm", fs, trace_len, std::move(data));
}

namespace {

constexpr double kCycle122 = 1.0 / 122.0;

FreshConfig scaled_fresh(double fs, double freq_scale) {
  FreshConfig cfg;
  cfg.cycle_period_s = kCycle122;
  cfg.sample_rate_hz = fs;
  cfg.spectral_peaks[0] = {30e3 * freq_scale, 0.5, 5e3 * freq_scale, 10e3 * freq_scale};
  cfg.spectral_peaks[1] = {70e3 * freq_scale, 0.25, 5e3 * freq_scale, 8e3 * freq_scale};
  cfg.temporal_center_frac = 0.3;
  cfg.temporal_decay_s = kCycle122 / 20.0;
  return cfg;
}

PscgmConfig scaled_pscgm(double fs, double freq_scale) {
  const double s = freq_scale;
  PscgmConfig cfg;
  cfg.cycle_period_s = kCycle122;
  cfg.sample_rate_hz = fs;
  // Background, impulsive burst, decaying tail.
  cfg.regions = {
      RegionSpec{0.70 * kCycle122, {{0.0, 1.0, 30e3 * s}}, 0.01},
      RegionSpec{0.10 * kCycle122, {{60e3 * s, 1.0, 15e3 * s}, {20e3 * s, 0.5, 10e3 * s}}, 0.15},
      RegionSpec{0.20 * kCycle122, {{40e3 * s, 1.0, 20e3 * s}}, 0.04},
  };
  return cfg;
}

}  // namespace

FreshConfig fresh_dataset2_like() { return scaled_fresh(400e3, 1.0); }
FreshConfig fresh_dataset2_desk() { return scaled_fresh(25e3, 1.0 / 16.0); }
PscgmConfig pscgm_dataset1_like() { return scaled_pscgm(400e3, 1.0); }
PscgmConfig pscgm_dataset1_desk() { return scaled_pscgm(25e3, 1.0 / 16.0); }

}  // namespace nggan::synth

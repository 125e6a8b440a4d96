#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "nggan/rng.hpp"
#include "nggan/trace.hpp"

// Parametric cyclostationary noise generators.
namespace nggan::synth {

// Asymmetric double-sided exponential decay in frequency.
struct SpectralPeak {
  double f0_hz = 0.0;
  double amplitude = 0.0;
  double decay_left_hz = 1.0;
  double decay_right_hz = 1.0;
};

struct FreshConfig {
  double cycle_period_s = 1.0 / 122.0;
  std::array<SpectralPeak, 2> spectral_peaks{};
  double temporal_center_frac = 0.3;
  double temporal_decay_s = 1.0 / 122.0 / 20.0;
  double sample_rate_hz = 400e3;
  // Start each trace at a uniformly random phase of the cycle.
  bool random_phase = false;

  void validate() const;
};

// One term of a region's spectral magnitude: gain * exp(-|f - center| / decay).
struct PsdTerm {
  double center_hz = 0.0;
  double gain = 1.0;
  double decay_hz = 1.0;
};

struct RegionSpec {
  double duration_s = 0.0;
  std::vector<PsdTerm> psd_shape;
  double rms_volts = 0.0;
};

struct PscgmConfig {
  double cycle_period_s = 1.0 / 122.0;
  std::vector<RegionSpec> regions;
  double sample_rate_hz = 400e3;
  bool random_phase = false;

  void validate() const;
};

double spectral_shape_eval(const SpectralPeak& peak, double f_hz);
// Sum of both peaks evaluated at |f|, so the response is even in f.
double fresh_spectral_gain(const FreshConfig& cfg, double f_hz);
// Throws OutOfRange unless 0 <= t < cycle_period_s.
double temporal_shape_eval(const FreshConfig& cfg, double t_s);
double region_spectral_gain(const RegionSpec& region, double f_hz);

// `threads` only changes scheduling; output is identical for any value.
TraceSet gen_fresh(const FreshConfig& cfg, std::size_t n_traces, std::size_t trace_len, const Rng& rng,
                   unsigned threads = 1);
TraceSet gen_pscgm(const PscgmConfig& cfg, std::size_t n_traces, std::size_t trace_len, const Rng& rng,
                   unsigned threads = 1);

// Shipped presets. The PSCGM numbers are representative, not the LV14 values
// of IEEE 1901.2 Annex D.
FreshConfig fresh_dataset2_like();
// Same process decimated by 16 (25 kHz), so 1024 samples still span ~5 cycles.
FreshConfig fresh_dataset2_desk();
PscgmConfig pscgm_dataset1_like();
PscgmConfig pscgm_dataset1_desk();

}  // namespace nggan::synth

#include "nggan/metrics/cyclic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "nggan/error.hpp"
#include "nggan/fft.hpp"
#include "nggan/parallel.hpp"

namespace nggan::metrics {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

// exp(-j 2 pi alpha n / fs) with the phase reduced before scaling.
cplx shift_phasor(double alpha, double fs, std::size_t n) {
  const double cycles = std::fmod(alpha * static_cast<double>(n) / fs, 1.0);
  return std::polar(1.0, -kTwoPi * cycles);
}

void check_alphas(const std::vector<double>& alphas, double fs, std::size_t nfft) {
  for (double a : alphas) {
    if (!std::isfinite(a) || a < 0.0) throw InvalidArgument("cyclic frequency must be finite and >= 0");
    if (a == 0.0) continue;
    const double resolution = fs / static_cast<double>(nfft);
    if (a < resolution * (1.0 - 1e-12)) {
      throw ResolutionError("cyclic frequency " + std::to_string(a) + " Hz is below the resolution fs/nfft = " +
                            std::to_string(resolution) + " Hz");
    }
    if (a > fs / 2.0) {
      throw ResolutionError("cyclic frequency " + std::to_string(a) + " Hz exceeds fs/2");
    }
  }
}

}  // namespace

std::size_t CyclicSpectrum::row(double alpha) const {
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (alphas[i] == alpha) return i;
  throw InvalidArgument("cyclic spectrum has no row for alpha " + std::to_string(alpha));
}

std::size_t auto_nfft(double fs, std::span<const double> alphas) {
  double smallest = 0.0;
  for (double a : alphas)
    if (a > 0.0 && (smallest == 0.0 || a < smallest)) smallest = a;
  if (smallest == 0.0) return 256;
  return static_cast<std::size_t>(std::ceil(fs / smallest - 1e-9));
}

CyclicSpectrum csd(std::span<const double> x, double fs, std::vector<double> alphas, std::size_t nfft) {
  if (!(fs > 0.0)) throw InvalidArgument("csd: sample rate must be > 0");
  if (std::find(alphas.begin(), alphas.end(), 0.0) == alphas.end()) alphas.insert(alphas.begin(), 0.0);
  if (nfft == 0) nfft = auto_nfft(fs, alphas);
  if (nfft < 2) throw LengthError("csd: nfft must be >= 2");
  if (x.size() < 2 * nfft) {
    throw LengthError("csd: trace length " + std::to_string(x.size()) + " is shorter than 2 * nfft = " +
                      std::to_string(2 * nfft));
  }
  check_alphas(alphas, fs, nfft);

  const auto w = hann(nfft);
  double w_energy = 0.0;
  for (double v : w) w_energy += v * v;
  const double norm = 1.0 / (fs * w_energy);
  const std::size_t hop = nfft / 2;
  const std::size_t n_seg = (x.size() - nfft) / hop + 1;
  const std::size_t bins = nfft / 2 + 1;

  CyclicSpectrum out;
  out.sample_rate_hz = fs;
  out.nfft = nfft;
  out.segments = n_seg;
  out.alphas = alphas;
  out.freqs.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(nfft);
  out.csd.assign(alphas.size() * bins, cplx(0.0));
  out.shifted_psd.assign(alphas.size() * bins, 0.0);

  std::vector<std::vector<cplx>> base(n_seg);
  std::vector<cplx> seg(nfft);
  for (std::size_t s = 0; s < n_seg; ++s) {
    for (std::size_t i = 0; i < nfft; ++i) seg[i] = cplx(x[s * hop + i] * w[i], 0.0);
    base[s] = fft::forward(seg);
  }
  const double inv_seg = 1.0 / static_cast<double>(n_seg);
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    cplx* row = out.csd.data() + a * bins;
    double* shifted = out.shifted_psd.data() + a * bins;
    for (std::size_t s = 0; s < n_seg; ++s) {
      const std::vector<cplx>* y = &base[s];
      std::vector<cplx> moved;
      if (alphas[a] != 0.0) {
        for (std::size_t i = 0; i < nfft; ++i) {
          const std::size_t n = s * hop + i;
          seg[i] = x[n] * w[i] * shift_phasor(alphas[a], fs, n);
        }
        moved = fft::forward(seg);
        y = &moved;
      }
      for (std::size_t k = 0; k < bins; ++k) {
        row[k] += (*y)[k] * std::conj(base[s][k]);
        shifted[k] += std::norm((*y)[k]);
      }
    }
    for (std::size_t k = 0; k < bins; ++k) {
      row[k] *= inv_seg * norm;
      shifted[k] *= inv_seg * norm;
    }
  }
  return out;
}

CyclicSpectrum csd(std::span<const float> samples, double fs, std::vector<double> alphas, std::size_t nfft) {
  const std::vector<double> x(samples.begin(), samples.end());
  return csd(std::span<const double>(x), fs, std::move(alphas), nfft);
}

void csc(CyclicSpectrum& sp) {
  const std::size_t bins = sp.cols();
  const std::size_t zero = sp.row(0.0);
  std::vector<double> psd(bins);
  double peak = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    psd[k] = sp.csd_at(zero, k).real();
    peak = std::max(peak, psd[k]);
  }
  const double floor = kCscMaskFloor * peak;
  sp.csc.assign(sp.rows() * bins, cplx(0.0));
  sp.valid.assign(sp.rows() * bins, 0);
  sp.masked.assign(sp.rows(), 0);
  for (std::size_t a = 0; a < sp.rows(); ++a) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double shifted = sp.shifted_psd[a * bins + k];
      const bool ok = peak > 0.0 && psd[k] >= floor && shifted >= floor;
      if (!ok) {
        ++sp.masked[a];
        continue;
      }
      sp.valid[a * bins + k] = 1;
      sp.csc[a * bins + k] = a == zero ? cplx(1.0, 0.0) : sp.csd_at(a, k) / std::sqrt(psd[k] * shifted);
    }
  }
}

std::vector<cplx> csd_direct(std::span<const double> x, double fs, std::size_t period,
                             const std::vector<double>& alphas, std::size_t nfft) {
  if (period == 0 || nfft < 2) throw InvalidArgument("csd_direct: period and nfft must be positive");
  if (x.size() < period) throw LengthError("csd_direct: trace shorter than one period");
  const long len = static_cast<long>(x.size());
  const long p_len = static_cast<long>(period);
  const long max_lag = static_cast<long>(nfft) - 1;
  const std::size_t n_lags = static_cast<std::size_t>(2 * max_lag + 1);

  // r[n; tau] averaged over the periods whose sample pair lies inside the trace.
  std::vector<double> r(period * n_lags, 0.0);
  for (long n = 0; n < p_len; ++n) {
    for (long tau = -max_lag; tau <= max_lag; ++tau) {
      double sum = 0.0;
      long count = 0;
      for (long start = 0; start + n < len; start += p_len) {
        const long i = start + n;
        const long j = i - tau;
        if (j < 0 || j >= len) continue;
        sum += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
        ++count;
      }
      r[static_cast<std::size_t>(n) * n_lags + static_cast<std::size_t>(tau + max_lag)] =
          count > 0 ? sum / static_cast<double>(count) : 0.0;
    }
  }

  const auto w = hann(nfft);
  double w_energy = 0.0;
  for (double v : w) w_energy += v * v;
  std::vector<double> lag_window(n_lags, 0.0);
  for (long tau = -max_lag; tau <= max_lag; ++tau) {
    double s = 0.0;
    for (long i = 0; i < static_cast<long>(nfft); ++i) {
      const long j = i - tau;
      if (j >= 0 && j < static_cast<long>(nfft)) s += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)];
    }
    lag_window[static_cast<std::size_t>(tau + max_lag)] = s / w_energy;
  }

  const std::size_t bins = nfft / 2 + 1;
  std::vector<cplx> out(alphas.size() * bins, cplx(0.0));
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    std::vector<cplx> caf(n_lags, cplx(0.0));
    for (std::size_t t = 0; t < n_lags; ++t) {
      cplx sum(0.0);
      for (std::size_t n = 0; n < period; ++n) sum += r[n * n_lags + t] * shift_phasor(alphas[a], fs, n);
      caf[t] = sum / static_cast<double>(period);
    }
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
      cplx sum(0.0);
      for (long tau = -max_lag; tau <= max_lag; ++tau) {
        const std::size_t t = static_cast<std::size_t>(tau + max_lag);
        const double cycles = std::fmod(f * static_cast<double>(tau) / fs, 1.0);
        sum += caf[t] * lag_window[t] * std::polar(1.0, -kTwoPi * cycles);
      }
      out[a * bins + k] = sum / fs;
    }
  }
  return out;
}

void validate_bands(const std::vector<Band>& bands) {
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!(bands[i].hi_hz > bands[i].lo_hz)) throw InvalidArgument("band upper edge must exceed its lower edge");
    if (i > 0 && bands[i].lo_hz < bands[i - 1].hi_hz) {
      throw InvalidArgument("bands must be ordered and non-overlapping");
    }
  }
}

long band_index(const std::vector<Band>& bands, double f) {
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const bool last = i + 1 == bands.size();
    if (f >= bands[i].lo_hz && (f < bands[i].hi_hz || (last && f == bands[i].hi_hz))) return static_cast<long>(i);
  }
  return -1;
}

namespace {

struct TraceResult {
  std::vector<double> pct;  // per requested alpha
  long band = -1;
  std::size_t masked = 0;
  bool excluded = false;
};

}  // namespace

CyclicStats cyclic_stats(const TraceSet& set, const CyclicStatsRequest& req, unsigned threads) {
  if (!(req.threshold > 0.0 && req.threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (!(req.f_max_hz >= req.f_min_hz)) throw EmptyRange("frequency range is empty");
  validate_bands(req.bands);
  const double fs = set.sample_rate_hz();
  std::vector<double> alphas = req.alphas;
  if (!req.bands.empty() && std::find(alphas.begin(), alphas.end(), req.band_alpha_hz) == alphas.end()) {
    alphas.push_back(req.band_alpha_hz);
  }
  const std::size_t nfft = req.nfft == 0 ? auto_nfft(fs, alphas) : req.nfft;
  {
    bool any = false;
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
      any = any || (f >= req.f_min_hz && f <= req.f_max_hz);
    }
    if (!any) throw EmptyRange("no spectral bin lies in the requested frequency range");
  }

  std::vector<TraceResult> results(set.size());
  parallel_for(set.size(), threads, [&](std::size_t t) {
    CyclicSpectrum sp = csd(set.trace(t), fs, alphas, nfft);
    csc(sp);
    TraceResult& res = results[t];
    for (double a : req.alphas) {
      const std::size_t row = sp.row(a);
      res.masked += sp.masked[row];
      std::size_t total = 0;
      std::size_t over = 0;
      for (std::size_t k = 0; k < sp.cols(); ++k) {
        const double f = sp.freqs[k];
        if (f < req.f_min_hz || f > req.f_max_hz || !sp.valid_at(row, k)) continue;
        ++total;
        if (std::abs(sp.csc_at(row, k)) > req.threshold) ++over;
      }
      if (total == 0) {
        res.excluded = true;
        return;
      }
      res.pct.push_back(100.0 * static_cast<double>(over) / static_cast<double>(total));
    }
    if (!req.bands.empty()) {
      const std::size_t row = sp.row(req.band_alpha_hz);
      double best = -1.0;
      for (std::size_t k = 0; k < sp.cols(); ++k) {
        if (!sp.valid_at(row, k) || band_index(req.bands, sp.freqs[k]) < 0) continue;
        const double m = std::abs(sp.csc_at(row, k));
        if (m > best) {
          best = m;
          res.band = band_index(req.bands, sp.freqs[k]);
        }
      }
      if (res.band < 0) res.excluded = true;
    }
  });

  CyclicStats out;
  out.alphas = req.alphas;
  out.bands = req.bands;
  out.nfft = nfft;
  out.exceedance_pct.assign(req.alphas.size(), 0.0);
  out.band_pct.assign(req.bands.size(), 0.0);
  std::size_t used = 0;
  for (const auto& r : results) {
    out.masked_bins += r.masked;
    if (r.excluded) {
      ++out.excluded_traces;
      continue;
    }
    ++used;
    for (std::size_t a = 0; a < r.pct.size(); ++a) out.exceedance_pct[a] += r.pct[a];
    if (r.band >= 0) out.band_pct[static_cast<std::size_t>(r.band)] += 1.0;
  }
  if (used == 0) throw EmptyRange("every trace has all bins of the frequency range masked");
  for (auto& v : out.exceedance_pct) v /= static_cast<double>(used);
  for (auto& v : out.band_pct) v *= 100.0 / static_cast<double>(used);
  return out;
}

std::vector<double> exceedance_stats(const TraceSet& set, const std::vector<double>& alphas, double threshold,
                                     std::pair<double, double> f_range, std::size_t nfft, unsigned threads) {
  CyclicStatsRequest req;
  req.alphas = alphas;
  req.threshold = threshold;
  req.f_min_hz = f_range.first;
  req.f_max_hz = f_range.second;
  req.nfft = nfft;
  return cyclic_stats(set, req, threads).exceedance_pct;
}

std::vector<double> max_coeff_distribution(const TraceSet& set, double alpha, const std::vector<Band>& bands,
                                           std::size_t nfft, unsigned threads) {
  if (bands.empty()) throw EmptyRange("max_coeff_distribution: no bands");
  validate_bands(bands);
  CyclicStatsRequest req;
  req.alphas = {};
  req.band_alpha_hz = alpha;
  req.bands = bands;
  req.f_min_hz = bands.front().lo_hz;
  req.f_max_hz = bands.back().hi_hz;
  req.nfft = nfft;
  return cyclic_stats(set, req, threads).band_pct;
}

}  // namespace nggan::metrics

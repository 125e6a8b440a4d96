#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nggan/trace.hpp"

// Cyclic spectral analysis.
//
// Estimator: time-smoothed cyclic periodogram. The trace is cut into Hann
// windowed segments of nfft samples with 50% overlap. For each segment X(f) is
// its DFT and X(f + alpha) the DFT of the same segment after multiplying the
// whole trace by exp(-j 2 pi alpha n / fs), with n counted from the start of
// the trace so every segment shares one phase reference. Then
//   csd(alpha, f) = mean_seg X(f + alpha) conj(X(f)) / (fs sum w^2)
//   psd(f)        = csd(0, f)
//   shifted(f)    = mean_seg |X(f + alpha)|^2 / (fs sum w^2)
//   csc(alpha, f) = csd(alpha, f) / sqrt(psd(f) shifted(f))
// so |csc| <= 1 by Cauchy-Schwarz. Frequencies are the bins 0..nfft/2.
namespace nggan::metrics {

using cplx = std::complex<double>;

struct CyclicSpectrum {
  double sample_rate_hz = 0.0;
  std::size_t nfft = 0;
  std::size_t segments = 0;
  std::vector<double> alphas;  // Hz
  std::vector<double> freqs;   // Hz
  // Row-major |alphas| x |freqs|.
  std::vector<cplx> csd;
  std::vector<double> shifted_psd;
  std::vector<cplx> csc;          // filled by csc()
  std::vector<unsigned char> valid;  // 0 where a PSD factor is below the mask floor
  std::vector<std::size_t> masked;   // masked bin count per alpha row

  std::size_t rows() const { return alphas.size(); }
  std::size_t cols() const { return freqs.size(); }
  const cplx& csd_at(std::size_t a, std::size_t f) const { return csd[a * cols() + f]; }
  const cplx& csc_at(std::size_t a, std::size_t f) const { return csc[a * cols() + f]; }
  bool valid_at(std::size_t a, std::size_t f) const { return valid[a * cols() + f] != 0; }
  // Row holding `alpha` (exact match). Throws InvalidArgument when absent.
  std::size_t row(double alpha) const;
};

// Bins whose PSD factor is below this fraction of the peak PSD are masked.
inline constexpr double kCscMaskFloor = 1e-12;

// Smallest segment length resolving every nonzero alpha: ceil(fs / min alpha).
// Falls back to 256 when alphas has no nonzero entry.
std::size_t auto_nfft(double sample_rate_hz, std::span<const double> alphas);

// nfft = 0 selects auto_nfft. Throws LengthError if the trace is shorter than
// 2 nfft, ResolutionError if a nonzero alpha is below fs / nfft or above fs / 2,
// InvalidArgument for a negative alpha. Row alpha = 0 is always computed (it is
// inserted first when absent) since csc needs it.
CyclicSpectrum csd(std::span<const float> samples, double sample_rate_hz, std::vector<double> alphas,
                   std::size_t nfft = 0);
CyclicSpectrum csd(std::span<const double> samples, double sample_rate_hz, std::vector<double> alphas,
                   std::size_t nfft = 0);

// Fills csc, valid and masked. Row alpha = 0 is exactly 1 on unmasked bins.
void csc(CyclicSpectrum& spectrum);

// Reference evaluation from an explicit time-varying autocorrelation, for
// short traces that contain whole periods of `period` samples:
//   r[n; tau] = mean over periods p of x[pP + n] x[pP + n - tau]   (terms inside the trace)
//   R^a[tau]  = (1/P) sum_{n<P} r[n; tau] exp(-j 2 pi a n / fs)
//   S(a; f)   = sum_{|tau| < nfft} R^a[tau] h[tau] exp(-j 2 pi f tau / fs)
// with h the lag window implied by the Hann segment window (its normalized
// autocorrelation), so S matches what the segment estimator converges to.
// Returns |alphas| x (nfft/2 + 1) values, row-major.
std::vector<cplx> csd_direct(std::span<const double> samples, double sample_rate_hz, std::size_t period,
                             const std::vector<double>& alphas, std::size_t nfft);

struct Band {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

struct CyclicStatsRequest {
  std::vector<double> alphas;
  double threshold = 0.5;
  double f_min_hz = 0.0;
  double f_max_hz = 200e3;
  // Band distribution of argmax_f |csc(band_alpha; f)|; skipped when bands is empty.
  double band_alpha_hz = 122.0;
  std::vector<Band> bands;
  std::size_t nfft = 0;
};

struct CyclicStats {
  std::vector<double> alphas;
  std::vector<double> exceedance_pct;  // per alpha, mean over traces
  std::vector<Band> bands;
  std::vector<double> band_pct;        // per band, share of traces
  std::size_t nfft = 0;
  std::size_t masked_bins = 0;         // total over traces and rows
  std::size_t excluded_traces = 0;     // traces with every bin of the range masked
};

// Half-open [lo, hi) bands; the last band also takes its upper edge. Bands
// must be ordered and non-overlapping (InvalidArgument).
void validate_bands(const std::vector<Band>& bands);
// Index of the band holding f, or -1.
long band_index(const std::vector<Band>& bands, double f_hz);

// One pass over the set computing exceedance and band statistics. Traces whose
// bins in range are all masked are excluded from the averages. Throws
// EmptyRange when the frequency range holds no bin or every trace is excluded.
CyclicStats cyclic_stats(const TraceSet& set, const CyclicStatsRequest& request, unsigned threads = 1);

// Percentage of unmasked bins in [f_min, f_max] with |csc| > threshold, averaged
// over traces, per alpha. Threshold must lie in (0, 1).
std::vector<double> exceedance_stats(const TraceSet& set, const std::vector<double>& alphas, double threshold,
                                     std::pair<double, double> f_range, std::size_t nfft = 0, unsigned threads = 1);

// Share of traces whose argmax_f |csc(alpha; f)| lies in each band.
std::vector<double> max_coeff_distribution(const TraceSet& set, double alpha, const std::vector<Band>& bands,
                                           std::size_t nfft = 0, unsigned threads = 1);

}  // namespace nggan::metrics

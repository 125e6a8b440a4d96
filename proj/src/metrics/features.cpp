#include "nggan/metrics/features.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "nggan/error.hpp"
#include "nggan/fft.hpp"
#include "nggan/parallel.hpp"

namespace nggan::metrics {

namespace {

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

// Central moments with 1/n normalization.
Moments central_moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  m.mean = sum / n;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

bool is_constant(std::span<const double> x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *lo == *hi;
}

}  // namespace

std::array<double, 9> FeatureVector::values() const {
  return {max_v, mean_v, energy, std_dev, skewness, kurtosis, peak_count, acf_skewness, acf_kurtosis};
}

std::array<double, 8> FeatureVector::pca_values() const {
  return {max_v, mean_v, energy, std_dev, skewness, kurtosis, acf_skewness, acf_kurtosis};
}

std::vector<double> autocorr(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw LengthError("autocorr: need at least 2 samples");
  if (is_constant(samples)) throw DegenerateInput("autocorr: constant trace");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> padded(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = samples[i] - mean;
  auto spec = fft::rfft(padded);
  for (auto& c : spec) c = std::norm(c);
  const auto acov = fft::irfft(spec, 2 * n);
  if (!(acov[0] > 0.0)) throw DegenerateInput("autocorr: zero variance");
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = acov[k] / acov[0];
  r[0] = 1.0;
  return r;
}

FeatureVector feature_vector(std::span<const double> x, double thresh_volts) {
  if (x.size() < 4) throw LengthError("feature_vector: need at least 4 samples, got " + std::to_string(x.size()));
  if (is_constant(x)) throw DegenerateInput("feature_vector: zero-variance trace");
  const double n = static_cast<double>(x.size());
  FeatureVector f;
  f.thresh_volts = thresh_volts;
  const Moments m = central_moments(x);
  if (!(m.m2 > 0.0)) throw DegenerateInput("feature_vector: zero-variance trace");
  f.max_v = *std::max_element(x.begin(), x.end());
  f.mean_v = m.mean;
  double energy = 0.0;
  for (double v : x) energy += v * v;
  f.energy = energy / n;
  f.std_dev = std::sqrt(m.m2 * n / (n - 1.0));
  f.skewness = m.m3 / std::pow(m.m2, 1.5);
  f.kurtosis = m.m4 / (m.m2 * m.m2);
  f.peak_count = static_cast<double>(
      std::count_if(x.begin(), x.end(), [thresh_volts](double v) { return std::abs(v) > thresh_volts; }));

  const auto r = autocorr(x);
  const std::span<const double> lags(r.data() + 1, r.size() - 1);
  const Moments ma = central_moments(lags);
  if (!(ma.m2 > 0.0)) throw DegenerateInput("feature_vector: constant autocorrelation sequence");
  f.acf_skewness = ma.m3 / std::pow(ma.m2, 1.5);
  f.acf_kurtosis = ma.m4 / (ma.m2 * ma.m2);
  return f;
}

FeatureVector feature_vector(std::span<const float> samples, double thresh_volts) {
  const std::vector<double> x(samples.begin(), samples.end());
  return feature_vector(std::span<const double>(x), thresh_volts);
}

FeatureVector feature_vector(const NoiseTrace& trace, double thresh_volts) {
  return feature_vector(trace.samples(), thresh_volts);
}

std::vector<FeatureVector> feature_set(const TraceSet& set, double thresh_volts, unsigned threads,
                                       std::size_t* skipped) {
  std::vector<std::optional<FeatureVector>> slots(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = feature_vector(set.trace(i), thresh_volts);
    } catch (const DegenerateInput&) {
      if (!skipped) throw;
    }
  });
  std::vector<FeatureVector> out;
  out.reserve(set.size());
  std::size_t missing = 0;
  for (auto& s : slots) {
    if (s) {
      out.push_back(*s);
    } else {
      ++missing;
    }
  }
  if (skipped) *skipped = missing;
  return out;
}

Eigen::MatrixXd pca_feature_matrix(const std::vector<FeatureVector>& features) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(kPcaFeatureCount));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto v = features[i].pca_values();
    for (std::size_t j = 0; j < kPcaFeatureCount; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
  }
  return m;
}

}  // namespace nggan::metrics

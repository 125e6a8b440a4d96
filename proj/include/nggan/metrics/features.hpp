#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nggan/trace.hpp"

namespace nggan::metrics {

// Per-trace statistics, in table order (1)-(9).
struct FeatureVector {
  double max_v = 0.0;       // largest sample (signed)
  double mean_v = 0.0;
  double energy = 0.0;      // mean of squares
  double std_dev = 0.0;     // 1/(N-1) normalization
  double skewness = 0.0;    // 1/N central moments
  double kurtosis = 0.0;
  double peak_count = 0.0;  // #{n : |s[n]| > thresh}
  double acf_skewness = 0.0;
  double acf_kurtosis = 0.0;
  double thresh_volts = 0.05;

  std::array<double, 9> values() const;
  // The eight features used for PCA and FID: all but the peak count.
  std::array<double, 8> pca_values() const;
};

inline constexpr std::array<std::string_view, 9> kFeatureNames = {
    "max", "mean", "energy", "std", "skewness", "kurtosis", "peak_count", "acf_skewness", "acf_kurtosis"};
inline constexpr std::size_t kPcaFeatureCount = 8;

// Throws LengthError for fewer than 4 samples, DegenerateInput for zero variance.
FeatureVector feature_vector(std::span<const float> samples, double thresh_volts = 0.05);
FeatureVector feature_vector(std::span<const double> samples, double thresh_volts = 0.05);
FeatureVector feature_vector(const NoiseTrace& trace, double thresh_volts = 0.05);

// r_k = c_k / c_0 for k = 0..N-1, c_k = (1/N) sum_{n<N-k} (s[n]-mu)(s[n+k]-mu).
// Computed with a zero-padded FFT. Throws DegenerateInput for zero variance.
std::vector<double> autocorr(std::span<const double> samples);

// Features of every trace. Zero-variance traces are skipped and counted in
// `skipped` when it is given, otherwise DegenerateInput propagates.
std::vector<FeatureVector> feature_set(const TraceSet& set, double thresh_volts = 0.05, unsigned threads = 1,
                                       std::size_t* skipped = nullptr);

// Rows of pca_values(), one per trace.
Eigen::MatrixXd pca_feature_matrix(const std::vector<FeatureVector>& features);

}  // namespace nggan::metrics

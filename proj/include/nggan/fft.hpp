#pragma once

#include <complex>
#include <span>
#include <vector>

// Thin FFTW wrapper. Plans are created with FFTW_ESTIMATE, cached per thread and
// keyed by (kind, length); any length is accepted.
namespace nggan::fft {

using cplx = std::complex<double>;

// Unnormalized forward transform, X[k] = sum_n x[n] exp(-2 pi i k n / N).
std::vector<cplx> forward(std::span<const cplx> x);
// Unnormalized inverse transform (no 1/N).
std::vector<cplx> inverse(std::span<const cplx> x);

// Real-input forward transform, N/2 + 1 bins.
std::vector<cplx> rfft(std::span<const double> x);
// Inverse of rfft including the 1/N factor; `n` is the time-domain length.
std::vector<double> irfft(std::span<const cplx> spectrum, std::size_t n);

}  // namespace nggan::fft

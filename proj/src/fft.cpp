#include "nggan/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "nggan/error.hpp"

namespace nggan::fft {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

enum class Kind { Forward, Inverse, R2C, C2R };

struct PlanCache {
  std::map<std::tuple<Kind, std::size_t>, fftw_plan> plans;

  ~PlanCache() {
    std::lock_guard lock(planner_mutex());
    for (auto& [key, plan] : plans) fftw_destroy_plan(plan);
  }

  fftw_plan get(Kind kind, std::size_t n) {
    auto key = std::make_tuple(kind, n);
    if (auto it = plans.find(key); it != plans.end()) return it->second;
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::Forward:
      case Kind::Inverse: {
        auto* a = fftw_alloc_complex(n);
        auto* b = fftw_alloc_complex(n);
        plan = fftw_plan_dft_1d(len, a, b, kind == Kind::Forward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
        fftw_free(a);
        fftw_free(b);
        break;
      }
      case Kind::R2C: {
        auto* a = fftw_alloc_real(n);
        auto* b = fftw_alloc_complex(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(len, a, b, flags);
        fftw_free(a);
        fftw_free(b);
        break;
      }
      case Kind::C2R: {
        auto* a = fftw_alloc_complex(n / 2 + 1);
        auto* b = fftw_alloc_real(n);
        plan = fftw_plan_dft_c2r_1d(len, a, b, flags);
        fftw_free(a);
        fftw_free(b);
        break;
      }
    }
    if (!plan) throw NumericsError("FFTW failed to create a plan of length " + std::to_string(n));
    plans.emplace(key, plan);
    return plan;
  }
};

fftw_plan plan_for(Kind kind, std::size_t n) {
  if (n == 0) throw LengthError("FFT of length 0");
  thread_local PlanCache cache;
  return cache.get(kind, n);
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

std::vector<cplx> forward(std::span<const cplx> x) {
  std::vector<cplx> in(x.begin(), x.end());
  std::vector<cplx> out(x.size());
  fftw_execute_dft(plan_for(Kind::Forward, x.size()), as_fftw(in.data()), as_fftw(out.data()));
  return out;
}

std::vector<cplx> inverse(std::span<const cplx> x) {
  std::vector<cplx> in(x.begin(), x.end());
  std::vector<cplx> out(x.size());
  fftw_execute_dft(plan_for(Kind::Inverse, x.size()), as_fftw(in.data()), as_fftw(out.data()));
  return out;
}

std::vector<cplx> rfft(std::span<const double> x) {
  std::vector<double> in(x.begin(), x.end());
  std::vector<cplx> out(x.size() / 2 + 1);
  fftw_execute_dft_r2c(plan_for(Kind::R2C, x.size()), in.data(), as_fftw(out.data()));
  return out;
}

std::vector<double> irfft(std::span<const cplx> spectrum, std::size_t n) {
  if (spectrum.size() != n / 2 + 1) {
    throw LengthError("irfft: expected " + std::to_string(n / 2 + 1) + " bins, got " +
                      std::to_string(spectrum.size()));
  }
  std::vector<cplx> in(spectrum.begin(), spectrum.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(plan_for(Kind::C2R, n), as_fftw(in.data()), out.data());
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv;
  return out;
}

}  // namespace nggan::fft

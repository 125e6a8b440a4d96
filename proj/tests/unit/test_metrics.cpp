#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "nggan/error.hpp"
#include "nggan/metrics/cyclic.hpp"
#include "nggan/metrics/features.hpp"
#include "nggan/metrics/spectrogram.hpp"
#include "nggan/metrics/stats.hpp"
#include "nggan/rng.hpp"
#include "nggan/synth.hpp"

using namespace nggan;
using namespace nggan::metrics;

namespace {

std::vector<double> white(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return rng_gaussian(rng, n, 0.0, 1.0);
}

TraceSet white_set(std::size_t count, std::size_t length, double fs, std::uint64_t seed) {
  const auto v = white(count * length, seed);
  return TraceSet("white", fs, length, std::vector<float>(v.begin(), v.end()));
}

// Rows rescaled so the 1/(n-1) sample covariance is exactly `target` up to roundoff.
Eigen::MatrixXd with_covariance(Eigen::MatrixXd x, const Eigen::MatrixXd& target) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(x.rows() - 1);
  const Eigen::MatrixXd whiten = Eigen::LLT<Eigen::MatrixXd>(cov).matrixU().solve(
      Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  const Eigen::MatrixXd color = Eigen::LLT<Eigen::MatrixXd>(target).matrixU();
  return x * whiten * color;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian01();
  }
  return m;
}

// Direct double sum over an explicit time-varying autocorrelation of a trace
// made of whole periods, with the lag window of a Hann segment window.
std::vector<std::complex<double>> direct_cyclic_spectrum(const std::vector<double>& x, double fs, std::size_t period,
                                                         const std::vector<double>& alphas, std::size_t nfft) {
  const long n = static_cast<long>(x.size());
  const long lags = static_cast<long>(nfft) - 1;
  std::vector<double> w(nfft);
  double energy = 0.0;
  for (std::size_t i = 0; i < nfft; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nfft));
    energy += w[i] * w[i];
  }
  std::vector<std::complex<double>> out;
  for (double alpha : alphas) {
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
      std::complex<double> s = 0.0;
      for (long tau = -lags; tau <= lags; ++tau) {
        double h = 0.0;
        for (long i = 0; i < static_cast<long>(nfft); ++i) {
          if (i - tau >= 0 && i - tau < static_cast<long>(nfft)) h += w[i] * w[i - tau];
        }
        h /= energy;
        std::complex<double> caf = 0.0;
        for (long m = 0; m < static_cast<long>(period); ++m) {
          double r = 0.0;
          long c = 0;
          for (long i = m; i < n; i += static_cast<long>(period)) {
            if (i - tau < 0 || i - tau >= n) continue;
            r += x[i] * x[i - tau];
            ++c;
          }
          if (c > 0) caf += r / c * std::polar(1.0, -2.0 * std::numbers::pi * alpha * m / fs);
        }
        caf /= static_cast<double>(period);
        s += caf * h * std::polar(1.0, -2.0 * std::numbers::pi * f * tau / fs);
      }
      out.push_back(s / fs);
    }
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_SUITE("cyclometrics") {
  TEST_CASE("feature vector of an alternating sequence") {
    const std::vector<double> x = {1, -1, 1, -1, 1, -1, 1, -1};
    const auto f = feature_vector(std::span<const double>(x));
    CHECK(f.max_v == 1.0);
    CHECK(f.mean_v == 0.0);
    CHECK(f.energy == 1.0);
    CHECK(f.skewness == doctest::Approx(0.0));
    CHECK(f.std_dev == doctest::Approx(std::sqrt(8.0 / 7.0)));
  }

  TEST_CASE("peak count uses |s| > thresh") {
    const std::vector<double> x = {0.1, -0.06, 0.01, 0.0};
    CHECK(feature_vector(std::span<const double>(x), 0.05).peak_count == 2.0);
    CHECK_THROWS_AS(feature_vector(std::span<const double>(std::vector<double>(8, 0.5))), DegenerateInput);
    CHECK_THROWS_AS(feature_vector(std::span<const double>(std::vector<double>{1, 2})), LengthError);
  }

  TEST_CASE("normal samples give the normal moments") {
    const auto x = white(1000000, 31);
    const auto f = feature_vector(std::span<const double>(x));
    CHECK(std::fabs(f.skewness) <= 0.01);
    CHECK(std::fabs(f.kurtosis - 3.0) <= 0.05);
    CHECK(std::fabs(f.std_dev - 1.0) <= 0.005);
  }

  TEST_CASE("features are scale covariant") {
    const auto x = white(512, 4);
    for (double c : {0.1, 3.0, 17.0}) {
      std::vector<double> y(x);
      for (auto& v : y) v *= c;
      const auto a = feature_vector(std::span<const double>(x), 0.5);
      const auto b = feature_vector(std::span<const double>(y), 0.5 * c);
      CHECK(b.max_v == doctest::Approx(c * a.max_v).epsilon(1e-12));
      CHECK(b.std_dev == doctest::Approx(c * a.std_dev).epsilon(1e-12));
      CHECK(b.energy == doctest::Approx(c * c * a.energy).epsilon(1e-12));
      CHECK(b.skewness == doctest::Approx(a.skewness).epsilon(1e-9));
      CHECK(b.kurtosis == doctest::Approx(a.kurtosis).epsilon(1e-9));
      CHECK(b.peak_count == a.peak_count);
      CHECK(b.acf_skewness == doctest::Approx(a.acf_skewness).epsilon(1e-9));
      CHECK(b.acf_kurtosis == doctest::Approx(a.acf_kurtosis).epsilon(1e-9));
    }
  }

  TEST_CASE("autocorrelation") {
    const auto noise = white(100000, 8);
    const auto r = autocorr(noise);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 1; k <= 100; ++k) CHECK(std::fabs(r[k]) <= 0.02);

    std::vector<double> shifted(noise.begin(), noise.begin() + 1000);
    const auto r1 = autocorr(shifted);
    for (auto& v : shifted) v += 5.0;
    const auto r2 = autocorr(shifted);
    for (std::size_t k = 0; k < r1.size(); ++k) CHECK(std::fabs(r1[k] - r2[k]) <= 1e-9);

    // Square wave with period 40: the lag-40 value is a local maximum near 1.
    std::vector<double> sq(4000);
    for (std::size_t n = 0; n < sq.size(); ++n) sq[n] = (n % 40) < 20 ? 1.0 : -1.0;
    const auto rs = autocorr(sq);
    CHECK(rs[40] > rs[39]);
    CHECK(rs[40] > rs[41]);
    CHECK(rs[40] >= 0.98);
  }

  TEST_CASE("PCA on a line, diagonal projection, reconstruction, total variance") {
    Eigen::MatrixXd line(50, 2);
    for (int i = 0; i < 50; ++i) {
      line(i, 0) = 0.1 * i - 1.0;
      line(i, 1) = 2.0 * line(i, 0);
    }
    const auto m = pca_fit(line);
    CHECK(m.eigenvalues(0) / m.eigenvalues.sum() >= 0.99999);

    const Eigen::MatrixXd x = random_matrix(1000, 8, 12) * random_matrix(8, 8, 13);
    const auto model = pca_fit(x);
    for (Eigen::Index i = 1; i < 8; ++i) CHECK(model.eigenvalues(i - 1) >= model.eigenvalues(i));
    const Eigen::MatrixXd scores = pca_project(model, x);
    const Eigen::MatrixXd cov = covariance(scores);
    const Eigen::MatrixXd diag = model.eigenvalues.asDiagonal();
    CHECK((cov - diag).cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    CHECK((scores * model.eigenvectors.transpose() - centered).cwiseAbs().maxCoeff() <= 1e-8);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(8, 8);
    CHECK((model.eigenvectors.transpose() * model.eigenvectors - eye).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::fabs(model.eigenvalues.sum() - covariance(x).trace()) <= 1e-8);
    CHECK(pca_project(model, x, 2).cols() == 2);
    CHECK_THROWS_AS(pca_fit(random_matrix(8, 8, 1)), InvalidArgument);
  }

  TEST_CASE("FID closed forms") {
    const auto x = random_matrix(40, 8, 21);
    CHECK(std::fabs(fid(x, x)) <= 1e-9);

    const Eigen::MatrixXd one = with_covariance(random_matrix(30, 1, 22), Eigen::MatrixXd::Identity(1, 1));
    for (double d : {0.5, 1.0, 3.0}) {
      Eigen::MatrixXd g = one;
      g.array() += d;
      CHECK(std::fabs(fid(one, g) - d * d) <= 1e-9);
    }

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd a = with_covariance(random_matrix(50, 2, 23), eye);
    const Eigen::MatrixXd b = with_covariance(random_matrix(60, 2, 24), 4.0 * eye);
    CHECK(std::fabs(fid(a, b) - 2.0) <= 1e-8);

    // Commuting diagonal covariances: sum (sqrt(p) - sqrt(q))^2.
    Eigen::VectorXd p(3), q(3);
    p << 1.0, 2.0, 0.5;
    q << 3.0, 0.25, 0.5;
    const Eigen::MatrixXd pa = with_covariance(random_matrix(40, 3, 25), p.asDiagonal());
    const Eigen::MatrixXd qa = with_covariance(random_matrix(45, 3, 26), q.asDiagonal());
    const double expect = (p.cwiseSqrt() - q.cwiseSqrt()).squaredNorm();
    CHECK(std::fabs(fid(pa, qa) - expect) <= 1e-8);
    CHECK_THROWS_AS(fid(random_matrix(8, 2, 1), a), InvalidArgument);
  }

  TEST_CASE("FID is symmetric, non-negative and grows along a mean shift") {
    const auto x = random_matrix(60, 8, 31);
    const Eigen::MatrixXd y = random_matrix(70, 8, 32) * 1.5;
    CHECK(std::fabs(fid(x, y) - fid(y, x)) <= 1e-8);
    CHECK(fid(x, y) >= 0.0);
    Eigen::RowVectorXd dir = random_matrix(1, 8, 33).row(0);
    double prev = -1.0;
    for (double s : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0}) {
      Eigen::MatrixXd g = x;
      g.rowwise() += s * dir;
      const double v = fid(x, g);
      CHECK(v > prev);
      prev = v;
    }
    CHECK(fid_in_space(x, x, FidSpace::PcaScores) <= 1e-9);
    CHECK(fid_in_space(x, x, FidSpace::Standardized) <= 1e-9);
    CHECK(parse_fid_space("pca") == FidSpace::PcaScores);
    CHECK_THROWS_AS(parse_fid_space("pixels"), InvalidArgument);
  }

  TEST_CASE("white-noise PSD is flat within 1.5 dB") {
    const auto x = white(1000000, 41);
    const double fs = 400e3;
    const auto sp = csd(std::span<const double>(x), fs, {}, 256);
    REQUIRE(sp.rows() == 1);
    std::vector<double> band;
    for (std::size_t k = 0; k < sp.cols(); ++k) {
      if (sp.freqs[k] >= 0.05 * fs && sp.freqs[k] <= 0.45 * fs) band.push_back(sp.csd_at(0, k).real());
    }
    double mean = 0.0;
    for (double v : band) mean += v;
    mean /= static_cast<double>(band.size());
    // Unit-variance white noise has one-sided level 1/fs per Hz in this two-sided convention.
    CHECK(mean == doctest::Approx(1.0 / fs).epsilon(0.02));
    for (double v : band) CHECK(std::fabs(10.0 * std::log10(v / mean)) <= 1.5);
  }

  TEST_CASE("coherence: alpha 0 row is 1, bounded everywhere, small on white noise") {
    const double fs = 25e3;
    const auto x = white(100000, 42);
    auto sp = csd(std::span<const double>(x), fs, {122.0, 244.0}, 256);
    csc(sp);
    const auto r0 = sp.row(0.0);
    std::vector<double> mags;
    for (std::size_t a = 0; a < sp.rows(); ++a) {
      for (std::size_t k = 0; k < sp.cols(); ++k) {
        if (!sp.valid_at(a, k)) continue;
        CHECK(std::abs(sp.csc_at(a, k)) <= 1.0 + 1e-6);
        if (a == r0) CHECK(std::abs(sp.csc_at(a, k) - 1.0) <= 1e-12);
        if (sp.alphas[a] == 122.0) mags.push_back(std::abs(sp.csc_at(a, k)));
      }
    }
    CHECK(median(mags) <= 0.1);
  }

  TEST_CASE("FRESH output is cyclic at its fundamental, not at an off-cycle control") {
    auto cfg = synth::fresh_dataset2_desk();
    Rng rng(43);
    const auto set = synth::gen_fresh(cfg, 16, 4096, rng);
    double on = 0.0, off = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto tr = set.trace(i);
      const auto sp = csd(tr, cfg.sample_rate_hz, {103.0, 122.0}, 256);
      for (std::size_t k = 0; k < sp.cols(); ++k) {
        on += std::abs(sp.csd_at(sp.row(122.0), k));
        off += std::abs(sp.csd_at(sp.row(103.0), k));
      }
    }
    CHECK(on > off);
  }

  TEST_CASE("segment estimator agrees with a direct double sum on periodic traces") {
    const double fs = 400e3;
    const std::size_t period = 4, nfft = 16;
    const std::vector<double> alphas = {0.0, fs / static_cast<double>(period)};
    Rng rng(44);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> shape(period);
      for (auto& v : shape) v = rng.gaussian01();
      std::vector<double> x(64);
      for (std::size_t n = 0; n < x.size(); ++n) x[n] = shape[n % period];
      const auto oracle = direct_cyclic_spectrum(x, fs, period, alphas, nfft);
      const auto lib = csd_direct(x, fs, period, alphas, nfft);
      REQUIRE(lib.size() == oracle.size());
      for (std::size_t i = 0; i < lib.size(); ++i) CHECK(std::abs(lib[i] - oracle[i]) <= 1e-12 * fs);

      const auto sp = csd(std::span<const double>(x), fs, alphas, nfft);
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        const std::size_t row = sp.row(alphas[a]);
        double peak = 0.0;
        for (std::size_t k = 0; k < sp.cols(); ++k) peak = std::max(peak, std::abs(oracle[a * sp.cols() + k]));
        for (std::size_t k = 0; k < sp.cols(); ++k) {
          const auto ref = oracle[a * sp.cols() + k];
          if (std::abs(ref) < 0.5 * peak) continue;
          CHECK(std::abs(sp.csd_at(row, k) - ref) <= 0.05 * std::abs(ref));
        }
      }
    }
  }

  TEST_CASE("csd argument checks") {
    const auto x = white(1024, 1);
    CHECK_THROWS_AS(csd(std::span<const double>(x), 1e3, {0.5}, 256), ResolutionError);
    CHECK_THROWS_AS(csd(std::span<const double>(x), 1e3, {600.0}, 256), ResolutionError);
    CHECK_THROWS_AS(csd(std::span<const double>(x), 1e3, {-5.0}, 256), InvalidArgument);
    CHECK_THROWS_AS(csd(std::span<const double>(x), 1e3, {100.0}, 1024), LengthError);
    CHECK(auto_nfft(400e3, std::vector<double>{122.0, 244.0}) == 3279);
  }

  TEST_CASE("exceedance: coherent rows give 100%, white noise stays low, self error is 0") {
    const auto noise = white_set(8, 4096, 25e3, 51);
    const auto ones = exceedance_stats(noise, {0.0}, 0.5, {0.0, 12.5e3});
    CHECK(ones[0] == doctest::Approx(100.0));
    const std::vector<double> alphas = {122, 244, 366, 488, 610, 732};
    const auto pct = exceedance_stats(noise, alphas, 0.9, {0.0, 12.5e3});
    for (double p : pct) CHECK(p <= 5.0);
    const auto again = exceedance_stats(noise, alphas, 0.9, {0.0, 12.5e3});
    double err = 0.0;
    for (std::size_t i = 0; i < pct.size(); ++i) err += std::fabs(pct[i] - again[i]);
    CHECK(err == 0.0);
    CHECK_THROWS_AS(exceedance_stats(noise, alphas, 1.0, {0.0, 12.5e3}), InvalidArgument);
  }

  TEST_CASE("bands are half-open with the last one closed") {
    const std::vector<Band> bands = {{0, 50e3}, {50e3, 100e3}, {100e3, 200e3}};
    CHECK(band_index(bands, 0.0) == 0);
    CHECK(band_index(bands, 49999.0) == 0);
    // An argmax on a shared edge belongs to the band it opens.
    CHECK(band_index(bands, 50e3) == 1);
    CHECK(band_index(bands, 200e3) == 2);
    CHECK(band_index(bands, 200001.0) == -1);
    CHECK_THROWS_AS(validate_bands({{0, 10}, {5, 20}}), InvalidArgument);
    CHECK_THROWS_AS(validate_bands({{10, 10}}), InvalidArgument);
  }

  TEST_CASE("identical traces put every argmax in one band") {
    const auto one = white(4096, 61);
    std::vector<float> data;
    for (int i = 0; i < 6; ++i) data.insert(data.end(), one.begin(), one.end());
    const TraceSet set("same", 25e3, 4096, data);
    const std::vector<Band> bands = {{0, 3125}, {3125, 6250}, {6250, 9375}, {9375, 12500}};
    const auto dist = max_coeff_distribution(set, 122.0, bands);
    int full = 0;
    for (double d : dist) {
      CHECK((d == 0.0 || d == doctest::Approx(100.0)));
      full += d > 0.0 ? 1 : 0;
    }
    CHECK(full == 1);
  }

  TEST_CASE("FRESH with a 30 kHz peak puts most argmaxes in the band holding 30 kHz") {
    // Only the 30 kHz peak is cyclic; a stationary white floor covers the rest of the band.
    auto cfg = synth::fresh_dataset2_like();
    cfg.random_phase = true;
    cfg.spectral_peaks[1].amplitude = 0.0;
    Rng rng(62);
    const auto fresh = synth::gen_fresh(cfg, 24, 16384, rng);
    double power = 0.0;
    for (float v : fresh.data()) power += static_cast<double>(v) * v;
    const double floor_std = 0.3 * std::sqrt(power / static_cast<double>(fresh.data().size()));
    std::vector<float> data(fresh.data().begin(), fresh.data().end());
    for (auto& v : data) v += static_cast<float>(floor_std * rng.gaussian01());
    const TraceSet set("fresh+floor", cfg.sample_rate_hz, 16384, data);
    const std::vector<Band> bands = {{0, 50e3}, {50e3, 100e3}, {100e3, 150e3}, {150e3, 200e3}};
    const auto dist = max_coeff_distribution(set, 122.0, bands);
    CHECK(dist[0] > 50.0);
  }

  TEST_CASE("cyclic_stats matches the separate passes") {
    auto cfg = synth::fresh_dataset2_desk();
    Rng rng(63);
    const auto set = synth::gen_fresh(cfg, 6, 2048, rng);
    CyclicStatsRequest req;
    req.alphas = {122, 244};
    req.threshold = 0.5;
    req.f_max_hz = 12.5e3;
    req.band_alpha_hz = 122;
    req.bands = {{0, 6250}, {6250, 12500}};
    const auto st = cyclic_stats(set, req);
    const auto ex = exceedance_stats(set, req.alphas, 0.5, {0.0, 12.5e3});
    const auto bd = max_coeff_distribution(set, 122, req.bands);
    CHECK(st.exceedance_pct == ex);
    CHECK(st.band_pct == bd);
    CHECK(cyclic_stats(set, req, 3).exceedance_pct == ex);
  }

  TEST_CASE("spectrogram: sine peak, zero input, Parseval") {
    const double fs = 400e3;
    std::vector<double> sine(8192);
    for (std::size_t n = 0; n < sine.size(); ++n) sine[n] = std::sin(2.0 * std::numbers::pi * 50e3 * n / fs);
    const auto s = spectrogram(std::span<const double>(sine), fs, 256, 128);
    const double bin_hz = fs / 256.0;
    for (std::size_t t = 0; t < s.frames; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < s.bins; ++k) {
        if (s.at(t, k) > s.at(t, best)) best = k;
      }
      CHECK(std::fabs(s.freqs_hz[best] - 50e3) <= bin_hz);
    }

    const auto z = spectrogram(std::span<const double>(std::vector<double>(1024, 0.0)), fs, 256, 64);
    for (double v : z.magnitude) CHECK(v == 0.0);

    // Periodic Hann at hop N/4 overlaps to a constant 1.5 in w^2.
    const std::size_t win = 256, hop = 64;
    const auto x = white(65536, 71);
    const auto sp = spectrogram(std::span<const double>(x), fs, win, hop);
    double stft = 0.0;
    for (std::size_t t = 0; t < sp.frames; ++t) {
      for (std::size_t k = 0; k < sp.bins; ++k) {
        const double m2 = sp.at(t, k) * sp.at(t, k);
        stft += (k == 0 || k == sp.bins - 1) ? m2 : 2.0 * m2;
      }
    }
    double wenergy = 0.0, xenergy = 0.0;
    for (std::size_t i = 0; i < win; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
      wenergy += w * w;
    }
    for (double v : x) xenergy += v * v;
    CHECK(stft * hop / (win * wenergy) == doctest::Approx(xenergy).epsilon(0.01));
    CHECK_THROWS_AS(spectrogram(std::span<const double>(x), fs, 0, 1), LengthError);
    CHECK_THROWS_AS(spectrogram(std::span<const double>(x), fs, 256, 0), InvalidArgument);
  }

  TEST_CASE("feature_set skips zero-variance traces when asked") {
    std::vector<float> data(3 * 16, 0.0f);
    Rng rng(81);
    for (std::size_t i = 16; i < data.size(); ++i) data[i] = static_cast<float>(rng.gaussian01());
    const TraceSet set("mix", 1e3, 16, data);
    std::size_t skipped = 0;
    CHECK(feature_set(set, 0.05, 1, &skipped).size() == 2);
    CHECK(skipped == 1);
    CHECK_THROWS_AS(feature_set(set), DegenerateInput);
    CHECK(pca_feature_matrix(feature_set(set, 0.05, 1, &skipped)).cols() == 8);
  }
}

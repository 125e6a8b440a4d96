#include "nggan/metrics/stats.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "nggan/error.hpp"

namespace nggan::metrics {

namespace {

constexpr Eigen::Index kMinFidRows = 9;

void check_finite(const Eigen::MatrixXd& x, const char* who) {
  if (!x.allFinite()) throw InvalidArgument(std::string(who) + ": non-finite feature value");
}

// Symmetric PSD square root; negative round-off eigenvalues are treated as 0.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw NumericsError("fid: eigendecomposition did not converge");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::VectorXd column_means(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw InvalidArgument("column_means: no rows");
  return x.colwise().mean().transpose();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw InvalidArgument("covariance: need at least 2 rows");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

PcaModel pca_fit(const Eigen::MatrixXd& features) {
  check_finite(features, "pca_fit");
  if (features.cols() == 0 || features.rows() < features.cols() + 1) {
    throw InvalidArgument("pca_fit: need at least " + std::to_string(features.cols() + 1) + " rows, got " +
                          std::to_string(features.rows()));
  }
  const Eigen::MatrixXd cov = covariance(features);
  if (!cov.allFinite()) throw NumericsError("pca_fit: covariance is not finite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericsError("pca_fit: eigendecomposition did not converge");
  const Eigen::Index d = cov.rows();
  PcaModel model;
  model.means = column_means(features);
  model.eigenvalues.resize(d);
  model.eigenvectors.resize(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index src = d - 1 - j;  // solver order is ascending
    model.eigenvalues(j) = std::max(0.0, es.eigenvalues()(src));
    Eigen::VectorXd v = es.eigenvectors().col(src);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0.0) v = -v;
    model.eigenvectors.col(j) = v;
  }
  return model;
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& features, std::size_t k) {
  const auto d = model.eigenvectors.cols();
  if (features.cols() != model.means.size()) throw ShapeError("pca_project: feature count mismatch");
  const Eigen::Index keep = k == 0 ? d : static_cast<Eigen::Index>(k);
  if (keep > d) throw InvalidArgument("pca_project: k exceeds the feature count");
  const Eigen::MatrixXd centered = features.rowwise() - model.means.transpose();
  return centered * model.eigenvectors.leftCols(keep);
}

double fid(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g) {
  if (x.cols() != g.cols()) throw ShapeError("fid: feature count mismatch");
  if (x.rows() < kMinFidRows || g.rows() < kMinFidRows) {
    throw InvalidArgument("fid: need at least 9 rows per set");
  }
  check_finite(x, "fid");
  check_finite(g, "fid");
  const Eigen::VectorXd dmu = column_means(x) - column_means(g);
  const Eigen::MatrixXd sx = covariance(x);
  const Eigen::MatrixXd sg = covariance(g);
  const Eigen::MatrixXd rx = sqrt_psd(sx);
  Eigen::MatrixXd inner = rx * sg * rx;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericsError("fid: eigendecomposition did not converge");
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = dmu.squaredNorm() + sx.trace() + sg.trace() - 2.0 * tr_sqrt;
  if (!std::isfinite(value)) throw NumericsError("fid: non-finite result");
  if (value < 0.0) {
    const double tol = 1e-8 * std::max(1.0, sx.trace() + sg.trace());
    if (value < -tol) throw NumericsError("fid: negative result " + std::to_string(value));
    return 0.0;
  }
  return value;
}

FidSpace parse_fid_space(std::string_view name) {
  if (name == "standardized") return FidSpace::Standardized;
  if (name == "pca") return FidSpace::PcaScores;
  throw InvalidArgument("unknown FID space '" + std::string(name) + "' (expected standardized or pca)");
}

std::string_view to_string(FidSpace space) { return space == FidSpace::PcaScores ? "pca" : "standardized"; }

double fid_in_space(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& gen, FidSpace space) {
  if (space == FidSpace::PcaScores) {
    const PcaModel model = pca_fit(ref);
    return fid(pca_project(model, ref), pca_project(model, gen));
  }
  if (ref.rows() < 2) throw InvalidArgument("fid: need at least 2 reference rows");
  const Eigen::RowVectorXd mu = ref.colwise().mean();
  Eigen::RowVectorXd sd = ((ref.rowwise() - mu).colwise().squaredNorm() / static_cast<double>(ref.rows() - 1))
                              .cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd(j) > 0.0)) sd(j) = 1.0;
  const Eigen::MatrixXd zr = (ref.rowwise() - mu).array().rowwise() / sd.array();
  const Eigen::MatrixXd zg = (gen.rowwise() - mu).array().rowwise() / sd.array();
  return fid(zr, zg);
}

}  // namespace nggan::metrics

#pragma once

#include <vector>

#include <Eigen/Core>

#include "nggan/metrics/features.hpp"

// PCA and the Frechet distance over feature matrices (rows = traces).
namespace nggan::metrics {

// Column means and the 1/(n-1) covariance.
Eigen::VectorXd column_means(const Eigen::MatrixXd& x);
Eigen::MatrixXd covariance(const Eigen::MatrixXd& x);

struct PcaModel {
  Eigen::VectorXd means;
  Eigen::MatrixXd eigenvectors;  // orthonormal columns, matching `eigenvalues`
  Eigen::VectorXd eigenvalues;   // descending, >= 0
};

// Needs n >= d + 1 rows of finite values. Throws InvalidArgument otherwise and
// NumericsError if the covariance is not finite.
PcaModel pca_fit(const Eigen::MatrixXd& features);
// Centered features times the first k eigenvectors (k = 0 means all).
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& features, std::size_t k = 0);

// |mu_x - mu_g|^2 + Tr(S_x + S_g - 2 (S_x S_g)^(1/2)). The trace of the square
// root is taken from the eigenvalues of S_x^(1/2) S_g S_x^(1/2), which is
// symmetric and similar to S_x S_g. Tiny negative totals are clamped to 0.
// Needs at least 9 rows in each set.
double fid(const Eigen::MatrixXd& x_feats, const Eigen::MatrixXd& g_feats);

enum class FidSpace {
  Standardized,  // z-scored by the reference set's mean and std
  PcaScores,     // scores on a PCA fitted to the reference set
};

FidSpace parse_fid_space(std::string_view name);
std::string_view to_string(FidSpace space);

// FID between a reference and a generated feature set in the chosen space.
double fid_in_space(const Eigen::MatrixXd& ref_feats, const Eigen::MatrixXd& gen_feats,
                    FidSpace space = FidSpace::Standardized);

}  // namespace nggan::metrics

#pragma once

#include <Eigen/Core>

namespace lmc {

struct PcaResult {
  // Row i is the i-th principal direction, sorted by explained variance.
  // Sign convention: the largest-magnitude entry of each row is positive.
  Eigen::MatrixXd components;                // D x D, orthonormal rows
  Eigen::VectorXd explained_variance_ratio;  // non-negative, non-increasing, sums to 1
  Eigen::VectorXd mean;

  // Mean-centered projection onto the first `dims` components.
  Eigen::MatrixXd project(const Eigen::MatrixXd& X, int dims) const;
};

// Exact covariance eigendecomposition; fine for the latent widths in play
// (D <= 64). Zero-variance input maps to the (1, 0, ...) ratio convention.
PcaResult pca(const Eigen::MatrixXd& X);

// Smallest d whose cumulative explained-variance ratio reaches `threshold`.
int choose_target_dim(const Eigen::VectorXd& ratios, double threshold);

}  // namespace lmc

#include "lmc/pca.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace lmc {

Eigen::MatrixXd PcaResult::project(const Eigen::MatrixXd& X, int dims) const {
  if (dims < 1 || dims > components.rows()) {
    throw std::invalid_argument("PcaResult::project: dims out of range");
  }
  return (X.rowwise() - mean.transpose()) * components.topRows(dims).transpose();
}

PcaResult pca(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 2 || d < 1) {
    throw std::invalid_argument("pca: need at least 2 rows and 1 column");
  }
  if (!X.allFinite()) {
    throw std::invalid_argument("pca: non-finite input");
  }

  PcaResult result;
  result.mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - result.mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("pca: eigendecomposition failed");
  }

  // Eigen returns ascending eigenvalues; flip to descending.
  result.components.resize(d, d);
  Eigen::VectorXd eigvals(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    eigvals(i) = solver.eigenvalues()(d - 1 - i);
    result.components.row(i) = solver.eigenvectors().col(d - 1 - i).transpose();
  }

  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index arg = 0;
    result.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (result.components(i, arg) < 0.0) {
      result.components.row(i) *= -1.0;
    }
  }

  eigvals = eigvals.cwiseMax(0.0);
  const double total = eigvals.sum();
  if (total > 0.0) {
    result.explained_variance_ratio = eigvals / total;
  } else {
    // Degenerate data: all rows equal. By convention the first component
    // carries all of nothing.
    result.explained_variance_ratio = Eigen::VectorXd::Zero(d);
    result.explained_variance_ratio(0) = 1.0;
  }
  return result;
}

int choose_target_dim(const Eigen::VectorXd& ratios, double threshold) {
  if (ratios.size() == 0) {
    throw std::invalid_argument("choose_target_dim: empty ratio vector");
  }
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("choose_target_dim: threshold must be in (0, 1]");
  }
  double cum = 0.0;
  for (Eigen::Index i = 0; i < ratios.size(); ++i) {
    cum += ratios(i);
    if (cum >= threshold) {
      return static_cast<int>(i) + 1;
    }
  }
  return static_cast<int>(ratios.size());
}

}  // namespace lmc

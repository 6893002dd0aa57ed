#include "lmc/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lmc {

void adam_update(Eigen::ArrayXd& params, const Eigen::ArrayXd& grad,
                 Eigen::ArrayXd& m, Eigen::ArrayXd& v, const AdamHyper& hyper,
                 long t) {
  if (t < 1) {
    throw std::invalid_argument("adam_update: t must be >= 1");
  }
  if (grad.size() != params.size() || m.size() != params.size() ||
      v.size() != params.size()) {
    throw std::invalid_argument("adam_update: shape mismatch");
  }

  m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad;
  v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad.square();

  const double m_corr = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));

  params -= hyper.learning_rate * (m / m_corr) / ((v / v_corr).sqrt() + hyper.epsilon);
}

}  // namespace lmc

#pragma once

#include <Eigen/Core>

namespace lmc {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam step (minimization). `t` is 1-based; `m` and `v`
// are the running first/second moments and must share the gradient's size.
// Shared by the embedding optimizer and the behavior-cloning trainer.
void adam_update(Eigen::ArrayXd& params, const Eigen::ArrayXd& grad,
                 Eigen::ArrayXd& m, Eigen::ArrayXd& v, const AdamHyper& hyper,
                 long t);

}  // namespace lmc

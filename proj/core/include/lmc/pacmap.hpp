#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace lmc {

// Pair-based embedding with three edge types: scaled-distance nearest
// neighbors (attractive), mid-near pairs (weakly attractive, hold global
// structure together), and further pairs (repulsive).

struct PacmapPhase {
  int first_iter = 1;  // 1-based, inclusive
  int last_iter = 1;
  double w_nb = 2.0;
  double w_mn_start = 1000.0;
  double w_mn_end = 3.0;
  double w_fp = 1.0;
};

// Three-phase reference schedule: mid-near weight annealed 1000 -> 3 over
// the first 100 iterations, flat middle phase, then local-structure phase
// with the mid-near term switched off.
std::vector<PacmapPhase> default_weight_schedule(int iterations = 450);

struct PacmapConfig {
  int n_nb = 10;
  double mn_ratio = 0.5;
  double fp_ratio = 2.0;
  int output_dim = 2;
  int iterations = 450;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  // Full O(N^2) neighbor search instead of the 150-candidate pool; meant
  // for N <= 2000.
  bool exact_pairs = false;
  std::vector<PacmapPhase> weight_schedule = default_weight_schedule();

  void validate() const;
};

struct IndexPair {
  int i = 0;
  int j = 0;
};

struct PairSet {
  std::vector<IndexPair> neighbor_pairs;  // N * n_nb
  std::vector<IndexPair> mn_pairs;        // N * round(n_nb * mn_ratio)
  std::vector<IndexPair> fp_pairs;        // N * round(n_nb * fp_ratio)
};

// Neighbor pairs use the locally scaled squared distance
// |x_i - x_j|^2 / (sigma_i sigma_j) with sigma_i the mean Euclidean
// distance to i's 4th..6th nearest neighbors. Mid-near pairs draw six
// distinct candidates and keep the second closest; further pairs sample
// uniformly from the non-neighbors of i. Deterministic for a fixed seed.
PairSet build_pairs(const Eigen::MatrixXd& X, const PacmapConfig& config);

struct PairWeights {
  double w_nb = 1.0;
  double w_mn = 1.0;
  double w_fp = 1.0;
};

PairWeights schedule_weights(const std::vector<PacmapPhase>& schedule, int iter);

// Loss over squared embedding distances d = |y_i - y_j|^2:
//   w_nb * sum d/(10+d)  +  w_mn * sum d/(10000+d)  +  w_fp * sum 1/(1+d).
// When `gradient` is non-null it receives the exact analytic gradient.
double pacmap_loss(const Eigen::MatrixXd& Y, const PairSet& pairs,
                   const PairWeights& w, Eigen::MatrixXd* gradient = nullptr);

struct PacmapResult {
  Eigen::MatrixXd embedding;  // N x output_dim
  // Both diagnostics are measured with the final phase's weights so they
  // are comparable to each other.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// PCA initialization scaled by 0.01, then Adam over the phase schedule.
PacmapResult pacmap_embed(const Eigen::MatrixXd& X, const PacmapConfig& config);

}  // namespace lmc

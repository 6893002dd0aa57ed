#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "lmc/mountain_car.hpp"
#include "lmc/policy_net.hpp"

namespace lmc {

struct StepRecord {
  int step_index = 0;
  EnvState state;          // state the action was taken from
  Eigen::VectorXd latent;  // network latent at `state`
  double action = 0.0;
  double reward = 0.0;
};

struct Episode {
  int episode_id = 0;
  std::vector<StepRecord> steps;
  bool terminated = false;
  bool truncated = false;
  double total_reward = 0.0;
};

struct RowRef {
  int episode_id = 0;
  int step_index = 0;
};

// Concatenated latent rows of the episodes selected for analysis, plus the
// provenance needed to map any row back to its (episode, step).
struct TrajectoryDataset {
  std::vector<Episode> episodes;
  Eigen::MatrixXd latent_matrix;       // N x latent_dim
  std::vector<RowRef> row_provenance;  // aligned with latent_matrix rows

  // [begin, end) row span per episode; {-1, -1} when the episode is
  // excluded from the matrix (truncated by default).
  std::vector<std::pair<int, int>> episode_row_span;

  const Episode& episode_by_id(int episode_id) const;
};

struct ActionOverride {
  int step_index = 0;
  double action = 0.0;
};

// Rolls the policy out from s0 until termination or truncation. Overridden
// steps apply the forced action but still record the latent the network
// produced at that state: the latent trace describes what the policy sees.
Episode run_episode(const PolicyNetwork& net, const EnvConfig& config, EnvState s0,
                    const std::vector<ActionOverride>& overrides = {});

struct DatasetOptions {
  bool include_truncated = false;
};

// One episode per grid state, episode_id = grid index. Truncated episodes
// stay in `episodes` for audit but are excluded from the latent matrix
// unless asked for.
TrajectoryDataset build_dataset(const PolicyNetwork& net, const EnvConfig& config,
                                const std::vector<EnvState>& grid,
                                const DatasetOptions& options = {});

// Greedy plot-thinning filter: keep an episode iff its normalized discrete
// Hausdorff distance in state space to every already-kept episode exceeds
// tau. Affects plots only, never clustering.
std::vector<int> dedup_episodes(const TrajectoryDataset& dataset, double tau);

}  // namespace lmc

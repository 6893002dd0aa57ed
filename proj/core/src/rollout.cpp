#include "lmc/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace lmc {

const Episode& TrajectoryDataset::episode_by_id(int episode_id) const {
  for (const Episode& ep : episodes) {
    if (ep.episode_id == episode_id) return ep;
  }
  throw std::out_of_range("TrajectoryDataset: no episode with id " +
                          std::to_string(episode_id));
}

Episode run_episode(const PolicyNetwork& net, const EnvConfig& config, EnvState s0,
                    const std::vector<ActionOverride>& overrides) {
  config.validate();

  std::unordered_map<int, double> forced;
  for (const ActionOverride& o : overrides) {
    if (o.step_index < 0) {
      throw std::invalid_argument("run_episode: override step_index must be >= 0");
    }
    if (!std::isfinite(o.action)) {
      throw std::invalid_argument("run_episode: non-finite override action");
    }
    if (!forced.emplace(o.step_index, o.action).second) {
      throw std::invalid_argument("run_episode: duplicate override for step " +
                                  std::to_string(o.step_index));
    }
  }

  Episode ep;
  EnvState state = s0;
  for (int t = 0;; ++t) {
    ForwardResult fwd = forward(net, state);
    const auto it = forced.find(t);
    const double action = it != forced.end() ? it->second : fwd.action_mean;
    const StepResult sr = step(state, action, config, t);

    StepRecord rec;
    rec.step_index = t;
    rec.state = state;
    rec.latent = std::move(fwd.latent);
    rec.action = action;
    rec.reward = sr.reward;
    ep.steps.push_back(std::move(rec));
    ep.total_reward += sr.reward;

    if (sr.terminated || sr.truncated) {
      ep.terminated = sr.terminated;
      ep.truncated = sr.truncated;
      break;
    }
    state = sr.next_state;
  }
  return ep;
}

TrajectoryDataset build_dataset(const PolicyNetwork& net, const EnvConfig& config,
                                const std::vector<EnvState>& grid,
                                const DatasetOptions& options) {
  if (grid.empty()) {
    throw std::invalid_argument("build_dataset: empty start-state grid");
  }
  net.validate();

  TrajectoryDataset ds;
  ds.episodes.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Episode ep = run_episode(net, config, grid[i]);
    ep.episode_id = static_cast<int>(i);
    ds.episodes.push_back(std::move(ep));
  }

  Eigen::Index rows = 0;
  for (const Episode& ep : ds.episodes) {
    if (ep.terminated || options.include_truncated) {
      rows += static_cast<Eigen::Index>(ep.steps.size());
    }
  }
  const int latent_dim = net.latent_dim();
  ds.latent_matrix.resize(rows, latent_dim);
  ds.row_provenance.reserve(static_cast<std::size_t>(rows));
  ds.episode_row_span.resize(ds.episodes.size(), {-1, -1});

  Eigen::Index r = 0;
  for (const Episode& ep : ds.episodes) {
    if (!ep.terminated && !options.include_truncated) continue;
    const int begin = static_cast<int>(r);
    for (const StepRecord& rec : ep.steps) {
      ds.latent_matrix.row(r) = rec.latent.transpose();
      ds.row_provenance.push_back(RowRef{ep.episode_id, rec.step_index});
      ++r;
    }
    ds.episode_row_span[static_cast<std::size_t>(ep.episode_id)] = {begin,
                                                                    static_cast<int>(r)};
  }
  return ds;
}

namespace {

// Discrete Hausdorff between two state sequences after per-dimension
// min-max normalization (scales passed in).
double hausdorff(const std::vector<StepRecord>& a, const std::vector<StepRecord>& b,
                 double pos_off, double pos_scale, double vel_off, double vel_scale) {
  auto directed = [&](const std::vector<StepRecord>& from,
                      const std::vector<StepRecord>& to) {
    double worst = 0.0;
    for (const StepRecord& p : from) {
      const double px = (p.state.position - pos_off) / pos_scale;
      const double py = (p.state.velocity - vel_off) / vel_scale;
      double best = std::numeric_limits<double>::infinity();
      for (const StepRecord& q : to) {
        const double dx = px - (q.state.position - pos_off) / pos_scale;
        const double dy = py - (q.state.velocity - vel_off) / vel_scale;
        best = std::min(best, dx * dx + dy * dy);
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

}  // namespace

std::vector<int> dedup_episodes(const TrajectoryDataset& dataset, double tau) {
  if (std::isnan(tau) || tau < 0.0) {
    throw std::invalid_argument("dedup_episodes: tau must be >= 0");
  }
  if (dataset.episodes.empty()) return {};

  double pos_min = std::numeric_limits<double>::infinity();
  double pos_max = -std::numeric_limits<double>::infinity();
  double vel_min = std::numeric_limits<double>::infinity();
  double vel_max = -std::numeric_limits<double>::infinity();
  for (const Episode& ep : dataset.episodes) {
    for (const StepRecord& rec : ep.steps) {
      pos_min = std::min(pos_min, rec.state.position);
      pos_max = std::max(pos_max, rec.state.position);
      vel_min = std::min(vel_min, rec.state.velocity);
      vel_max = std::max(vel_max, rec.state.velocity);
    }
  }
  const double pos_scale = pos_max > pos_min ? pos_max - pos_min : 1.0;
  const double vel_scale = vel_max > vel_min ? vel_max - vel_min : 1.0;

  std::vector<int> kept;
  for (const Episode& ep : dataset.episodes) {
    bool keep = true;
    for (int kept_id : kept) {
      const Episode& other = dataset.episode_by_id(kept_id);
      const double d =
          hausdorff(ep.steps, other.steps, pos_min, pos_scale, vel_min, vel_scale);
      if (!(d > tau)) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(ep.episode_id);
  }
  return kept;
}

}  // namespace lmc

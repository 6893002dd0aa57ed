#include "lmc/mountain_car.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lmc {

void EnvConfig::validate() const {
  if (!(goal_position >= kMinPosition && goal_position <= kMaxPosition)) {
    throw std::invalid_argument("EnvConfig: goal_position outside position bounds");
  }
  if (max_steps < 1) {
    throw std::invalid_argument("EnvConfig: max_steps must be >= 1");
  }
  if (!std::isfinite(force_scale) || !std::isfinite(gravity_scale)) {
    throw std::invalid_argument("EnvConfig: non-finite dynamics constants");
  }
}

double reward(double position_next, double action, RewardVariant variant,
              double goal_position) {
  if (!std::isfinite(position_next) || !std::isfinite(action)) {
    throw std::invalid_argument("reward: non-finite input");
  }
  if (position_next >= goal_position) {
    return 100.0;
  }
  switch (variant) {
    case RewardVariant::Original:
      return -action * action;
    case RewardVariant::Modified:
      return -1.0;
  }
  throw std::invalid_argument("reward: unknown variant");
}

StepResult step(const EnvState& state, double action, const EnvConfig& config,
                int step_index) {
  if (!std::isfinite(action)) {
    throw std::invalid_argument("step: non-finite action");
  }
  if (!std::isfinite(state.position) || !std::isfinite(state.velocity)) {
    throw std::invalid_argument("step: non-finite state");
  }

  const double a = std::clamp(action, -1.0, 1.0);
  double v = state.velocity + a * config.force_scale -
             config.gravity_scale * std::cos(3.0 * state.position);
  v = std::clamp(v, -kMaxSpeed, kMaxSpeed);
  double p = state.position + v;
  p = std::clamp(p, kMinPosition, kMaxPosition);
  if (p == kMinPosition && v < 0.0) {
    v = 0.0;
  }

  StepResult result;
  result.next_state = EnvState{p, v};
  result.terminated = p >= config.goal_position;
  result.truncated = !result.terminated && step_index + 1 >= config.max_steps;
  result.reward = reward(p, a, config.reward_variant, config.goal_position);
  return result;
}

std::vector<EnvState> initial_state_grid(int n_pos, int n_vel, Interval pos_range,
                                         Interval vel_range) {
  if (n_pos < 1 || n_vel < 1) {
    throw std::invalid_argument("initial_state_grid: grid counts must be >= 1");
  }
  for (const Interval& r : {pos_range, vel_range}) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
      throw std::invalid_argument("initial_state_grid: empty or non-finite range");
    }
  }

  auto linspace = [](Interval r, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    if (n == 1) {
      v[0] = r.lo;
      return v;
    }
    for (int i = 0; i < n; ++i) {
      v[static_cast<std::size_t>(i)] =
          r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    v.back() = r.hi;
    return v;
  };

  const std::vector<double> positions = linspace(pos_range, n_pos);
  const std::vector<double> velocities = linspace(vel_range, n_vel);

  std::vector<EnvState> grid;
  grid.reserve(static_cast<std::size_t>(n_pos) * static_cast<std::size_t>(n_vel));
  for (double p : positions) {
    for (double v : velocities) {
      grid.push_back(EnvState{p, v});
    }
  }
  return grid;
}

}  // namespace lmc

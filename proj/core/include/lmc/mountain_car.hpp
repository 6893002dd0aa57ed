#pragma once

#include <vector>

namespace lmc {

// Continuous Mountain Car. Deterministic dynamics; the reward is either the
// environment's original quadratic action penalty or the constant -1 per
// step variant that makes episode length the only thing that matters.

enum class RewardVariant { Original, Modified };

struct EnvState {
  double position = 0.0;  // in [-1.2, 0.6] after any step
  double velocity = 0.0;  // in [-0.07, 0.07]
};

inline constexpr double kMinPosition = -1.2;
inline constexpr double kMaxPosition = 0.6;
inline constexpr double kMaxSpeed = 0.07;

struct EnvConfig {
  double goal_position = 0.45;
  double force_scale = 0.0015;
  double gravity_scale = 0.0025;
  int max_steps = 999;
  RewardVariant reward_variant = RewardVariant::Modified;

  void validate() const;
};

struct StepResult {
  EnvState next_state;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

double reward(double position_next, double action, RewardVariant variant,
              double goal_position = 0.45);

// One transition. `step_index` is the zero-based index of this step within
// its episode and drives the max_steps truncation flag. Actions are clipped
// to [-1, 1] like the environment does; non-finite input is rejected.
StepResult step(const EnvState& state, double action, const EnvConfig& config,
                int step_index);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Cartesian grid of start states, position-major, endpoints included.
// n = 1 collapses to the range minimum. The default position range reaches
// below the dynamics floor on purpose: resets may start at -1.25 and get
// clamped from the first step onward.
std::vector<EnvState> initial_state_grid(int n_pos, int n_vel,
                                         Interval pos_range = {-1.25, 0.5},
                                         Interval vel_range = {-0.07, 0.07});

}  // namespace lmc

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lmc/mountain_car.hpp"
#include "lmc/policy_net.hpp"
#include "lmc/rng.hpp"

using namespace lmc;

namespace {

// Independent transcription of the dynamics, kept deliberately separate
// from the implementation under test.
EnvState oracle_step(const EnvState& s, double action) {
  const double a = std::min(1.0, std::max(-1.0, action));
  double v = s.velocity + a * 0.0015 - 0.0025 * std::cos(3.0 * s.position);
  v = std::min(0.07, std::max(-0.07, v));
  double p = s.position + v;
  p = std::min(0.6, std::max(-1.2, p));
  if (p == -1.2 && v < 0.0) v = 0.0;
  return EnvState{p, v};
}

}  // namespace

TEST_CASE("step matches a hand-evaluated transition") {
  EnvConfig cfg;
  const StepResult r = step(EnvState{-0.5, 0.0}, 1.0, cfg, 0);
  // velocity' = 0.0015 - 0.0025 cos(-1.5)
  const double v_expected = 0.0015 - 0.0025 * std::cos(-1.5);
  CHECK(r.next_state.velocity == doctest::Approx(v_expected).epsilon(1e-15));
  CHECK(r.next_state.position == doctest::Approx(-0.5 + v_expected).epsilon(1e-15));
  CHECK(r.next_state.velocity == doctest::Approx(0.0013231569958307427).epsilon(1e-12));
  CHECK(r.reward == -1.0);
  CHECK_FALSE(r.terminated);
  CHECK_FALSE(r.truncated);

  const EnvState o = oracle_step(EnvState{-0.5, 0.0}, 1.0);
  CHECK(r.next_state.position == o.position);
  CHECK(r.next_state.velocity == o.velocity);
}

TEST_CASE("zero action at the gravity equilibrium stays put") {
  EnvConfig cfg;
  const double eq = -3.14159265358979323846 / 6.0;
  const StepResult r = step(EnvState{eq, 0.0}, 0.0, cfg, 0);
  // cos(3 * -pi/6) = cos(-pi/2) = 0 up to floating-point.
  CHECK(std::abs(r.next_state.velocity) < 1e-18);
  CHECK(r.next_state.position == doctest::Approx(eq).epsilon(1e-15));
}

TEST_CASE("crossing the goal terminates with reward 100") {
  EnvConfig cfg;
  const StepResult r = step(EnvState{0.44, 0.07}, 1.0, cfg, 5);
  CHECK(r.next_state.position >= 0.45);
  CHECK(r.reward == 100.0);
  CHECK(r.terminated);
  CHECK_FALSE(r.truncated);
}

TEST_CASE("reward variants") {
  CHECK(reward(0.46, 0.3, RewardVariant::Modified) == 100.0);
  CHECK(reward(0.0, 0.5, RewardVariant::Original) == -0.25);
  CHECK(reward(0.0, 0.0, RewardVariant::Original) == 0.0);
  CHECK(reward(0.0, 0.7, RewardVariant::Modified) == -1.0);
  CHECK_THROWS_AS(reward(std::nan(""), 0.0, RewardVariant::Modified),
                  std::invalid_argument);
}

TEST_CASE("non-finite inputs are rejected") {
  EnvConfig cfg;
  CHECK_THROWS_AS(step(EnvState{0.0, 0.0}, std::nan(""), cfg, 0), std::invalid_argument);
  CHECK_THROWS_AS(step(EnvState{std::nan(""), 0.0}, 0.0, cfg, 0), std::invalid_argument);
  CHECK_THROWS_AS(
      step(EnvState{0.0, 0.0}, std::numeric_limits<double>::infinity(), cfg, 0),
      std::invalid_argument);
}

TEST_CASE("velocity zeroed at the left wall") {
  EnvConfig cfg;
  const StepResult r = step(EnvState{-1.2, -0.05}, -1.0, cfg, 0);
  CHECK(r.next_state.position == -1.2);
  CHECK(r.next_state.velocity == 0.0);
}

TEST_CASE("truncation at max_steps") {
  EnvConfig cfg;
  cfg.max_steps = 10;
  const StepResult r = step(EnvState{-0.5, 0.0}, 0.0, cfg, 9);
  CHECK(r.truncated);
  CHECK_FALSE(r.terminated);
  const StepResult r2 = step(EnvState{-0.5, 0.0}, 0.0, cfg, 8);
  CHECK_FALSE(r2.truncated);
}

TEST_CASE("config validation") {
  EnvConfig cfg;
  cfg.goal_position = 2.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EnvConfig{};
  cfg.max_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("initial_state_grid shapes and order") {
  const auto grid = initial_state_grid(10, 10);
  CHECK(grid.size() == 100);
  // Position-major: the first 10 entries share the lowest position.
  for (int i = 0; i < 10; ++i) {
    CHECK(grid[static_cast<std::size_t>(i)].position == -1.25);
  }
  CHECK(grid[0].velocity == -0.07);
  CHECK(grid[9].velocity == 0.07);
  CHECK(grid.back().position == 0.5);
  CHECK(grid.back().velocity == 0.07);

  const auto single = initial_state_grid(1, 1);
  CHECK(single.size() == 1);
  CHECK(single[0].position == -1.25);
  CHECK(single[0].velocity == -0.07);

  const auto corners = initial_state_grid(2, 2);
  CHECK(corners.size() == 4);
  CHECK(corners[0].position == -1.25);
  CHECK(corners[0].velocity == -0.07);
  CHECK(corners[1].velocity == 0.07);
  CHECK(corners[2].position == 0.5);
  CHECK(corners[3].position == 0.5);
  CHECK(corners[3].velocity == 0.07);

  CHECK_THROWS_AS(initial_state_grid(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(initial_state_grid(2, 2, Interval{1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("bounds preserved over random transitions") {
  EnvConfig cfg;
  Rng rng(99);
  for (int trial = 0; trial < 100000; ++trial) {
    const EnvState s{rng.uniform(-1.2, 0.6), rng.uniform(-0.07, 0.07)};
    const double a = rng.uniform(-1.0, 1.0);
    const StepResult r = step(s, a, cfg, 0);
    CHECK(r.next_state.position >= -1.2);
    CHECK(r.next_state.position <= 0.6);
    CHECK(r.next_state.velocity >= -0.07);
    CHECK(r.next_state.velocity <= 0.07);
  }
}

TEST_CASE("oracle agreement on random pairs") {
  EnvConfig cfg;
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    const EnvState s{rng.uniform(-1.25, 0.6), rng.uniform(-0.07, 0.07)};
    const double a = rng.uniform(-1.5, 1.5);  // exercises clipping too
    const StepResult r = step(s, a, cfg, 0);
    const EnvState o = oracle_step(s, a);
    CHECK(std::abs(r.next_state.position - o.position) <= 1e-12);
    CHECK(std::abs(r.next_state.velocity - o.velocity) <= 1e-12);
  }
}

TEST_CASE("determinism: identical inputs give bit-identical results") {
  EnvConfig cfg;
  const StepResult a = step(EnvState{-0.321, 0.017}, 0.413, cfg, 3);
  const StepResult b = step(EnvState{-0.321, 0.017}, 0.413, cfg, 3);
  CHECK(a.next_state.position == b.next_state.position);
  CHECK(a.next_state.velocity == b.next_state.velocity);
  CHECK(a.reward == b.reward);
}

TEST_CASE("modified-reward return identity on teacher rollouts") {
  EnvConfig cfg;
  for (const EnvState& s0 : initial_state_grid(5, 5)) {
    EnvState s = s0;
    double total = 0.0;
    int len = 0;
    for (int t = 0; t < cfg.max_steps; ++t) {
      const StepResult r = step(s, teacher_action(s), cfg, t);
      total += r.reward;
      ++len;
      if (r.terminated) break;
      REQUIRE_FALSE(r.truncated);
      s = r.next_state;
    }
    CHECK(total == 100.0 - (len - 1));
  }
}

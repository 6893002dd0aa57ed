#include <benchmark/benchmark.h>

#include <vector>

#include "lmc/mountain_car.hpp"
#include "lmc/pacmap.hpp"
#include "lmc/policy_net.hpp"
#include "lmc/rng.hpp"
#include "lmc/traclus.hpp"

namespace {

static void BM_EnvStep(benchmark::State& state) {
  lmc::EnvConfig cfg;
  lmc::EnvState s{-0.5, 0.01};
  double action = 0.7;
  for (auto _ : state) {
    const lmc::StepResult r = lmc::step(s, action, cfg, 0);
    benchmark::DoNotOptimize(r.next_state.position);
  }
}
BENCHMARK(BM_EnvStep);

static void BM_PolicyForward(benchmark::State& state) {
  const lmc::PolicyNetwork net = lmc::init_network({64, 64}, 3);
  const lmc::EnvState s{-0.5, 0.01};
  for (auto _ : state) {
    const lmc::ForwardResult r = lmc::forward(net, s);
    benchmark::DoNotOptimize(r.action_mean);
  }
}
BENCHMARK(BM_PolicyForward);

std::vector<lmc::LineSegment> make_segments(int n, int dim) {
  lmc::Rng rng(9);
  std::vector<lmc::LineSegment> segs;
  for (int i = 0; i < n; ++i) {
    lmc::LineSegment s;
    s.start.resize(dim);
    s.end.resize(dim);
    for (int k = 0; k < dim; ++k) {
      s.start(k) = rng.uniform(-10.0, 10.0);
      s.end(k) = s.start(k) + rng.uniform(-1.5, 1.5);
    }
    s.provenance = lmc::SegmentProvenance{0, 2 * i, 2 * i + 1};
    segs.push_back(std::move(s));
  }
  return segs;
}

static void BM_SegmentDistance(benchmark::State& state) {
  const auto segs = make_segments(2, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const lmc::SegmentDistance d = lmc::segment_distance(segs[0], segs[1]);
    benchmark::DoNotOptimize(d.total);
  }
}
BENCHMARK(BM_SegmentDistance)->Arg(2)->Arg(13)->Arg(64);

static void BM_GroupSegments(benchmark::State& state) {
  const auto segs = make_segments(static_cast<int>(state.range(0)), 2);
  lmc::TraclusParams params;
  params.epsilon = 1.0;
  params.min_lns = 4;
  for (auto _ : state) {
    const lmc::ClusterAssignment a = lmc::group_segments(segs, params);
    benchmark::DoNotOptimize(a.cluster_count);
  }
}
BENCHMARK(BM_GroupSegments)->Arg(100)->Arg(400);

static void BM_PacmapPairs(benchmark::State& state) {
  lmc::Rng rng(4);
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd X(n, 16);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 16; ++k) {
      X(i, k) = rng.normal();
    }
  }
  lmc::PacmapConfig cfg;
  cfg.output_dim = 2;
  cfg.seed = 5;
  for (auto _ : state) {
    const lmc::PairSet pairs = lmc::build_pairs(X, cfg);
    benchmark::DoNotOptimize(pairs.neighbor_pairs.size());
  }
}
BENCHMARK(BM_PacmapPairs)->Arg(500)->Arg(2000);

static void BM_PacmapLossGrad(benchmark::State& state) {
  lmc::Rng rng(4);
  const int n = 1000;
  Eigen::MatrixXd X(n, 16);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 16; ++k) {
      X(i, k) = rng.normal();
    }
  }
  lmc::PacmapConfig cfg;
  cfg.output_dim = 2;
  cfg.seed = 5;
  const lmc::PairSet pairs = lmc::build_pairs(X, cfg);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(n, 2);
  Eigen::MatrixXd grad;
  const lmc::PairWeights w{2.0, 500.0, 1.0};
  for (auto _ : state) {
    const double loss = lmc::pacmap_loss(Y, pairs, w, &grad);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_PacmapLossGrad);

}  // namespace

BENCHMARK_MAIN();

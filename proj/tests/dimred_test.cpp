#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "lmc/adam.hpp"
#include "lmc/pacmap.hpp"
#include "lmc/pca.hpp"
#include "lmc/rng.hpp"

using namespace lmc;

namespace {

Eigen::MatrixXd three_clusters(int per_cluster, int dim, std::uint64_t seed,
                               std::vector<int>* labels = nullptr) {
  Rng rng(seed);
  Eigen::MatrixXd X(3 * per_cluster, dim);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd center = Eigen::VectorXd::Zero(dim);
    center(c % dim) = 40.0 * (c + 1);
    center((c + 1) % dim) = -25.0 * (c + 1);
    for (int i = 0; i < per_cluster; ++i) {
      for (int k = 0; k < dim; ++k) {
        X(c * per_cluster + i, k) = center(k) + rng.normal();
      }
      if (labels) labels->push_back(c);
    }
  }
  return X;
}

}  // namespace

TEST_CASE("pca: variance concentrated along axis 0") {
  Eigen::MatrixXd X(6, 3);
  X.setZero();
  X.col(0) << -3, -2, -1, 1, 2, 3;
  const PcaResult p = pca(X);
  CHECK(p.explained_variance_ratio(0) == doctest::Approx(1.0));
  CHECK(p.explained_variance_ratio(1) == doctest::Approx(0.0));
  // First component points along axis 0 with positive sign.
  CHECK(std::abs(p.components(0, 0)) == doctest::Approx(1.0));
  CHECK(p.components(0, 0) > 0.0);
}

TEST_CASE("pca matches a brute-force covariance eigensolve") {
  Rng rng(31);
  Eigen::MatrixXd X(400, 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
  }
  const PcaResult p = pca(X);

  // Independent route: direct eigenvalues of the covariance.
  const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (X.rows() - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double total = es.eigenvalues().sum();
  CHECK(p.explained_variance_ratio(0) ==
        doctest::Approx(es.eigenvalues()(1) / total).epsilon(1e-10));
  CHECK(p.explained_variance_ratio(1) ==
        doctest::Approx(es.eigenvalues()(0) / total).epsilon(1e-10));
  // Isotropic sample: both ratios near one half.
  CHECK(p.explained_variance_ratio(0) == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("pca: constant rows use the degenerate ratio convention") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(5, 4, 3.25);
  const PcaResult p = pca(X);
  CHECK(p.explained_variance_ratio(0) == 1.0);
  for (Eigen::Index i = 1; i < 4; ++i) {
    CHECK(p.explained_variance_ratio(i) == 0.0);
  }
}

TEST_CASE("pca reconstruction and orthonormality") {
  Rng rng(8);
  Eigen::MatrixXd X(60, 7);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X(i, j) = rng.uniform(-2.0, 2.0) + 0.3 * static_cast<double>(j);
    }
  }
  const PcaResult p = pca(X);

  const Eigen::MatrixXd gram = p.components * p.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-9);

  const Eigen::MatrixXd centered = X.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd reconstructed =
      (centered * p.components.transpose()) * p.components;
  CHECK((reconstructed - centered).cwiseAbs().maxCoeff() < 1e-9);

  double sum = p.explained_variance_ratio.sum();
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  for (Eigen::Index i = 1; i < p.explained_variance_ratio.size(); ++i) {
    CHECK(p.explained_variance_ratio(i) <= p.explained_variance_ratio(i - 1) + 1e-12);
  }
}

TEST_CASE("choose_target_dim basics") {
  Eigen::VectorXd ratios(4);
  ratios << 0.9, 0.09, 0.009, 0.001;
  CHECK(choose_target_dim(ratios, 0.999) == 3);
  CHECK(choose_target_dim(ratios, 1.0) == 4);
  CHECK(choose_target_dim(ratios, 0.5) == 1);
  CHECK_THROWS_AS(choose_target_dim(ratios, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(choose_target_dim(ratios, 1.5), std::invalid_argument);
}

TEST_CASE("choose_target_dim is monotone in the threshold") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + rng.index(10);
    Eigen::VectorXd raw(d);
    for (int i = 0; i < d; ++i) raw(i) = rng.uniform(1e-6, 1.0);
    std::sort(raw.data(), raw.data() + d, std::greater<double>());
    const Eigen::VectorXd ratios = raw / raw.sum();
    const double t1 = rng.uniform(0.05, 1.0);
    const double t2 = rng.uniform(0.05, 1.0);
    const double lo = std::min(t1, t2);
    const double hi = std::max(t1, t2);
    CHECK(choose_target_dim(ratios, lo) <= choose_target_dim(ratios, hi));
  }
}

TEST_CASE("build_pairs: counts and determinism") {
  Rng rng(5);
  Eigen::MatrixXd X(40, 4);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X(i, j) = rng.normal();
    }
  }
  PacmapConfig cfg;
  cfg.n_nb = 4;
  cfg.mn_ratio = 0.5;
  cfg.fp_ratio = 2.0;
  cfg.seed = 12;
  const PairSet a = build_pairs(X, cfg);
  CHECK(a.neighbor_pairs.size() == 40u * 4u);
  CHECK(a.mn_pairs.size() == 40u * 2u);
  CHECK(a.fp_pairs.size() == 40u * 8u);
  for (const IndexPair& p : a.neighbor_pairs) CHECK(p.i != p.j);
  for (const IndexPair& p : a.mn_pairs) CHECK(p.i != p.j);
  for (const IndexPair& p : a.fp_pairs) CHECK(p.i != p.j);

  const PairSet b = build_pairs(X, cfg);
  REQUIRE(a.neighbor_pairs.size() == b.neighbor_pairs.size());
  for (std::size_t k = 0; k < a.neighbor_pairs.size(); ++k) {
    CHECK(a.neighbor_pairs[k].i == b.neighbor_pairs[k].i);
    CHECK(a.neighbor_pairs[k].j == b.neighbor_pairs[k].j);
  }
  for (std::size_t k = 0; k < a.mn_pairs.size(); ++k) {
    CHECK(a.mn_pairs[k].j == b.mn_pairs[k].j);
  }
  for (std::size_t k = 0; k < a.fp_pairs.size(); ++k) {
    CHECK(a.fp_pairs[k].j == b.fp_pairs[k].j);
  }
}

TEST_CASE("build_pairs: neighbors stay within well-separated clusters") {
  std::vector<int> labels;
  const Eigen::MatrixXd X = three_clusters(50, 6, 21, &labels);
  PacmapConfig cfg;
  cfg.n_nb = 5;
  cfg.seed = 3;
  const PairSet pairs = build_pairs(X, cfg);

  // Brute-force oracle: scaled-distance nearest neighbors computed directly.
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      d2(i, j) = (X.row(i) - X.row(j)).squaredNorm();
    }
  }
  Eigen::VectorXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> dists;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dists.push_back(std::sqrt(d2(i, j)));
    }
    std::sort(dists.begin(), dists.end());
    sigma(i) = (dists[3] + dists[4] + dists[5]) / 3.0;
  }

  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> scaled;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) scaled.push_back({d2(i, j) / (sigma(i) * sigma(j)), static_cast<int>(j)});
    }
    std::sort(scaled.begin(), scaled.end());
    std::set<int> expected;
    for (int k = 0; k < 5; ++k) expected.insert(scaled[static_cast<std::size_t>(k)].second);
    for (int k = 0; k < 5; ++k, ++idx) {
      const IndexPair p = pairs.neighbor_pairs[idx];
      CHECK(p.i == static_cast<int>(i));
      CHECK(expected.count(p.j) == 1);
      CHECK(labels[static_cast<std::size_t>(p.j)] ==
            labels[static_cast<std::size_t>(p.i)]);
    }
  }
}

TEST_CASE("build_pairs: equidistant simplex ties break by index order") {
  // Regular simplex: the 8 unit basis vectors of R^8 are pairwise sqrt(2)
  // apart, so every distance (and every sigma) ties.
  const int n = 8;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, 8);
  for (int i = 0; i < n; ++i) S(i, i) = 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      CHECK((S.row(i) - S.row(j)).norm() == doctest::Approx(std::sqrt(2.0)));
    }
  }

  PacmapConfig cfg;
  cfg.n_nb = 3;
  cfg.mn_ratio = 0.5;
  cfg.fp_ratio = 1.0;  // 8 points leave only 4 non-neighbors
  cfg.seed = 2;
  const PairSet pairs = build_pairs(S, cfg);
  REQUIRE(pairs.neighbor_pairs.size() == 8u * 3u);
  // All scaled distances tie, so each point's neighbors are the three
  // lowest-index other points.
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> expected;
    for (int j = 0; expected.size() < 3; ++j) {
      if (j != i) expected.push_back(j);
    }
    for (int k = 0; k < 3; ++k, ++idx) {
      CHECK(pairs.neighbor_pairs[idx].i == i);
      CHECK(pairs.neighbor_pairs[idx].j == expected[static_cast<std::size_t>(k)]);
    }
  }
}

TEST_CASE("build_pairs: too few points is an explicit error") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(8, 3);
  PacmapConfig cfg;
  cfg.n_nb = 10;
  CHECK_THROWS_AS(build_pairs(X, cfg), std::invalid_argument);
}

TEST_CASE("build_pairs: exact mode searches the full point set") {
  Rng rng(14);
  Eigen::MatrixXd X(300, 4);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X(i, j) = rng.normal();
    }
  }
  PacmapConfig cfg;
  cfg.n_nb = 6;
  cfg.seed = 8;
  cfg.exact_pairs = true;
  const PairSet exact = build_pairs(X, cfg);
  CHECK(exact.neighbor_pairs.size() == 300u * 6u);

  // Exact neighbors must match a direct brute-force scaled-distance scan.
  const Eigen::Index n = X.rows();
  Eigen::VectorXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> dists;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dists.push_back((X.row(i) - X.row(j)).norm());
    }
    std::sort(dists.begin(), dists.end());
    sigma(i) = (dists[3] + dists[4] + dists[5]) / 3.0;
  }
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> scaled;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) {
        scaled.push_back({(X.row(i) - X.row(j)).squaredNorm() / (sigma(i) * sigma(j)),
                          static_cast<int>(j)});
      }
    }
    std::sort(scaled.begin(), scaled.end());
    for (int k = 0; k < 6; ++k, ++idx) {
      CHECK(exact.neighbor_pairs[idx].j == scaled[static_cast<std::size_t>(k)].second);
    }
  }
}

TEST_CASE("build_pairs: n_nb larger than the default candidate pool") {
  Rng rng(91);
  Eigen::MatrixXd X(400, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X(i, j) = rng.normal();
    }
  }
  PacmapConfig cfg;
  cfg.n_nb = 180;  // exceeds the 150-candidate pool
  cfg.mn_ratio = 0.1;
  cfg.fp_ratio = 1.0;
  cfg.seed = 3;
  const PairSet pairs = build_pairs(X, cfg);
  CHECK(pairs.neighbor_pairs.size() == 400u * 180u);
  for (std::size_t k = 0; k < pairs.neighbor_pairs.size(); ++k) {
    CHECK(pairs.neighbor_pairs[k].i != pairs.neighbor_pairs[k].j);
  }
}

TEST_CASE("pacmap_loss: closed-form corner values") {
  Eigen::MatrixXd Y(2, 2);
  Y.setZero();
  PairSet pairs;
  PairWeights w{1.0, 1.0, 1.0};

  pairs.neighbor_pairs = {{0, 1}};
  CHECK(pacmap_loss(Y, pairs, w) == 0.0);  // coincident neighbor contributes 0

  pairs.neighbor_pairs.clear();
  pairs.fp_pairs = {{0, 1}};
  CHECK(pacmap_loss(Y, pairs, w) == 1.0);  // coincident FP contributes w_fp * 1

  pairs.fp_pairs.clear();
  pairs.neighbor_pairs = {{0, 1}};
  Y(1, 0) = std::sqrt(10.0);  // squared distance 10
  CHECK(pacmap_loss(Y, pairs, w) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pacmap_loss gradient matches central finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 20;
    const int d = 2 + (trial % 2);
    Eigen::MatrixXd Y(n, d);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) {
        Y(i, k) = rng.uniform(-2.0, 2.0);
      }
    }
    PairSet pairs;
    for (int k = 0; k < 30; ++k) {
      const int i = rng.index(n);
      int j = rng.index(n);
      while (j == i) j = rng.index(n);
      if (k % 3 == 0) pairs.neighbor_pairs.push_back({i, j});
      if (k % 3 == 1) pairs.mn_pairs.push_back({i, j});
      if (k % 3 == 2) pairs.fp_pairs.push_back({i, j});
    }
    const PairWeights w{rng.uniform(0.5, 3.0), rng.uniform(0.5, 1000.0),
                        rng.uniform(0.5, 2.0)};

    Eigen::MatrixXd grad;
    pacmap_loss(Y, pairs, w, &grad);

    const double h = 1e-6;
    for (int probe = 0; probe < 10; ++probe) {
      const int i = rng.index(n);
      const int k = rng.index(d);
      Eigen::MatrixXd plus = Y;
      Eigen::MatrixXd minus = Y;
      plus(i, k) += h;
      minus(i, k) -= h;
      const double numeric =
          (pacmap_loss(plus, pairs, w) - pacmap_loss(minus, pairs, w)) / (2.0 * h);
      const double analytic = grad(i, k);
      const double scale = std::max({1e-8, std::abs(analytic), std::abs(numeric)});
      CHECK(std::abs(analytic - numeric) / scale <= 1e-4);
    }
  }
}

TEST_CASE("pacmap loss terms stay within their bounds") {
  Rng rng(400);
  Eigen::MatrixXd Y(10, 2);
  for (int i = 0; i < 10; ++i) {
    Y(i, 0) = rng.uniform(-50.0, 50.0);
    Y(i, 1) = rng.uniform(-50.0, 50.0);
  }
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (i == j) continue;
      PairSet single;
      single.neighbor_pairs = {{i, j}};
      const double nb = pacmap_loss(Y, single, PairWeights{1, 0, 0});
      CHECK(nb >= 0.0);
      CHECK(nb < 1.0);
      single.neighbor_pairs.clear();
      single.mn_pairs = {{i, j}};
      const double mn = pacmap_loss(Y, single, PairWeights{0, 1, 0});
      CHECK(mn >= 0.0);
      CHECK(mn < 1.0);
      single.mn_pairs.clear();
      single.fp_pairs = {{i, j}};
      const double fp = pacmap_loss(Y, single, PairWeights{0, 0, 1});
      CHECK(fp > 0.0);
      CHECK(fp <= 1.0);
    }
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Eigen::ArrayXd params = Eigen::ArrayXd::LinSpaced(5, 1.0, 5.0);
  const Eigen::ArrayXd before = params;
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(5);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(5);
  adam_update(params, Eigen::ArrayXd::Zero(5), m, v, AdamHyper{}, 1);
  CHECK((params - before).abs().maxCoeff() == 0.0);
}

TEST_CASE("adam: first step matches the hand calculation") {
  // t = 1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps).
  Eigen::ArrayXd params(3);
  params << 1.0, -2.0, 0.5;
  Eigen::ArrayXd grad(3);
  grad << 0.3, -0.7, 1.9;
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(3);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(3);
  const AdamHyper hyper{0.01, 0.9, 0.999, 1e-8};
  Eigen::ArrayXd expected(3);
  for (int i = 0; i < 3; ++i) {
    expected(i) = params(i) - hyper.learning_rate * grad(i) /
                                  (std::abs(grad(i)) + hyper.epsilon);
  }
  adam_update(params, grad, m, v, hyper, 1);
  CHECK((params - expected).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adam: constant gradient step size approaches the learning rate") {
  Eigen::ArrayXd params = Eigen::ArrayXd::Zero(1);
  Eigen::ArrayXd grad = Eigen::ArrayXd::Constant(1, 0.25);
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(1);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(1);
  const AdamHyper hyper{0.5, 0.9, 0.999, 1e-8};
  double prev = params(0);
  double step = 0.0;
  for (long t = 1; t <= 2000; ++t) {
    adam_update(params, grad, m, v, hyper, t);
    step = prev - params(0);
    prev = params(0);
  }
  CHECK(step == doctest::Approx(hyper.learning_rate).epsilon(1e-3));
}

TEST_CASE("adam input validation") {
  Eigen::ArrayXd params = Eigen::ArrayXd::Zero(3);
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(3);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(3);
  CHECK_THROWS_AS(adam_update(params, Eigen::ArrayXd::Zero(2), m, v, AdamHyper{}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(adam_update(params, Eigen::ArrayXd::Zero(3), m, v, AdamHyper{}, 0),
                  std::invalid_argument);
}

TEST_CASE("weight schedule: reference phase values") {
  const auto schedule = default_weight_schedule(450);
  const PairWeights w1 = schedule_weights(schedule, 1);
  CHECK(w1.w_nb == 2.0);
  CHECK(w1.w_mn == 1000.0);
  CHECK(w1.w_fp == 1.0);
  const PairWeights w100 = schedule_weights(schedule, 100);
  CHECK(w100.w_mn == doctest::Approx(1000.0 + (3.0 - 1000.0) * 99.0 / 100.0));
  const PairWeights w150 = schedule_weights(schedule, 150);
  CHECK(w150.w_nb == 3.0);
  CHECK(w150.w_mn == 3.0);
  const PairWeights w300 = schedule_weights(schedule, 300);
  CHECK(w300.w_nb == 1.0);
  CHECK(w300.w_mn == 0.0);
  CHECK(w300.w_fp == 1.0);
  CHECK_THROWS_AS(schedule_weights(schedule, 451), std::invalid_argument);
}

TEST_CASE("pacmap_embed: zero iterations returns the scaled PCA projection") {
  Rng rng(15);
  Eigen::MatrixXd X(30, 2);
  for (int i = 0; i < 30; ++i) {
    X(i, 0) = rng.uniform(-1.0, 1.0);
    X(i, 1) = rng.uniform(-1.0, 1.0);
  }
  PacmapConfig cfg;
  cfg.output_dim = 2;
  cfg.iterations = 0;
  cfg.n_nb = 3;
  cfg.seed = 4;
  const PacmapResult r = pacmap_embed(X, cfg);

  const PcaResult p = pca(X);
  const Eigen::MatrixXd expected = p.project(X, 2) * 0.01;
  CHECK((r.embedding - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.initial_loss == r.final_loss);
}

TEST_CASE("pacmap_embed: deterministic for a fixed seed") {
  Eigen::MatrixXd X = three_clusters(20, 5, 99);
  PacmapConfig cfg;
  cfg.output_dim = 2;
  cfg.iterations = 80;
  cfg.n_nb = 5;
  cfg.seed = 123;
  const PacmapResult a = pacmap_embed(X, cfg);
  const PacmapResult b = pacmap_embed(X, cfg);
  CHECK((a.embedding - b.embedding).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("pacmap_embed separates three clusters (small instance)") {
  std::vector<int> labels;
  const Eigen::MatrixXd X = three_clusters(40, 10, 2025, &labels);
  PacmapConfig cfg;
  cfg.output_dim = 2;
  cfg.seed = 6;
  const PacmapResult r = pacmap_embed(X, cfg);
  CHECK(r.final_loss < r.initial_loss);

  // 1-NN purity in the embedding, brute force.
  const Eigen::Index n = X.rows();
  int pure = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (r.embedding.row(i) - r.embedding.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    if (labels[static_cast<std::size_t>(arg)] == labels[static_cast<std::size_t>(i)]) {
      ++pure;
    }
  }
  CHECK(static_cast<double>(pure) / static_cast<double>(n) >= 0.9);
}

TEST_CASE("pacmap final loss equals the public loss on the returned embedding") {
  const Eigen::MatrixXd X = three_clusters(15, 4, 55);
  PacmapConfig cfg;
  cfg.output_dim = 2;
  cfg.iterations = 50;
  cfg.n_nb = 4;
  cfg.seed = 8;
  const PacmapResult r = pacmap_embed(X, cfg);
  const PairSet pairs = build_pairs(X, cfg);
  const PairWeights w = schedule_weights(cfg.weight_schedule, cfg.iterations);
  CHECK(pacmap_loss(r.embedding, pairs, w) == r.final_loss);
}

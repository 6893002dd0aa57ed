#include "lmc/pacmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "lmc/adam.hpp"
#include "lmc/pca.hpp"
#include "lmc/rng.hpp"

namespace lmc {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kCandidatePool = 150;
constexpr double kSigmaFloor = 1e-12;

long rounded(double x) { return std::llround(x); }

double sqdist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

// Nearest-candidate table: for each i the pool_k closest other points by
// raw Euclidean distance, ascending, ties broken by index.
struct CandidateTable {
  int pool_k = 0;
  std::vector<int> idx;     // N * pool_k
  std::vector<double> d2;   // N * pool_k
};

CandidateTable nearest_candidates(const Eigen::MatrixXd& X, int pool_k) {
  const Eigen::Index n = X.rows();
  CandidateTable table;
  table.pool_k = pool_k;
  table.idx.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(pool_k));
  table.d2.resize(table.idx.size());

  const Eigen::VectorXd sqn = X.rowwise().squaredNorm();
  const Eigen::Index block = 256;
  std::vector<std::pair<double, int>> scratch(static_cast<std::size_t>(n));

  for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
    const Eigen::Index rows = std::min(block, n - r0);
    const Eigen::MatrixXd gram = X.middleRows(r0, rows) * X.transpose();
    for (Eigen::Index l = 0; l < rows; ++l) {
      const Eigen::Index i = r0 + l;
      std::size_t cnt = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = std::max(0.0, sqn(i) + sqn(j) - 2.0 * gram(l, j));
        scratch[cnt++] = {d, static_cast<int>(j)};
      }
      const auto kth = scratch.begin() + pool_k;
      std::nth_element(scratch.begin(), kth - 1, scratch.begin() + cnt);
      std::sort(scratch.begin(), kth);
      for (int c = 0; c < pool_k; ++c) {
        const std::size_t off =
            static_cast<std::size_t>(i) * static_cast<std::size_t>(pool_k) +
            static_cast<std::size_t>(c);
        table.d2[off] = scratch[static_cast<std::size_t>(c)].first;
        table.idx[off] = scratch[static_cast<std::size_t>(c)].second;
      }
    }
  }
  return table;
}

}  // namespace

std::vector<PacmapPhase> default_weight_schedule(int iterations) {
  std::vector<PacmapPhase> phases;
  if (iterations < 1) return phases;
  phases.push_back(PacmapPhase{1, std::min(100, iterations), 2.0, 1000.0, 3.0, 1.0});
  if (iterations > 100) {
    phases.push_back(PacmapPhase{101, std::min(200, iterations), 3.0, 3.0, 3.0, 1.0});
  }
  if (iterations > 200) {
    phases.push_back(PacmapPhase{201, iterations, 1.0, 0.0, 0.0, 1.0});
  }
  return phases;
}

void PacmapConfig::validate() const {
  if (n_nb < 1) throw std::invalid_argument("PacmapConfig: n_nb must be >= 1");
  if (!(mn_ratio > 0.0)) throw std::invalid_argument("PacmapConfig: mn_ratio must be > 0");
  if (!(fp_ratio > 0.0)) throw std::invalid_argument("PacmapConfig: fp_ratio must be > 0");
  if (output_dim < 1) throw std::invalid_argument("PacmapConfig: output_dim must be >= 1");
  if (iterations < 0) throw std::invalid_argument("PacmapConfig: iterations must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("PacmapConfig: learning_rate must be > 0");
  }
  if (iterations > 0) {
    if (weight_schedule.empty()) {
      throw std::invalid_argument("PacmapConfig: empty weight schedule");
    }
    int expect = 1;
    for (const PacmapPhase& phase : weight_schedule) {
      if (phase.first_iter != expect || phase.last_iter < phase.first_iter) {
        throw std::invalid_argument("PacmapConfig: weight schedule phases must tile 1..iterations");
      }
      if (phase.w_nb < 0.0 || phase.w_mn_start < 0.0 || phase.w_mn_end < 0.0 ||
          phase.w_fp < 0.0) {
        throw std::invalid_argument("PacmapConfig: negative phase weight");
      }
      expect = phase.last_iter + 1;
    }
    if (weight_schedule.back().last_iter < iterations) {
      throw std::invalid_argument("PacmapConfig: weight schedule ends before last iteration");
    }
  }
}

PairWeights schedule_weights(const std::vector<PacmapPhase>& schedule, int iter) {
  for (const PacmapPhase& phase : schedule) {
    if (iter >= phase.first_iter && iter <= phase.last_iter) {
      const double span = static_cast<double>(phase.last_iter - phase.first_iter + 1);
      const double frac = static_cast<double>(iter - phase.first_iter) / span;
      return PairWeights{phase.w_nb,
                         phase.w_mn_start + (phase.w_mn_end - phase.w_mn_start) * frac,
                         phase.w_fp};
    }
  }
  throw std::invalid_argument("schedule_weights: iteration " + std::to_string(iter) +
                              " not covered by any phase");
}

PairSet build_pairs(const Eigen::MatrixXd& X, const PacmapConfig& config) {
  config.validate();
  const Eigen::Index n = X.rows();
  if (n <= std::max<Eigen::Index>(7, config.n_nb + 1)) {
    throw std::invalid_argument("build_pairs: need more than max(7, n_nb + 1) = " +
                                std::to_string(std::max(7, config.n_nb + 1)) +
                                " points, got " + std::to_string(n));
  }
  if (!X.allFinite()) throw std::invalid_argument("build_pairs: non-finite input");

  const int n_mn = static_cast<int>(rounded(config.n_nb * config.mn_ratio));
  const int n_fp = static_cast<int>(rounded(config.n_nb * config.fp_ratio));
  if (n - 1 - config.n_nb < n_fp) {
    throw std::invalid_argument(
        "build_pairs: not enough non-neighbors for the requested fp_ratio");
  }

  // The approximate pool must still cover n_nb neighbors and the sigma
  // ranks.
  const int pool_k =
      config.exact_pairs
          ? static_cast<int>(n - 1)
          : std::min<int>(static_cast<int>(n - 1),
                          std::max(kCandidatePool, config.n_nb));
  const CandidateTable table = nearest_candidates(X, pool_k);
  auto cand_idx = [&](Eigen::Index i, int c) {
    return table.idx[static_cast<std::size_t>(i) * static_cast<std::size_t>(pool_k) +
                     static_cast<std::size_t>(c)];
  };
  auto cand_d2 = [&](Eigen::Index i, int c) {
    return table.d2[static_cast<std::size_t>(i) * static_cast<std::size_t>(pool_k) +
                    static_cast<std::size_t>(c)];
  };

  // sigma_i: mean Euclidean distance to the 4th..6th nearest neighbors.
  Eigen::VectorXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 3; c <= 5; ++c) {
      s += std::sqrt(cand_d2(i, c));
    }
    sigma(i) = std::max(s / 3.0, kSigmaFloor);
  }

  PairSet pairs;
  pairs.neighbor_pairs.reserve(static_cast<std::size_t>(n) * config.n_nb);
  std::vector<std::pair<double, int>> scaled(static_cast<std::size_t>(pool_k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < pool_k; ++c) {
      const int j = cand_idx(i, c);
      scaled[static_cast<std::size_t>(c)] = {cand_d2(i, c) / (sigma(i) * sigma(j)), j};
    }
    std::partial_sort(scaled.begin(), scaled.begin() + config.n_nb, scaled.end());
    for (int c = 0; c < config.n_nb; ++c) {
      pairs.neighbor_pairs.push_back(
          IndexPair{static_cast<int>(i), scaled[static_cast<std::size_t>(c)].second});
    }
  }

  Rng rng(config.seed);
  const int dim = static_cast<int>(X.cols());
  const RowMatrix xr = X;  // contiguous rows for the distance walks below

  // Mid-near: six distinct candidates per draw, keep the second closest by
  // plain Euclidean distance (ties to the lower index).
  pairs.mn_pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n_mn));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = xr.data() + i * dim;
    for (int draw = 0; draw < n_mn; ++draw) {
      int picks[6];
      int got = 0;
      while (got < 6) {
        const int j = rng.index(static_cast<int>(n));
        if (j == static_cast<int>(i)) continue;
        bool dup = false;
        for (int q = 0; q < got; ++q) {
          if (picks[q] == j) {
            dup = true;
            break;
          }
        }
        if (!dup) picks[got++] = j;
      }
      std::pair<double, int> ranked[6];
      for (int q = 0; q < 6; ++q) {
        ranked[q] = {sqdist(xi, xr.data() + static_cast<std::ptrdiff_t>(picks[q]) * dim, dim),
                     picks[q]};
      }
      std::sort(ranked, ranked + 6);
      pairs.mn_pairs.push_back(IndexPair{static_cast<int>(i), ranked[1].second});
    }
  }

  // Further pairs: distinct uniform samples from the non-neighbors of i.
  pairs.fp_pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n_fp));
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<int> marks;
    marks.reserve(static_cast<std::size_t>(config.n_nb) + n_fp + 1);
    auto block = [&](int j) {
      blocked[static_cast<std::size_t>(j)] = 1;
      marks.push_back(j);
    };
    block(static_cast<int>(i));
    for (std::size_t p = static_cast<std::size_t>(i) * config.n_nb;
         p < (static_cast<std::size_t>(i) + 1) * config.n_nb; ++p) {
      block(pairs.neighbor_pairs[p].j);
    }
    int got = 0;
    while (got < n_fp) {
      const int j = rng.index(static_cast<int>(n));
      if (blocked[static_cast<std::size_t>(j)]) continue;
      block(j);
      pairs.fp_pairs.push_back(IndexPair{static_cast<int>(i), j});
      ++got;
    }
    for (int j : marks) blocked[static_cast<std::size_t>(j)] = 0;
  }

  return pairs;
}

namespace {

void check_pairs(const PairSet& pairs, Eigen::Index n) {
  auto check = [&](const std::vector<IndexPair>& list) {
    for (const IndexPair& p : list) {
      if (p.i < 0 || p.j < 0 || p.i >= n || p.j >= n || p.i == p.j) {
        throw std::invalid_argument("pacmap: pair index out of range");
      }
    }
  };
  check(pairs.neighbor_pairs);
  check(pairs.mn_pairs);
  check(pairs.fp_pairs);
}

// Shared accumulation for the row-major hot path and the public wrapper.
double loss_and_grad(const double* y, double* g, Eigen::Index n, int d,
                     const PairSet& pairs, const PairWeights& w) {
  double loss = 0.0;
  if (g) std::fill(g, g + n * d, 0.0);

  auto run = [&](const std::vector<IndexPair>& list, double weight, double denom,
                 bool repulsive) {
    double sum = 0.0;
    for (const IndexPair& p : list) {
      const double* yi = y + static_cast<std::ptrdiff_t>(p.i) * d;
      const double* yj = y + static_cast<std::ptrdiff_t>(p.j) * d;
      const double dist = sqdist(yi, yj, d);
      double coef;
      if (repulsive) {
        const double inv = 1.0 / (1.0 + dist);
        sum += inv;
        coef = -inv * inv;
      } else {
        const double denom_d = denom + dist;
        sum += dist / denom_d;
        coef = denom / (denom_d * denom_d);
      }
      if (g) {
        double* gi = g + static_cast<std::ptrdiff_t>(p.i) * d;
        double* gj = g + static_cast<std::ptrdiff_t>(p.j) * d;
        const double scale = 2.0 * weight * coef;
        for (int k = 0; k < d; ++k) {
          const double diff = yi[k] - yj[k];
          gi[k] += scale * diff;
          gj[k] -= scale * diff;
        }
      }
    }
    return weight * sum;
  };

  loss += run(pairs.neighbor_pairs, w.w_nb, 10.0, false);
  loss += run(pairs.mn_pairs, w.w_mn, 10000.0, false);
  loss += run(pairs.fp_pairs, w.w_fp, 0.0, true);
  return loss;
}

}  // namespace

double pacmap_loss(const Eigen::MatrixXd& Y, const PairSet& pairs,
                   const PairWeights& w, Eigen::MatrixXd* gradient) {
  check_pairs(pairs, Y.rows());
  if (!Y.allFinite()) throw std::invalid_argument("pacmap_loss: non-finite embedding");

  const RowMatrix yr = Y;
  RowMatrix gr;
  double* gptr = nullptr;
  if (gradient) {
    gr.resize(Y.rows(), Y.cols());
    gptr = gr.data();
  }
  const double loss =
      loss_and_grad(yr.data(), gptr, Y.rows(), static_cast<int>(Y.cols()), pairs, w);
  if (gradient) *gradient = gr;
  return loss;
}

PacmapResult pacmap_embed(const Eigen::MatrixXd& X, const PacmapConfig& config) {
  config.validate();
  if (config.output_dim > X.cols()) {
    throw std::invalid_argument("pacmap_embed: output_dim exceeds input dimension");
  }
  const PairSet pairs = build_pairs(X, config);

  const PcaResult p = pca(X);
  Eigen::MatrixXd y0 = p.project(X, config.output_dim) * 0.01;

  const Eigen::Index n = X.rows();
  const int d = config.output_dim;
  const PairWeights diag_w = config.iterations >= 1
                                 ? schedule_weights(config.weight_schedule, config.iterations)
                                 : PairWeights{1.0, 0.0, 1.0};

  PacmapResult result;
  result.initial_loss = pacmap_loss(y0, pairs, diag_w);

  // Flat parameter array with a row-major matrix view; adam_update sees the
  // same storage the gradient kernel walks.
  Eigen::ArrayXd yflat(n * d);
  Eigen::Map<RowMatrix>(yflat.data(), n, d) = y0;
  Eigen::ArrayXd gflat(n * d);
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(n * d);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(n * d);
  const AdamHyper hyper{config.learning_rate, 0.9, 0.999, 1e-8};

  for (int t = 1; t <= config.iterations; ++t) {
    const PairWeights w = schedule_weights(config.weight_schedule, t);
    loss_and_grad(yflat.data(), gflat.data(), n, d, pairs, w);
    adam_update(yflat, gflat, m, v, hyper, t);
  }

  result.embedding = Eigen::Map<RowMatrix>(yflat.data(), n, d);
  if (!result.embedding.allFinite()) {
    throw std::runtime_error(
        "pacmap_embed: optimization diverged to non-finite coordinates; "
        "lower the learning rate");
  }
  result.final_loss = pacmap_loss(result.embedding, pairs, diag_w);
  return result;
}

}  // namespace lmc

#include "lmc/traclus.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "lmc/rng.hpp"

namespace lmc {

namespace {

double log2_clamped(double x) { return std::log2(std::max(1.0, x)); }

// Precomputed per-segment geometry for the O(N^2) paths.
struct SegGeom {
  const LineSegment* seg = nullptr;
  Eigen::VectorXd dir;  // unit direction, zero when degenerate
  double len = 0.0;
};

std::vector<SegGeom> make_geoms(const std::vector<LineSegment>& segments) {
  if (segments.empty()) {
    throw std::invalid_argument("traclus: empty segment set");
  }
  const Eigen::Index dim = segments.front().start.size();
  std::vector<SegGeom> geoms(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const LineSegment& s = segments[i];
    if (s.start.size() != dim || s.end.size() != dim || dim == 0) {
      throw std::invalid_argument("traclus: segment " + std::to_string(i) +
                                  " dimension mismatch");
    }
    if (!s.start.allFinite() || !s.end.allFinite()) {
      throw std::invalid_argument("traclus: segment " + std::to_string(i) +
                                  " has non-finite endpoints");
    }
    geoms[i].seg = &s;
    geoms[i].len = s.length();
    geoms[i].dir = geoms[i].len > 0.0 ? Eigen::VectorXd((s.end - s.start) / geoms[i].len)
                                      : Eigen::VectorXd::Zero(dim);
  }
  return geoms;
}

// Base selection: longer segment, then provenance order, then coordinates.
// Argument-order independent so the distance stays symmetric.
bool first_is_base(const SegGeom& a, const SegGeom& b) {
  if (a.len != b.len) return a.len > b.len;
  const auto key = [](const SegGeom& g) {
    return std::make_tuple(g.seg->provenance.episode_id, g.seg->provenance.start_step,
                           g.seg->provenance.end_step);
  };
  if (key(a) != key(b)) return key(a) < key(b);
  for (Eigen::Index k = 0; k < a.seg->start.size(); ++k) {
    if (a.seg->start(k) != b.seg->start(k)) return a.seg->start(k) < b.seg->start(k);
  }
  for (Eigen::Index k = 0; k < a.seg->end.size(); ++k) {
    if (a.seg->end(k) != b.seg->end(k)) return a.seg->end(k) < b.seg->end(k);
  }
  return true;
}

double lehmer(double l1, double l2) {
  const double s = l1 + l2;
  return s > 0.0 ? (l1 * l1 + l2 * l2) / s : 0.0;
}

SegmentDistance distance_impl(const SegGeom& a, const SegGeom& b,
                              const DistanceWeights& w) {
  const SegGeom& base = first_is_base(a, b) ? a : b;
  const SegGeom& other = (&base == &a) ? b : a;

  SegmentDistance d;
  if (base.len == 0.0) {
    // Base is the longer segment, so both are points here.
    d.perp = (other.seg->start - base.seg->start).norm();
  } else {
    const Eigen::VectorXd& s = base.seg->start;
    const double t1 = (other.seg->start - s).dot(base.dir);
    const double t2 = (other.seg->end - s).dot(base.dir);
    const double l1 =
        std::sqrt(std::max(0.0, (other.seg->start - s).squaredNorm() - t1 * t1));
    const double l2 =
        std::sqrt(std::max(0.0, (other.seg->end - s).squaredNorm() - t2 * t2));
    d.perp = lehmer(l1, l2);
    d.par = std::min(std::min(std::abs(t1), std::abs(t2)),
                     std::min(std::abs(t1 - base.len), std::abs(t2 - base.len)));
    if (other.len > 0.0) {
      double cosang = base.dir.dot(other.seg->end - other.seg->start) / other.len;
      cosang = std::clamp(cosang, -1.0, 1.0);
      d.angle = cosang >= 0.0 ? other.len * std::sqrt(std::max(0.0, 1.0 - cosang * cosang))
                              : other.len;
    }
  }
  d.total = w.w_perp * d.perp + w.w_par * d.par + w.w_angle * d.angle;
  return d;
}

// Perpendicular and angle deviation of one polyline step from the chord;
// the chord is always the projection base here.
std::pair<double, double> deviation_from_chord(const Eigen::VectorXd& chord_start,
                                               const Eigen::VectorXd& chord_dir,
                                               double chord_len,
                                               const Eigen::VectorXd& p,
                                               const Eigen::VectorXd& q) {
  const double step_len = (q - p).norm();
  if (chord_len == 0.0) {
    // Point hypothesis: any extent is deviation.
    return {lehmer((p - chord_start).norm(), (q - chord_start).norm()), step_len};
  }
  const double t1 = (p - chord_start).dot(chord_dir);
  const double t2 = (q - chord_start).dot(chord_dir);
  const double l1 = std::sqrt(std::max(0.0, (p - chord_start).squaredNorm() - t1 * t1));
  const double l2 = std::sqrt(std::max(0.0, (q - chord_start).squaredNorm() - t2 * t2));
  double angle = 0.0;
  if (step_len > 0.0) {
    double cosang = chord_dir.dot(q - p) / step_len;
    cosang = std::clamp(cosang, -1.0, 1.0);
    angle = cosang >= 0.0 ? step_len * std::sqrt(std::max(0.0, 1.0 - cosang * cosang))
                          : step_len;
  }
  return {lehmer(l1, l2), angle};
}

void check_points(const std::vector<Eigen::VectorXd>& points) {
  if (points.size() < 2) {
    throw std::invalid_argument("partition: need at least 2 points");
  }
  const Eigen::Index dim = points.front().size();
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != dim || dim == 0) {
      throw std::invalid_argument("partition: point " + std::to_string(k) +
                                  " dimension mismatch");
    }
    if (!points[k].allFinite()) {
      throw std::invalid_argument("partition: point " + std::to_string(k) +
                                  " is non-finite");
    }
  }
}

}  // namespace

SegmentDistance segment_distance(const LineSegment& a, const LineSegment& b,
                                 const DistanceWeights& w) {
  std::vector<LineSegment> pair = {a, b};
  const std::vector<SegGeom> geoms = make_geoms(pair);
  return distance_impl(geoms[0], geoms[1], w);
}

double mdl_cost(const std::vector<Eigen::VectorXd>& points, int i, int j,
                bool partitioned) {
  check_points(points);
  if (i < 0 || j <= i || j >= static_cast<int>(points.size())) {
    throw std::invalid_argument("mdl_cost: need 0 <= i < j < point count");
  }

  if (!partitioned) {
    double sum = 0.0;
    for (int k = i; k < j; ++k) {
      sum += log2_clamped((points[static_cast<std::size_t>(k) + 1] -
                           points[static_cast<std::size_t>(k)])
                              .norm());
    }
    return sum;
  }

  const Eigen::VectorXd& s = points[static_cast<std::size_t>(i)];
  const Eigen::VectorXd& e = points[static_cast<std::size_t>(j)];
  const double chord_len = (e - s).norm();
  const Eigen::VectorXd chord_dir =
      chord_len > 0.0 ? Eigen::VectorXd((e - s) / chord_len)
                      : Eigen::VectorXd::Zero(s.size());

  double sum_perp = 0.0;
  double sum_angle = 0.0;
  for (int k = i; k < j; ++k) {
    const auto [perp, angle] =
        deviation_from_chord(s, chord_dir, chord_len, points[static_cast<std::size_t>(k)],
                             points[static_cast<std::size_t>(k) + 1]);
    sum_perp += perp;
    sum_angle += angle;
  }
  return log2_clamped(chord_len) + log2_clamped(sum_perp) + log2_clamped(sum_angle);
}

std::vector<LineSegment> partition(const std::vector<Eigen::VectorXd>& points,
                                   int episode_id) {
  check_points(points);
  const int n = static_cast<int>(points.size());

  std::vector<int> characteristic;
  characteristic.push_back(0);

  int start = 0;
  int length = 1;
  while (start + length <= n - 1) {
    const int curr = start + length;
    const double cost_par = mdl_cost(points, start, curr, true);
    const double cost_nopar = mdl_cost(points, start, curr, false);
    if (cost_par > cost_nopar) {
      // Adjacent costs are identical by construction, so curr - 1 > start.
      characteristic.push_back(curr - 1);
      start = curr - 1;
      length = 1;
    } else {
      ++length;
    }
  }
  characteristic.push_back(n - 1);

  std::vector<LineSegment> segments;
  segments.reserve(characteristic.size() - 1);
  for (std::size_t k = 0; k + 1 < characteristic.size(); ++k) {
    LineSegment seg;
    seg.start = points[static_cast<std::size_t>(characteristic[k])];
    seg.end = points[static_cast<std::size_t>(characteristic[k + 1])];
    seg.provenance =
        SegmentProvenance{episode_id, characteristic[k], characteristic[k + 1]};
    segments.push_back(std::move(seg));
  }
  return segments;
}

void TraclusParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("TraclusParams: epsilon must be positive and finite");
  }
  if (min_lns < 1) {
    throw std::invalid_argument("TraclusParams: min_lns must be >= 1");
  }
  if (distance_weights.w_perp < 0.0 || distance_weights.w_par < 0.0 ||
      distance_weights.w_angle < 0.0) {
    throw std::invalid_argument("TraclusParams: negative distance weight");
  }
}

EntropyResult epsilon_entropy(const std::vector<LineSegment>& segments, double epsilon,
                              const DistanceWeights& w) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("epsilon_entropy: epsilon must be > 0");
  }
  const std::vector<SegGeom> geoms = make_geoms(segments);
  const std::size_t n = segments.size();

  std::vector<long> counts(n, 1);  // self included
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance_impl(geoms[i], geoms[j], w).total <= epsilon) {
        ++counts[i];
        ++counts[j];
      }
    }
  }

  long total = 0;
  for (long c : counts) total += c;

  double entropy = 0.0;
  for (long c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log2(p);
  }
  return EntropyResult{entropy,
                       static_cast<double>(total) / static_cast<double>(n)};
}

TuneResult tune_epsilon(const std::vector<LineSegment>& segments,
                        std::vector<double> candidates, const DistanceWeights& w) {
  if (candidates.empty()) {
    throw std::invalid_argument("tune_epsilon: empty candidate grid");
  }
  for (double c : candidates) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("tune_epsilon: candidates must be positive and finite");
    }
  }
  std::sort(candidates.begin(), candidates.end());

  const std::vector<SegGeom> geoms = make_geoms(segments);
  const std::size_t n = segments.size();
  const std::size_t g_count = candidates.size();

  // bump[i][g] counts neighbors whose distance lands in bucket g; a prefix
  // sum over g then yields |N_eps(i)| - 1 for every candidate in one pass
  // over the pairs.
  std::vector<long> bump(n * g_count, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance_impl(geoms[i], geoms[j], w).total;
      const auto it = std::lower_bound(candidates.begin(), candidates.end(), d);
      if (it == candidates.end()) continue;
      const auto g = static_cast<std::size_t>(it - candidates.begin());
      ++bump[i * g_count + g];
      ++bump[j * g_count + g];
    }
  }

  TuneResult result;
  result.profile.reserve(g_count);
  std::vector<long> running(n, 0);
  double best_entropy = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < g_count; ++g) {
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      running[i] += bump[i * g_count + g];
      total += 1 + running[i];
    }
    double entropy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = static_cast<double>(1 + running[i]) / static_cast<double>(total);
      entropy -= p * std::log2(p);
    }
    const double avg = static_cast<double>(total) / static_cast<double>(n);
    result.profile.push_back(EntropyPoint{candidates[g], entropy, avg});
    if (entropy < best_entropy) {
      best_entropy = entropy;
      result.epsilon_star = candidates[g];
    }
  }
  return result;
}

std::vector<double> default_epsilon_grid(const std::vector<LineSegment>& segments,
                                         const DistanceWeights& w, std::uint64_t seed,
                                         int count) {
  if (count < 1) {
    throw std::invalid_argument("default_epsilon_grid: count must be >= 1");
  }
  if (segments.size() < 2) {
    throw std::invalid_argument("default_epsilon_grid: need at least 2 segments");
  }
  const std::vector<SegGeom> geoms = make_geoms(segments);
  const std::size_t n = segments.size();

  constexpr std::size_t kSampleTarget = 10000;
  std::vector<double> samples;
  const std::size_t total_pairs = n * (n - 1) / 2;
  if (total_pairs <= kSampleTarget) {
    samples.reserve(total_pairs);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        samples.push_back(distance_impl(geoms[i], geoms[j], w).total);
      }
    }
  } else {
    samples.reserve(kSampleTarget);
    Rng rng(seed);
    while (samples.size() < kSampleTarget) {
      const int i = rng.index(static_cast<int>(n));
      const int j = rng.index(static_cast<int>(n));
      if (i == j) continue;
      samples.push_back(distance_impl(geoms[static_cast<std::size_t>(i)],
                                      geoms[static_cast<std::size_t>(j)], w)
                            .total);
    }
  }
  std::sort(samples.begin(), samples.end());

  auto percentile = [&](double q) {
    const double rank = q / 100.0 * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, samples.size() - 1);
    const double frac = rank - std::floor(rank);
    return samples[lo] * (1.0 - frac) + samples[hi] * frac;
  };

  double lo = percentile(1.0);
  double hi = percentile(99.0);
  if (!(hi > 0.0)) {
    // All sampled distances are zero; any positive epsilon behaves the same.
    return std::vector<double>(1, 1e-12);
  }
  if (!(lo > 0.0)) {
    lo = std::max(hi * 1e-6, 1e-12);
  }

  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    grid.push_back(lo);
    return grid;
  }
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  for (int k = 0; k < count; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(count - 1);
    grid.push_back(std::exp(log_lo + (log_hi - log_lo) * f));
  }
  grid.back() = hi;
  return grid;
}

int min_lns_heuristic(const std::vector<LineSegment>& segments, double epsilon,
                      const DistanceWeights& w) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("min_lns_heuristic: epsilon must be > 0");
  }
  const std::vector<SegGeom> geoms = make_geoms(segments);
  const std::size_t n = segments.size();
  long total = static_cast<long>(n);  // self neighbors
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance_impl(geoms[i], geoms[j], w).total <= epsilon) {
        total += 2;
      }
    }
  }
  // Exact ceiling of total / n.
  return static_cast<int>((total + static_cast<long>(n) - 1) / static_cast<long>(n));
}

ClusterAssignment group_segments(const std::vector<LineSegment>& segments,
                                 const TraclusParams& params) {
  params.validate();
  const std::vector<SegGeom> geoms = make_geoms(segments);
  const std::size_t n = segments.size();

  std::vector<std::vector<int>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance_impl(geoms[i], geoms[j], params.distance_weights).total <=
          params.epsilon) {
        nbr[i].push_back(static_cast<int>(j));
        nbr[j].push_back(static_cast<int>(i));
      }
    }
  }
  // Pair scan order leaves each list ascending already; keep that invariant
  // explicit since expansion order depends on it.
  for (std::vector<int>& list : nbr) {
    std::sort(list.begin(), list.end());
  }

  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    core[i] = static_cast<int>(nbr[i].size()) + 1 >= params.min_lns;
  }

  ClusterAssignment result;
  result.labels.assign(n, SegmentLabel{});

  int next_cluster = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || result.labels[seed].cluster_id != -1) continue;
    const int cid = next_cluster++;
    std::deque<int> queue;
    result.labels[seed].cluster_id = cid;
    queue.push_back(static_cast<int>(seed));
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      if (!core[static_cast<std::size_t>(u)]) continue;
      for (int v : nbr[static_cast<std::size_t>(u)]) {
        if (result.labels[static_cast<std::size_t>(v)].cluster_id == -1) {
          result.labels[static_cast<std::size_t>(v)].cluster_id = cid;
          queue.push_back(v);
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (result.labels[i].cluster_id == -1) {
      result.labels[i].kind = SegmentKind::Noise;
    } else {
      result.labels[i].kind = core[i] ? SegmentKind::Core : SegmentKind::Border;
    }
  }
  result.cluster_count = next_cluster;
  return result;
}

NoiseAssignResult assign_noise(const std::vector<LineSegment>& segments,
                               const ClusterAssignment& assignment, int n,
                               const DistanceWeights& w, int max_sweeps) {
  if (assignment.labels.size() != segments.size()) {
    throw std::invalid_argument("assign_noise: assignment does not match segments");
  }
  if (assignment.cluster_count < 1) {
    throw std::invalid_argument("assign_noise: no clusters to assign noise to");
  }
  if (n < 1) {
    throw std::invalid_argument("assign_noise: n must be >= 1");
  }
  if (max_sweeps < 1) {
    throw std::invalid_argument("assign_noise: max_sweeps must be >= 1");
  }

  const std::vector<SegGeom> geoms = make_geoms(segments);
  const std::size_t count = segments.size();
  const int clusters = assignment.cluster_count;

  std::vector<std::size_t> noise_ids;
  for (std::size_t i = 0; i < count; ++i) {
    if (assignment.labels[i].kind == SegmentKind::Noise) {
      noise_ids.push_back(i);
    }
  }

  NoiseAssignResult result;
  result.assignment = assignment;

  // Distances from every noise segment to every segment, computed once.
  std::vector<double> dist(noise_ids.size() * count, 0.0);
  for (std::size_t s = 0; s < noise_ids.size(); ++s) {
    for (std::size_t j = 0; j < count; ++j) {
      dist[s * count + j] = distance_impl(geoms[noise_ids[s]], geoms[j], w).total;
    }
  }

  std::vector<double> scratch;
  scratch.reserve(count);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(clusters));

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    ++result.sweeps;

    // Membership frozen at the top of the sweep; noise assigned in earlier
    // sweeps takes part.
    for (auto& list : members) list.clear();
    for (std::size_t i = 0; i < count; ++i) {
      const int cid = result.assignment.labels[i].cluster_id;
      if (cid >= 0) members[static_cast<std::size_t>(cid)].push_back(static_cast<int>(i));
    }

    std::vector<int> proposed(noise_ids.size(), -1);
    for (std::size_t s = 0; s < noise_ids.size(); ++s) {
      double best = std::numeric_limits<double>::infinity();
      int best_cluster = -1;
      for (int c = 0; c < clusters; ++c) {
        const std::vector<int>& list = members[static_cast<std::size_t>(c)];
        if (list.empty()) continue;
        scratch.clear();
        for (int m : list) {
          scratch.push_back(dist[s * count + static_cast<std::size_t>(m)]);
        }
        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n),
                                                       scratch.size());
        std::nth_element(scratch.begin(), scratch.begin() + (take - 1), scratch.end());
        double sum = 0.0;
        for (std::size_t q = 0; q < take; ++q) sum += scratch[q];
        const double avg = sum / static_cast<double>(take);
        if (avg < best) {
          best = avg;
          best_cluster = c;
        }
      }
      proposed[s] = best_cluster;
    }

    int changes = 0;
    for (std::size_t s = 0; s < noise_ids.size(); ++s) {
      SegmentLabel& label = result.assignment.labels[noise_ids[s]];
      if (label.cluster_id != proposed[s]) {
        label.cluster_id = proposed[s];
        ++changes;
      }
    }

    if (changes == 0) {
      result.converged = true;
      break;
    }
    ++result.changed_sweeps;
  }

  return result;
}

}  // namespace lmc

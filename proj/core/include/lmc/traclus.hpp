#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace lmc {

// Partition-and-group trajectory clustering: MDL-based polyline
// partitioning into characteristic segments, density-based grouping of the
// segments under a three-component distance, entropy-minimizing epsilon
// selection, and a greedy sweep that folds the leftover noise segments into
// the discovered clusters.

struct SegmentProvenance {
  int episode_id = 0;
  int start_step = 0;
  int end_step = 0;
};

struct LineSegment {
  Eigen::VectorXd start;
  Eigen::VectorXd end;
  SegmentProvenance provenance;

  double length() const { return (end - start).norm(); }
};

struct DistanceWeights {
  double w_perp = 1.0;
  double w_par = 1.0;
  double w_angle = 1.0;
};

struct SegmentDistance {
  double perp = 0.0;
  double par = 0.0;
  double angle = 0.0;
  double total = 0.0;
};

// Perpendicular, parallel and angle distance with the longer segment as
// projection base (ties fall back to provenance order, then argument
// order). Symmetric in its arguments by construction; degenerate segments
// are treated as points.
SegmentDistance segment_distance(const LineSegment& a, const LineSegment& b,
                                 const DistanceWeights& w = {});

// MDL cost of describing points[i..j]. Partitioned: log2 of the chord
// length plus log2 of the summed perpendicular and angle deviations of the
// enclosed steps from the chord; non-partitioned: summed log2 step lengths.
// Every log2 argument is clamped below at 1.
double mdl_cost(const std::vector<Eigen::VectorXd>& points, int i, int j,
                bool partitioned);

// Approximate trajectory partitioning: sweep an end index and emit a
// characteristic point whenever the partitioned MDL cost overtakes the
// non-partitioned one. First and last points are always characteristic.
std::vector<LineSegment> partition(const std::vector<Eigen::VectorXd>& points,
                                   int episode_id = 0);

struct TraclusParams {
  double epsilon = 0.0;
  int min_lns = 1;
  DistanceWeights distance_weights;

  void validate() const;
};

enum class SegmentKind { Core, Border, Noise };

struct SegmentLabel {
  SegmentKind kind = SegmentKind::Noise;
  int cluster_id = -1;  // -1 = unassigned
};

struct ClusterAssignment {
  std::vector<SegmentLabel> labels;
  int cluster_count = 0;
};

struct EntropyPoint {
  double epsilon = 0.0;
  double entropy = 0.0;
  double avg_neighbors = 0.0;
};
using EntropyProfile = std::vector<EntropyPoint>;

struct EntropyResult {
  double entropy = 0.0;
  double avg_neighbors = 0.0;
};

// Neighborhood-count entropy at one epsilon. A segment always counts
// itself (distance 0), so the entropy tops out at log2(n) both when every
// segment is isolated and when everything is mutually close.
EntropyResult epsilon_entropy(const std::vector<LineSegment>& segments, double epsilon,
                              const DistanceWeights& w = {});

struct TuneResult {
  double epsilon_star = 0.0;
  EntropyProfile profile;
};

// Exhaustive entropy scan over the candidate grid; smallest epsilon wins
// ties.
TuneResult tune_epsilon(const std::vector<LineSegment>& segments,
                        std::vector<double> candidates, const DistanceWeights& w = {});

// Log-spaced candidates between the 1st and 99th percentile of a sampled
// set of pairwise segment distances.
std::vector<double> default_epsilon_grid(const std::vector<LineSegment>& segments,
                                         const DistanceWeights& w, std::uint64_t seed,
                                         int count = 64);

// ceil(average neighbor count) at the given epsilon, computed exactly in
// integer arithmetic.
int min_lns_heuristic(const std::vector<LineSegment>& segments, double epsilon,
                      const DistanceWeights& w = {});

// Density grouping: core iff |N_eps| >= min_lns (self included); border
// segments join the first cluster that reaches them in index-ordered
// expansion; everything else is noise. Cluster ids follow discovery order.
ClusterAssignment group_segments(const std::vector<LineSegment>& segments,
                                 const TraclusParams& params);

struct NoiseAssignResult {
  ClusterAssignment assignment;
  int sweeps = 0;          // sweeps executed, including the final no-change one
  int changed_sweeps = 0;  // sweeps that moved at least one segment
  bool converged = false;
};

// Greedy noise folding: every original-noise segment joins the cluster
// whose n nearest members are on average closest, sweeping until no
// assignment changes. Membership is frozen per sweep and includes noise
// assigned in earlier sweeps. Core/Border labels never change; reassigned
// segments keep kind = Noise but gain a cluster_id.
NoiseAssignResult assign_noise(const std::vector<LineSegment>& segments,
                               const ClusterAssignment& assignment, int n,
                               const DistanceWeights& w = {}, int max_sweeps = 50);

}  // namespace lmc

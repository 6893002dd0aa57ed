#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmc/colors.hpp"
#include "lmc/mountain_car.hpp"
#include "lmc/pacmap.hpp"
#include "lmc/policy_net.hpp"
#include "lmc/rollout.hpp"
#include "lmc/traclus.hpp"

namespace lmc {

// End-to-end orchestration: train -> rollout -> reduce -> cluster ->
// backmap -> plot, with every stage also runnable on its own against the
// documented file formats.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& message)
      : std::runtime_error(stage_name + ": " + message), stage(std::move(stage_name)) {}
  std::string stage;
};

enum class ClusterSpace { ReducedLatent, RawLatent };

struct GridSpec {
  int n_pos = 10;
  int n_vel = 10;
  Interval pos_range{-1.25, 0.5};
  Interval vel_range{-0.07, 0.07};
};

struct PatchScenario {
  EnvState s0;
  std::vector<ActionOverride> overrides;
};

std::vector<PatchScenario> default_patch_scenarios();

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::filesystem::path output_dir = "out";
  ClusterSpace cluster_space = ClusterSpace::ReducedLatent;
  EnvConfig env;
  GridSpec grid;
  BCConfig bc;  // bc.seed is resolved from `seed` when the file omits it
  std::optional<std::filesystem::path> weights;  // load instead of training
  double pca_threshold = 0.999;
  // pacmap.output_dim = 0 means "use the PCA explained-variance heuristic".
  PacmapConfig pacmap;
  std::optional<TraclusParams> traclus;  // absent: entropy + MinLns heuristics
  std::optional<int> noise_n;            // absent: min_lns
  double dedup_tau = 0.05;
  int plot_split_threshold = 21;
  std::vector<int> sweep_nnb = {3, 5, 10, 15, 20, 30};
  std::vector<PatchScenario> patch_scenarios = default_patch_scenarios();

  PipelineConfig();
  void validate() const;
};

// Strict JSON config: unknown keys are errors, every field optional with
// the defaults above. Absent sub-seeds derive from the master seed, so the
// overrides must be applied at load time. A run manifest parses as a
// config: its derived_params/results sections are ignored.
PipelineConfig parse_config(const std::string& text,
                            std::optional<std::uint64_t> seed_override = {},
                            std::optional<std::filesystem::path> out_override = {});
PipelineConfig load_config(const std::filesystem::path& path,
                           std::optional<std::uint64_t> seed_override = {},
                           std::optional<std::filesystem::path> out_override = {});
std::string config_to_json(const PipelineConfig& config);

struct BackmappedSegment {
  int episode_id = 0;
  int cluster_id = -1;
  SegmentKind kind = SegmentKind::Noise;
  std::vector<std::array<double, 2>> state_points;  // (position, velocity)
};

// Pure provenance lookup into the dataset; no geometry is recomputed.
std::vector<BackmappedSegment> backmap_segments(const ClusterAssignment& assignment,
                                                const std::vector<LineSegment>& segments,
                                                const TrajectoryDataset& dataset);

struct AxesSpec {
  double x_min = -1.25;
  double x_max = 0.6;
  double y_min = -0.07;
  double y_max = 0.07;
  std::string x_label = "position";
  std::string y_label = "velocity";
  std::optional<double> goal_x;
  std::string title;
};

// One polyline per drawn segment, colored by cluster; legend maps cluster id
// to color. Returns one document, or two split by cluster-id parity when the
// cluster count exceeds the threshold. Only segments of kept episodes are
// drawn. Same inputs produce identical bytes.
std::vector<std::string> render_plot(const std::vector<BackmappedSegment>& segments,
                                     const std::vector<int>& kept_episodes,
                                     const std::vector<Rgb>& colors,
                                     const AxesSpec& axes, int split_threshold = 21);

// Trajectories in a 2-D embedding, one polyline per episode; used by the
// n_nb sweep.
std::string render_embedding_plot(const Eigen::MatrixXd& points,
                                  const std::vector<RowRef>& provenance,
                                  const std::string& title, std::uint64_t color_seed);

struct PatchReport {
  EnvState s0;
  std::vector<ActionOverride> overrides;
  double baseline_return = 0.0;
  double patched_return = 0.0;
  int baseline_len = 0;
  int patched_len = 0;
};

PatchReport patch_eval(const PolicyNetwork& net, const EnvConfig& config, EnvState s0,
                       const std::vector<ActionOverride>& overrides);

// Individual CLI stages. Each reads its inputs from the output directory
// (or the configured weights path) and writes the documented files.
std::filesystem::path stage_train_bc(const PipelineConfig& config);
std::filesystem::path stage_rollout(const PipelineConfig& config);
std::filesystem::path stage_reduce(const PipelineConfig& config);
std::vector<std::filesystem::path> stage_sweep_nnb(const PipelineConfig& config);
std::filesystem::path stage_cluster(const PipelineConfig& config);
std::vector<std::filesystem::path> stage_plot(const PipelineConfig& config);
std::filesystem::path stage_patch_eval(const PipelineConfig& config);

struct RunArtifacts {
  std::filesystem::path manifest_path;
  std::filesystem::path weights_path;
  std::filesystem::path dataset_path;
  std::filesystem::path clusters_path;
  std::optional<std::filesystem::path> embedding_path;
  std::vector<std::filesystem::path> plot_paths;

  // Heuristic-resolved parameters, also recorded in the manifest.
  int target_dim = 0;
  double epsilon = 0.0;
  int min_lns = 0;
  int noise_n = 0;
  int cluster_count = 0;
  int segment_count = 0;
  int noise_sweeps = 0;
  bool noise_converged = false;
  int kept_episodes = 0;
};

// Full deterministic run; on failure the stage name is reported and partial
// outputs of this run are removed.
RunArtifacts run_pipeline(const PipelineConfig& config);

}  // namespace lmc

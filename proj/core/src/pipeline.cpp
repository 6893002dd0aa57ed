#include "lmc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <nlohmann/json.hpp>

#include "lmc/io.hpp"
#include "lmc/pca.hpp"
#include "lmc/rng.hpp"
#include "lmc/svg.hpp"

namespace lmc {

namespace {

using json = nlohmann::ordered_json;

// Stage-specific RNG streams derived from the master seed.
constexpr std::uint64_t kBcStream = 1;
constexpr std::uint64_t kPacmapStream = 2;
constexpr std::uint64_t kEpsilonStream = 3;
constexpr std::uint64_t kColorStream = 4;

constexpr const char* kWeightsFile = "weights.json";
constexpr const char* kDatasetFile = "dataset.csv";
constexpr const char* kEmbeddingFile = "embedding.csv";
constexpr const char* kClustersFile = "clusters.json";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kPatchFile = "patch_report.json";

void expect_keys(const json& obj, const char* where,
                 std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
    }
  }
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw ConfigError(std::string("config: '") + key + "' must be a number");
  }
  return obj[key].get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) {
    throw ConfigError(std::string("config: '") + key + "' must be an integer");
  }
  return obj[key].get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) {
    throw ConfigError(std::string("config: '") + key + "' must be a boolean");
  }
  return obj[key].get<bool>();
}

Interval get_interval(const json& obj, const char* key, Interval fallback) {
  if (!obj.contains(key)) return fallback;
  const json& arr = obj[key];
  if (!arr.is_array() || arr.size() != 2 || !arr[0].is_number() || !arr[1].is_number()) {
    throw ConfigError(std::string("config: '") + key + "' must be [lo, hi]");
  }
  return Interval{arr[0].get<double>(), arr[1].get<double>()};
}

EnvConfig parse_env(const json& obj) {
  expect_keys(obj, "config.env",
              {"goal_position", "force_scale", "gravity_scale", "max_steps",
               "reward_variant"});
  EnvConfig env;
  env.goal_position = get_number(obj, "goal_position", env.goal_position);
  env.force_scale = get_number(obj, "force_scale", env.force_scale);
  env.gravity_scale = get_number(obj, "gravity_scale", env.gravity_scale);
  env.max_steps = get_int(obj, "max_steps", env.max_steps);
  if (obj.contains("reward_variant")) {
    const std::string name = obj["reward_variant"].get<std::string>();
    if (name == "original") {
      env.reward_variant = RewardVariant::Original;
    } else if (name == "modified") {
      env.reward_variant = RewardVariant::Modified;
    } else {
      throw ConfigError("config.env: reward_variant must be 'original' or 'modified'");
    }
  }
  return env;
}

GridSpec parse_grid(const json& obj) {
  expect_keys(obj, "config.grid", {"n_pos", "n_vel", "pos_range", "vel_range"});
  GridSpec grid;
  grid.n_pos = get_int(obj, "n_pos", grid.n_pos);
  grid.n_vel = get_int(obj, "n_vel", grid.n_vel);
  grid.pos_range = get_interval(obj, "pos_range", grid.pos_range);
  grid.vel_range = get_interval(obj, "vel_range", grid.vel_range);
  return grid;
}

BCConfig parse_bc(const json& obj, std::uint64_t master_seed) {
  expect_keys(obj, "config.bc",
              {"hidden_sizes", "learning_rate", "epochs", "batch_size", "seed",
               "sample_grid"});
  BCConfig bc;
  if (obj.contains("hidden_sizes")) {
    bc.hidden_sizes.clear();
    for (const json& h : obj["hidden_sizes"]) {
      bc.hidden_sizes.push_back(h.get<int>());
    }
  }
  bc.learning_rate = get_number(obj, "learning_rate", bc.learning_rate);
  bc.epochs = get_int(obj, "epochs", bc.epochs);
  bc.batch_size = get_int(obj, "batch_size", bc.batch_size);
  bc.seed = obj.contains("seed") ? obj["seed"].get<std::uint64_t>()
                                 : Rng::derive(master_seed, kBcStream);
  if (obj.contains("sample_grid")) {
    const json& sg = obj["sample_grid"];
    if (!sg.is_array() || sg.size() != 2) {
      throw ConfigError("config.bc: sample_grid must be [n_pos, n_vel]");
    }
    bc.sample_n_pos = sg[0].get<int>();
    bc.sample_n_vel = sg[1].get<int>();
  }
  return bc;
}

PacmapConfig parse_pacmap(const json& obj, std::uint64_t master_seed) {
  expect_keys(obj, "config.pacmap",
              {"n_nb", "mn_ratio", "fp_ratio", "output_dim", "iterations",
               "learning_rate", "seed", "exact_pairs", "weight_schedule"});
  PacmapConfig pm;
  pm.output_dim = 0;  // pipeline sentinel: derive from the PCA heuristic
  pm.n_nb = get_int(obj, "n_nb", pm.n_nb);
  pm.mn_ratio = get_number(obj, "mn_ratio", pm.mn_ratio);
  pm.fp_ratio = get_number(obj, "fp_ratio", pm.fp_ratio);
  pm.output_dim = get_int(obj, "output_dim", pm.output_dim);
  pm.iterations = get_int(obj, "iterations", pm.iterations);
  pm.learning_rate = get_number(obj, "learning_rate", pm.learning_rate);
  pm.seed = obj.contains("seed") ? obj["seed"].get<std::uint64_t>()
                                 : Rng::derive(master_seed, kPacmapStream);
  pm.exact_pairs = get_bool(obj, "exact_pairs", pm.exact_pairs);
  if (obj.contains("weight_schedule")) {
    pm.weight_schedule.clear();
    for (const json& jp : obj["weight_schedule"]) {
      expect_keys(jp, "config.pacmap.weight_schedule",
                  {"first_iter", "last_iter", "w_nb", "w_mn_start", "w_mn_end", "w_fp"});
      PacmapPhase phase;
      phase.first_iter = get_int(jp, "first_iter", phase.first_iter);
      phase.last_iter = get_int(jp, "last_iter", phase.last_iter);
      phase.w_nb = get_number(jp, "w_nb", phase.w_nb);
      phase.w_mn_start = get_number(jp, "w_mn_start", phase.w_mn_start);
      phase.w_mn_end = get_number(jp, "w_mn_end", phase.w_mn_end);
      phase.w_fp = get_number(jp, "w_fp", phase.w_fp);
      pm.weight_schedule.push_back(phase);
    }
  } else {
    pm.weight_schedule = default_weight_schedule(pm.iterations);
  }
  return pm;
}

TraclusParams parse_traclus(const json& obj) {
  expect_keys(obj, "config.traclus", {"epsilon", "min_lns", "distance_weights"});
  TraclusParams params;
  params.epsilon = get_number(obj, "epsilon", params.epsilon);
  params.min_lns = get_int(obj, "min_lns", params.min_lns);
  if (obj.contains("distance_weights")) {
    const json& arr = obj["distance_weights"];
    if (!arr.is_array() || arr.size() != 3) {
      throw ConfigError("config.traclus: distance_weights must be [w_perp, w_par, w_angle]");
    }
    params.distance_weights.w_perp = arr[0].get<double>();
    params.distance_weights.w_par = arr[1].get<double>();
    params.distance_weights.w_angle = arr[2].get<double>();
  }
  return params;
}

std::vector<PatchScenario> parse_patch_scenarios(const json& arr) {
  std::vector<PatchScenario> scenarios;
  for (const json& js : arr) {
    expect_keys(js, "config.patch_scenarios", {"s0", "overrides"});
    PatchScenario sc;
    if (!js.contains("s0") || !js["s0"].is_array() || js["s0"].size() != 2) {
      throw ConfigError("config.patch_scenarios: s0 must be [position, velocity]");
    }
    sc.s0.position = js["s0"][0].get<double>();
    sc.s0.velocity = js["s0"][1].get<double>();
    if (js.contains("overrides")) {
      for (const json& jo : js["overrides"]) {
        if (!jo.is_array() || jo.size() != 2) {
          throw ConfigError("config.patch_scenarios: overrides must be [step, action] pairs");
        }
        sc.overrides.push_back(ActionOverride{jo[0].get<int>(), jo[1].get<double>()});
      }
    }
    scenarios.push_back(std::move(sc));
  }
  return scenarios;
}

json interval_json(const Interval& r) { return json::array({r.lo, r.hi}); }

json config_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["cluster_space"] =
      c.cluster_space == ClusterSpace::ReducedLatent ? "reduced" : "raw";
  json env;
  env["goal_position"] = c.env.goal_position;
  env["force_scale"] = c.env.force_scale;
  env["gravity_scale"] = c.env.gravity_scale;
  env["max_steps"] = c.env.max_steps;
  env["reward_variant"] =
      c.env.reward_variant == RewardVariant::Original ? "original" : "modified";
  j["env"] = std::move(env);
  json grid;
  grid["n_pos"] = c.grid.n_pos;
  grid["n_vel"] = c.grid.n_vel;
  grid["pos_range"] = interval_json(c.grid.pos_range);
  grid["vel_range"] = interval_json(c.grid.vel_range);
  j["grid"] = std::move(grid);
  json bc;
  bc["hidden_sizes"] = c.bc.hidden_sizes;
  bc["learning_rate"] = c.bc.learning_rate;
  bc["epochs"] = c.bc.epochs;
  bc["batch_size"] = c.bc.batch_size;
  bc["seed"] = c.bc.seed;
  bc["sample_grid"] = json::array({c.bc.sample_n_pos, c.bc.sample_n_vel});
  j["bc"] = std::move(bc);
  if (c.weights) {
    j["weights"] = c.weights->string();
  }
  j["pca_threshold"] = c.pca_threshold;
  json pm;
  pm["n_nb"] = c.pacmap.n_nb;
  pm["mn_ratio"] = c.pacmap.mn_ratio;
  pm["fp_ratio"] = c.pacmap.fp_ratio;
  if (c.pacmap.output_dim > 0) {
    pm["output_dim"] = c.pacmap.output_dim;
  }
  pm["iterations"] = c.pacmap.iterations;
  pm["learning_rate"] = c.pacmap.learning_rate;
  pm["seed"] = c.pacmap.seed;
  pm["exact_pairs"] = c.pacmap.exact_pairs;
  json schedule = json::array();
  for (const PacmapPhase& phase : c.pacmap.weight_schedule) {
    json jp;
    jp["first_iter"] = phase.first_iter;
    jp["last_iter"] = phase.last_iter;
    jp["w_nb"] = phase.w_nb;
    jp["w_mn_start"] = phase.w_mn_start;
    jp["w_mn_end"] = phase.w_mn_end;
    jp["w_fp"] = phase.w_fp;
    schedule.push_back(std::move(jp));
  }
  pm["weight_schedule"] = std::move(schedule);
  j["pacmap"] = std::move(pm);
  if (c.traclus) {
    json tr;
    tr["epsilon"] = c.traclus->epsilon;
    tr["min_lns"] = c.traclus->min_lns;
    tr["distance_weights"] =
        json::array({c.traclus->distance_weights.w_perp, c.traclus->distance_weights.w_par,
                     c.traclus->distance_weights.w_angle});
    j["traclus"] = std::move(tr);
  }
  if (c.noise_n) {
    j["noise_n"] = *c.noise_n;
  }
  j["dedup_tau"] = c.dedup_tau;
  j["plot_split_threshold"] = c.plot_split_threshold;
  j["sweep_nnb"] = c.sweep_nnb;
  json scenarios = json::array();
  for (const PatchScenario& sc : c.patch_scenarios) {
    json js;
    js["s0"] = json::array({sc.s0.position, sc.s0.velocity});
    json overrides = json::array();
    for (const ActionOverride& o : sc.overrides) {
      overrides.push_back(json::array({o.step_index, o.action}));
    }
    js["overrides"] = std::move(overrides);
    scenarios.push_back(std::move(js));
  }
  j["patch_scenarios"] = std::move(scenarios);
  return j;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// File writes registered for rollback when a later stage fails.
class FileTracker {
 public:
  void note(const std::filesystem::path& path) { created_.push_back(path); }

  void write(const std::filesystem::path& path, const std::string& content) {
    note(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot open " + path.string());
    }
    out << content;
    if (!out) {
      throw std::runtime_error("write failed for " + path.string());
    }
  }

  void rollback() {
    for (const std::filesystem::path& path : created_) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
    }
    created_.clear();
  }

 private:
  std::vector<std::filesystem::path> created_;
};

std::string kind_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Core: return "core";
    case SegmentKind::Border: return "border";
    case SegmentKind::Noise: return "noise";
  }
  throw std::invalid_argument("kind_name: unknown kind");
}

SegmentKind kind_from_name(const std::string& name) {
  if (name == "core") return SegmentKind::Core;
  if (name == "border") return SegmentKind::Border;
  if (name == "noise") return SegmentKind::Noise;
  throw std::runtime_error("clusters file: unknown segment kind '" + name + "'");
}

json clusters_json(const TraclusParams& params, int noise_n,
                   const std::vector<LineSegment>& segments,
                   const ClusterAssignment& assignment, const EntropyProfile& profile) {
  json j;
  json jp;
  jp["epsilon"] = params.epsilon;
  jp["min_lns"] = params.min_lns;
  jp["distance_weights"] =
      json::array({params.distance_weights.w_perp, params.distance_weights.w_par,
                   params.distance_weights.w_angle});
  jp["noise_n"] = noise_n;
  j["params"] = std::move(jp);

  json segs = json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const LineSegment& seg = segments[i];
    const SegmentLabel& label = assignment.labels[i];
    json js;
    js["episode_id"] = seg.provenance.episode_id;
    js["start_step"] = seg.provenance.start_step;
    js["end_step"] = seg.provenance.end_step;
    js["kind"] = kind_name(label.kind);
    if (label.cluster_id >= 0) {
      js["cluster_id"] = label.cluster_id;
    } else {
      js["cluster_id"] = nullptr;
    }
    json start = json::array();
    json end = json::array();
    for (Eigen::Index k = 0; k < seg.start.size(); ++k) {
      start.push_back(seg.start(k));
      end.push_back(seg.end(k));
    }
    js["start"] = std::move(start);
    js["end"] = std::move(end);
    segs.push_back(std::move(js));
  }
  j["segments"] = std::move(segs);

  json prof = json::array();
  for (const EntropyPoint& pt : profile) {
    json jpt;
    jpt["epsilon"] = pt.epsilon;
    jpt["entropy"] = pt.entropy;
    jpt["avg_neighbors"] = pt.avg_neighbors;
    prof.push_back(std::move(jpt));
  }
  j["entropy_profile"] = std::move(prof);
  return j;
}

struct ClustersFile {
  TraclusParams params;
  int noise_n = 0;
  std::vector<LineSegment> segments;
  ClusterAssignment assignment;
  EntropyProfile profile;
};

ClustersFile read_clusters_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }

  ClustersFile file;
  const json& jp = j.at("params");
  file.params.epsilon = jp.at("epsilon").get<double>();
  file.params.min_lns = jp.at("min_lns").get<int>();
  file.params.distance_weights.w_perp = jp.at("distance_weights")[0].get<double>();
  file.params.distance_weights.w_par = jp.at("distance_weights")[1].get<double>();
  file.params.distance_weights.w_angle = jp.at("distance_weights")[2].get<double>();
  file.noise_n = jp.at("noise_n").get<int>();

  int max_cluster = -1;
  for (const json& js : j.at("segments")) {
    LineSegment seg;
    seg.provenance.episode_id = js.at("episode_id").get<int>();
    seg.provenance.start_step = js.at("start_step").get<int>();
    seg.provenance.end_step = js.at("end_step").get<int>();
    const json& start = js.at("start");
    const json& end = js.at("end");
    seg.start.resize(static_cast<Eigen::Index>(start.size()));
    seg.end.resize(static_cast<Eigen::Index>(end.size()));
    for (std::size_t k = 0; k < start.size(); ++k) {
      seg.start(static_cast<Eigen::Index>(k)) = start[k].get<double>();
      seg.end(static_cast<Eigen::Index>(k)) = end[k].get<double>();
    }
    file.segments.push_back(std::move(seg));

    SegmentLabel label;
    label.kind = kind_from_name(js.at("kind").get<std::string>());
    label.cluster_id = js.at("cluster_id").is_null() ? -1 : js.at("cluster_id").get<int>();
    max_cluster = std::max(max_cluster, label.cluster_id);
    file.assignment.labels.push_back(label);
  }
  file.assignment.cluster_count = max_cluster + 1;

  for (const json& jpt : j.at("entropy_profile")) {
    file.profile.push_back(EntropyPoint{jpt.at("epsilon").get<double>(),
                                        jpt.at("entropy").get<double>(),
                                        jpt.at("avg_neighbors").get<double>()});
  }
  return file;
}

}  // namespace

std::vector<PatchScenario> default_patch_scenarios() {
  return {
      PatchScenario{EnvState{-0.35, 0.028}, {ActionOverride{0, -1.0}}},
      PatchScenario{EnvState{-0.7, 0.0},
                    {ActionOverride{0, 1.0}, ActionOverride{1, 1.0}, ActionOverride{2, 1.0}}},
  };
}

PipelineConfig::PipelineConfig() {
  bc.seed = Rng::derive(seed, kBcStream);
  pacmap.seed = Rng::derive(seed, kPacmapStream);
  pacmap.output_dim = 0;  // derive from the PCA heuristic
}

void PipelineConfig::validate() const {
  env.validate();
  bc.validate();
  if (grid.n_pos < 1 || grid.n_vel < 1) {
    throw ConfigError("config.grid: counts must be >= 1");
  }
  if (!(pca_threshold > 0.0 && pca_threshold <= 1.0)) {
    throw ConfigError("config: pca_threshold must be in (0, 1]");
  }
  if (pacmap.output_dim < 0) {
    throw ConfigError("config.pacmap: output_dim must be >= 0");
  }
  if (pacmap.output_dim != 0) {
    PacmapConfig check = pacmap;
    check.validate();
  } else {
    PacmapConfig check = pacmap;
    check.output_dim = 1;
    check.validate();
  }
  if (traclus) {
    traclus->validate();
  }
  if (noise_n && *noise_n < 1) {
    throw ConfigError("config: noise_n must be >= 1");
  }
  if (std::isnan(dedup_tau) || dedup_tau < 0.0) {
    throw ConfigError("config: dedup_tau must be >= 0");
  }
  if (plot_split_threshold < 1) {
    throw ConfigError("config: plot_split_threshold must be >= 1");
  }
  for (int k : sweep_nnb) {
    if (k < 1) throw ConfigError("config: sweep_nnb entries must be >= 1");
  }
}

namespace {

PipelineConfig parse_config_object(const json& j,
                                   std::optional<std::uint64_t> seed_override,
                                   std::optional<std::filesystem::path> out_override) {
  PipelineConfig c;
  c.seed = seed_override ? *seed_override
                         : (j.contains("seed") ? j["seed"].get<std::uint64_t>() : c.seed);
  if (out_override) {
    c.output_dir = *out_override;
  } else if (j.contains("output_dir")) {
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("cluster_space")) {
    const std::string name = j["cluster_space"].get<std::string>();
    if (name == "reduced") {
      c.cluster_space = ClusterSpace::ReducedLatent;
    } else if (name == "raw") {
      c.cluster_space = ClusterSpace::RawLatent;
    } else {
      throw ConfigError("config: cluster_space must be 'reduced' or 'raw'");
    }
  }
  c.env = parse_env(j.contains("env") ? j["env"] : json::object());
  c.grid = parse_grid(j.contains("grid") ? j["grid"] : json::object());
  c.bc = parse_bc(j.contains("bc") ? j["bc"] : json::object(), c.seed);
  if (j.contains("weights") && !j["weights"].is_null()) {
    c.weights = std::filesystem::path(j["weights"].get<std::string>());
  }
  c.pca_threshold = get_number(j, "pca_threshold", c.pca_threshold);
  c.pacmap = parse_pacmap(j.contains("pacmap") ? j["pacmap"] : json::object(), c.seed);
  if (j.contains("traclus") && !j["traclus"].is_null()) {
    c.traclus = parse_traclus(j["traclus"]);
  }
  if (j.contains("noise_n") && !j["noise_n"].is_null()) {
    c.noise_n = j["noise_n"].get<int>();
  }
  c.dedup_tau = get_number(j, "dedup_tau", c.dedup_tau);
  c.plot_split_threshold = get_int(j, "plot_split_threshold", c.plot_split_threshold);
  if (j.contains("sweep_nnb")) {
    c.sweep_nnb.clear();
    for (const json& k : j["sweep_nnb"]) {
      c.sweep_nnb.push_back(k.get<int>());
    }
  }
  if (j.contains("patch_scenarios")) {
    c.patch_scenarios = parse_patch_scenarios(j["patch_scenarios"]);
  }
  c.validate();
  return c;
}

}  // namespace

PipelineConfig parse_config(const std::string& text,
                            std::optional<std::uint64_t> seed_override,
                            std::optional<std::filesystem::path> out_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) {
    throw ConfigError("config: top level must be an object");
  }
  expect_keys(j, "config",
              {"seed", "output_dir", "cluster_space", "env", "grid", "bc", "weights",
               "pca_threshold", "pacmap", "traclus", "noise_n", "dedup_tau",
               "plot_split_threshold", "sweep_nnb", "patch_scenarios",
               "derived_params", "results"});
  try {
    return parse_config_object(j, seed_override, out_override);
  } catch (const json::exception& e) {
    // Wrong value types surface as json errors; they are config errors too.
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path,
                           std::optional<std::uint64_t> seed_override,
                           std::optional<std::filesystem::path> out_override) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), seed_override, out_override);
}

std::string config_to_json(const PipelineConfig& config) {
  return dump_json(config_json(config));
}

std::vector<BackmappedSegment> backmap_segments(const ClusterAssignment& assignment,
                                                const std::vector<LineSegment>& segments,
                                                const TrajectoryDataset& dataset) {
  if (assignment.labels.size() != segments.size()) {
    throw std::invalid_argument("backmap_segments: assignment does not match segments");
  }
  std::vector<BackmappedSegment> out;
  out.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const SegmentProvenance& prov = segments[i].provenance;
    const Episode* episode = nullptr;
    for (const Episode& ep : dataset.episodes) {
      if (ep.episode_id == prov.episode_id) {
        episode = &ep;
        break;
      }
    }
    if (episode == nullptr) {
      throw std::runtime_error("backmap_segments: segment " + std::to_string(i) +
                               " references unknown episode " +
                               std::to_string(prov.episode_id));
    }
    if (prov.start_step < 0 || prov.end_step < prov.start_step ||
        prov.end_step >= static_cast<int>(episode->steps.size())) {
      throw std::runtime_error("backmap_segments: segment " + std::to_string(i) +
                               " has a dangling step range");
    }
    BackmappedSegment bs;
    bs.episode_id = prov.episode_id;
    bs.cluster_id = assignment.labels[i].cluster_id;
    bs.kind = assignment.labels[i].kind;
    for (int s = prov.start_step; s <= prov.end_step; ++s) {
      const EnvState& st = episode->steps[static_cast<std::size_t>(s)].state;
      bs.state_points.push_back({st.position, st.velocity});
    }
    out.push_back(std::move(bs));
  }
  return out;
}

namespace {

struct PlotLayout {
  double width = 900.0;
  double height = 600.0;
  double ml = 70.0;
  double mr = 190.0;
  double mt = 45.0;
  double mb = 55.0;

  double plot_w() const { return width - ml - mr; }
  double plot_h() const { return height - mt - mb; }
};

std::string format_tick(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

std::string build_cluster_svg(const std::vector<BackmappedSegment>& segments,
                              const std::unordered_set<int>& kept,
                              const std::vector<Rgb>& colors, const AxesSpec& axes,
                              const std::vector<int>& legend_ids,
                              const std::string& subtitle) {
  const PlotLayout L;
  SvgDoc doc(L.width, L.height);
  doc.rect(0, 0, L.width, L.height, "#ffffff");

  const double x_span = axes.x_max - axes.x_min;
  const double y_span = axes.y_max - axes.y_min;
  auto px = [&](double x) { return L.ml + (x - axes.x_min) / x_span * L.plot_w(); };
  auto py = [&](double y) { return L.mt + (axes.y_max - y) / y_span * L.plot_h(); };

  std::string title = axes.title;
  if (!subtitle.empty()) {
    title += " " + subtitle;
  }
  doc.text(L.ml, 27.0, title, 15);

  // Ticks before the frame so the frame edge stays crisp.
  for (int i = 0; i <= 4; ++i) {
    const double xv = axes.x_min + x_span * i / 4.0;
    const double xp = px(xv);
    doc.line(xp, L.mt + L.plot_h(), xp, L.mt + L.plot_h() + 5.0, "#333333");
    doc.text(xp, L.mt + L.plot_h() + 20.0, format_tick(xv, 2), 11, "middle");
    const double yv = axes.y_min + y_span * i / 4.0;
    const double yp = py(yv);
    doc.line(L.ml - 5.0, yp, L.ml, yp, "#333333");
    doc.text(L.ml - 8.0, yp + 4.0, format_tick(yv, 3), 11, "end");
  }
  doc.text(L.ml + L.plot_w() / 2.0, L.height - 14.0, axes.x_label, 13, "middle");
  doc.text(L.ml, L.mt - 8.0, axes.y_label, 13);
  doc.rect(L.ml, L.mt, L.plot_w(), L.plot_h(), "none", "#333333");

  if (axes.goal_x && *axes.goal_x >= axes.x_min && *axes.goal_x <= axes.x_max) {
    const double gx = px(*axes.goal_x);
    doc.line(gx, L.mt, gx, L.mt + L.plot_h(), "#707070", 1.0, true);
    doc.text(gx + 4.0, L.mt + 14.0, "goal", 11);
  }

  const std::unordered_set<int> legend_set(legend_ids.begin(), legend_ids.end());
  for (const BackmappedSegment& seg : segments) {
    if (!kept.count(seg.episode_id)) continue;
    if (seg.cluster_id >= 0 && !legend_set.count(seg.cluster_id)) continue;
    const std::string color =
        seg.cluster_id >= 0 ? to_hex(colors[static_cast<std::size_t>(seg.cluster_id)])
                            : "#999999";
    std::vector<std::pair<double, double>> pts;
    pts.reserve(seg.state_points.size());
    for (const std::array<double, 2>& p : seg.state_points) {
      pts.emplace_back(px(p[0]), py(p[1]));
    }
    doc.polyline(pts, color, 1.2);
  }

  const double legend_x = L.ml + L.plot_w() + 18.0;
  constexpr int kRowsPerColumn = 27;
  for (std::size_t idx = 0; idx < legend_ids.size(); ++idx) {
    const int id = legend_ids[idx];
    const double col = static_cast<double>(idx / kRowsPerColumn);
    const double row = static_cast<double>(idx % kRowsPerColumn);
    const double x = legend_x + col * 86.0;
    const double y = L.mt + row * 18.0;
    doc.rect(x, y, 12.0, 12.0, to_hex(colors[static_cast<std::size_t>(id)]), "#333333");
    doc.text(x + 17.0, y + 10.0, "cluster " + std::to_string(id), 11);
  }
  return doc.finish();
}

}  // namespace

std::vector<std::string> render_plot(const std::vector<BackmappedSegment>& segments,
                                     const std::vector<int>& kept_episodes,
                                     const std::vector<Rgb>& colors,
                                     const AxesSpec& axes, int split_threshold) {
  int cluster_count = 0;
  for (const BackmappedSegment& seg : segments) {
    cluster_count = std::max(cluster_count, seg.cluster_id + 1);
  }
  if (cluster_count > static_cast<int>(colors.size())) {
    throw std::invalid_argument("render_plot: not enough colors for " +
                                std::to_string(cluster_count) + " clusters");
  }
  if (!(axes.x_max > axes.x_min) || !(axes.y_max > axes.y_min)) {
    throw std::invalid_argument("render_plot: degenerate axes ranges");
  }

  const std::unordered_set<int> kept(kept_episodes.begin(), kept_episodes.end());

  if (cluster_count <= split_threshold) {
    std::vector<int> ids(static_cast<std::size_t>(cluster_count));
    for (int i = 0; i < cluster_count; ++i) ids[static_cast<std::size_t>(i)] = i;
    return {build_cluster_svg(segments, kept, colors, axes, ids, "")};
  }

  // Too many clusters for one readable plot: split by id parity.
  std::vector<int> even_ids;
  std::vector<int> odd_ids;
  for (int i = 0; i < cluster_count; ++i) {
    (i % 2 == 0 ? even_ids : odd_ids).push_back(i);
  }
  return {build_cluster_svg(segments, kept, colors, axes, even_ids, "(part 1 of 2)"),
          build_cluster_svg(segments, kept, colors, axes, odd_ids, "(part 2 of 2)")};
}

std::string render_embedding_plot(const Eigen::MatrixXd& points,
                                  const std::vector<RowRef>& provenance,
                                  const std::string& title, std::uint64_t color_seed) {
  if (points.cols() != 2) {
    throw std::invalid_argument("render_embedding_plot: need 2-D points");
  }
  if (static_cast<std::size_t>(points.rows()) != provenance.size()) {
    throw std::invalid_argument("render_embedding_plot: provenance size mismatch");
  }

  const PlotLayout L;
  SvgDoc doc(L.width, L.height);
  doc.rect(0, 0, L.width, L.height, "#ffffff");
  doc.text(L.ml, 27.0, title, 15);
  doc.rect(L.ml, L.mt, L.plot_w(), L.plot_h(), "none", "#333333");

  if (points.rows() == 0) {
    return doc.finish();
  }

  double x_min = points.col(0).minCoeff();
  double x_max = points.col(0).maxCoeff();
  double y_min = points.col(1).minCoeff();
  double y_max = points.col(1).maxCoeff();
  const double x_pad = (x_max > x_min ? x_max - x_min : 1.0) * 0.05;
  const double y_pad = (y_max > y_min ? y_max - y_min : 1.0) * 0.05;
  x_min -= x_pad;
  x_max += x_pad;
  y_min -= y_pad;
  y_max += y_pad;

  auto px = [&](double x) { return L.ml + (x - x_min) / (x_max - x_min) * L.plot_w(); };
  auto py = [&](double y) { return L.mt + (y_max - y) / (y_max - y_min) * L.plot_h(); };

  std::vector<int> episode_ids;
  for (const RowRef& ref : provenance) {
    if (episode_ids.empty() || episode_ids.back() != ref.episode_id) {
      episode_ids.push_back(ref.episode_id);
    }
  }
  const int palette_size = std::min<int>(24, static_cast<int>(episode_ids.size()));
  const std::vector<Rgb> palette = distinct_colors(std::max(palette_size, 1), color_seed);

  // Scatter colored by episode so trajectory structure stays visible.
  Eigen::Index row = 0;
  for (std::size_t e = 0; e < episode_ids.size(); ++e) {
    const std::string color = to_hex(palette[e % palette.size()]);
    while (row < points.rows() &&
           provenance[static_cast<std::size_t>(row)].episode_id == episode_ids[e]) {
      doc.circle(px(points(row, 0)), py(points(row, 1)), 1.6, color);
      ++row;
    }
  }
  return doc.finish();
}

PatchReport patch_eval(const PolicyNetwork& net, const EnvConfig& config, EnvState s0,
                       const std::vector<ActionOverride>& overrides) {
  const Episode baseline = run_episode(net, config, s0);
  const Episode patched = run_episode(net, config, s0, overrides);
  PatchReport report;
  report.s0 = s0;
  report.overrides = overrides;
  report.baseline_return = baseline.total_reward;
  report.patched_return = patched.total_reward;
  report.baseline_len = static_cast<int>(baseline.steps.size());
  report.patched_len = static_cast<int>(patched.steps.size());
  return report;
}

namespace {

PolicyNetwork net_for_stage(const PipelineConfig& config, const char* stage) {
  if (config.weights) {
    return load_weights(*config.weights);
  }
  const std::filesystem::path local = config.output_dir / kWeightsFile;
  if (std::filesystem::exists(local)) {
    return load_weights(local);
  }
  throw StageError(stage, "no weights found; run train-bc first or set 'weights' in the config");
}

TrajectoryDataset dataset_for_stage(const PipelineConfig& config, const char* stage) {
  const std::filesystem::path path = config.output_dir / kDatasetFile;
  if (!std::filesystem::exists(path)) {
    throw StageError(stage, "missing " + path.string() + "; run the rollout stage first");
  }
  return read_dataset_csv(path);
}

struct ReduceOutput {
  Eigen::MatrixXd points;
  int target_dim = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

ReduceOutput reduce_latents(const PipelineConfig& config,
                            const Eigen::MatrixXd& latents) {
  if (latents.rows() == 0) {
    throw std::runtime_error("no terminated episodes provide latent rows to embed");
  }
  int target = config.pacmap.output_dim;
  if (target == 0) {
    const PcaResult p = pca(latents);
    target = choose_target_dim(p.explained_variance_ratio, config.pca_threshold);
  }
  target = std::min<int>(target, static_cast<int>(latents.cols()));

  PacmapConfig pm = config.pacmap;
  pm.output_dim = target;
  PacmapResult result = pacmap_embed(latents, pm);

  ReduceOutput out;
  out.points = std::move(result.embedding);
  out.target_dim = target;
  out.initial_loss = result.initial_loss;
  out.final_loss = result.final_loss;
  return out;
}

struct EpisodeSpan {
  int episode_id = 0;
  int begin = 0;  // row range [begin, end) in the cluster-space matrix
  int end = 0;
};

std::vector<EpisodeSpan> spans_from_provenance(const std::vector<RowRef>& provenance) {
  std::vector<EpisodeSpan> spans;
  for (std::size_t r = 0; r < provenance.size(); ++r) {
    const int ep = provenance[r].episode_id;
    if (spans.empty() || spans.back().episode_id != ep) {
      spans.push_back(EpisodeSpan{ep, static_cast<int>(r), static_cast<int>(r)});
    }
    spans.back().end = static_cast<int>(r) + 1;
  }
  return spans;
}

struct ClusterOutput {
  std::vector<LineSegment> segments;
  TraclusParams params;
  int noise_n = 0;
  EntropyProfile profile;
  NoiseAssignResult noise;
};

ClusterOutput cluster_points(const PipelineConfig& config, const Eigen::MatrixXd& points,
                             const std::vector<EpisodeSpan>& spans) {
  ClusterOutput out;
  for (const EpisodeSpan& span : spans) {
    if (span.end - span.begin < 2) continue;  // single-step episodes have no polyline
    std::vector<Eigen::VectorXd> polyline;
    polyline.reserve(static_cast<std::size_t>(span.end - span.begin));
    for (int r = span.begin; r < span.end; ++r) {
      polyline.push_back(points.row(r).transpose());
    }
    std::vector<LineSegment> segs = partition(polyline, span.episode_id);
    for (LineSegment& seg : segs) {
      out.segments.push_back(std::move(seg));
    }
  }
  if (out.segments.empty()) {
    throw std::runtime_error("no line segments; every episode is shorter than 2 steps");
  }

  if (config.traclus) {
    out.params = *config.traclus;
  } else {
    const DistanceWeights w;
    const std::vector<double> grid = default_epsilon_grid(
        out.segments, w, Rng::derive(config.seed, kEpsilonStream));
    TuneResult tuned = tune_epsilon(out.segments, grid, w);
    out.params.epsilon = tuned.epsilon_star;
    out.params.min_lns = min_lns_heuristic(out.segments, tuned.epsilon_star, w);
    out.params.distance_weights = w;
    out.profile = std::move(tuned.profile);
  }
  out.noise_n = config.noise_n.value_or(out.params.min_lns);

  const ClusterAssignment grouped = group_segments(out.segments, out.params);
  if (grouped.cluster_count == 0) {
    throw std::runtime_error(
        "density grouping produced no clusters (epsilon " +
        std::to_string(out.params.epsilon) + ", min_lns " +
        std::to_string(out.params.min_lns) + "); adjust the traclus parameters");
  }
  out.noise = assign_noise(out.segments, grouped, out.noise_n,
                           out.params.distance_weights);
  return out;
}

AxesSpec state_space_axes(const PipelineConfig& config) {
  AxesSpec axes;
  axes.x_min = std::min(kMinPosition, config.grid.pos_range.lo);
  axes.x_max = std::max(kMaxPosition, config.grid.pos_range.hi);
  axes.y_min = std::min(-kMaxSpeed, config.grid.vel_range.lo);
  axes.y_max = std::max(kMaxSpeed, config.grid.vel_range.hi);
  axes.goal_x = config.env.goal_position;
  axes.title = config.cluster_space == ClusterSpace::ReducedLatent
                   ? "State-space clusters, reduced latent space"
                   : "State-space clusters, raw latent space";
  return axes;
}

json patch_report_json(const PatchReport& report) {
  json j;
  j["s0"] = json::array({report.s0.position, report.s0.velocity});
  json overrides = json::array();
  for (const ActionOverride& o : report.overrides) {
    overrides.push_back(json::array({o.step_index, o.action}));
  }
  j["overrides"] = std::move(overrides);
  j["baseline_return"] = report.baseline_return;
  j["patched_return"] = report.patched_return;
  j["baseline_len"] = report.baseline_len;
  j["patched_len"] = report.patched_len;
  return j;
}

}  // namespace

std::filesystem::path stage_train_bc(const PipelineConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  try {
    const BCResult result = train_bc(config.bc);
    const std::filesystem::path path = config.output_dir / kWeightsFile;
    save_weights(result.net, path);
    return path;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("train-bc", e.what());
  }
}

std::filesystem::path stage_rollout(const PipelineConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  try {
    const PolicyNetwork net = net_for_stage(config, "rollout");
    const std::vector<EnvState> grid = initial_state_grid(
        config.grid.n_pos, config.grid.n_vel, config.grid.pos_range,
        config.grid.vel_range);
    const TrajectoryDataset ds = build_dataset(net, config.env, grid);
    const std::filesystem::path path = config.output_dir / kDatasetFile;
    write_dataset_csv(ds, path);
    return path;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("rollout", e.what());
  }
}

std::filesystem::path stage_reduce(const PipelineConfig& config) {
  config.validate();
  try {
    const TrajectoryDataset ds = dataset_for_stage(config, "reduce");
    const ReduceOutput out = reduce_latents(config, ds.latent_matrix);
    const std::filesystem::path path = config.output_dir / kEmbeddingFile;
    write_embedding_csv(out.points, ds.row_provenance, path);
    return path;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("reduce", e.what());
  }
}

std::vector<std::filesystem::path> stage_sweep_nnb(const PipelineConfig& config) {
  config.validate();
  try {
    const TrajectoryDataset ds = dataset_for_stage(config, "sweep-nnb");
    std::vector<std::filesystem::path> written;
    for (int n_nb : config.sweep_nnb) {
      PacmapConfig pm = config.pacmap;
      pm.n_nb = n_nb;
      pm.output_dim = 2;
      const PacmapResult emb = pacmap_embed(ds.latent_matrix, pm);
      const std::string svg = render_embedding_plot(
          emb.embedding, ds.row_provenance, "2-D embedding, n_nb = " + std::to_string(n_nb),
          Rng::derive(config.seed, kColorStream));
      const std::filesystem::path path =
          config.output_dir / ("sweep_nnb_" + std::to_string(n_nb) + ".svg");
      std::ofstream out(path, std::ios::binary);
      if (!out) {
        throw std::runtime_error("cannot open " + path.string());
      }
      out << svg;
      written.push_back(path);
    }
    return written;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("sweep-nnb", e.what());
  }
}

std::filesystem::path stage_cluster(const PipelineConfig& config) {
  config.validate();
  try {
    Eigen::MatrixXd points;
    std::vector<EpisodeSpan> spans;
    if (config.cluster_space == ClusterSpace::ReducedLatent) {
      const std::filesystem::path emb_path = config.output_dir / kEmbeddingFile;
      if (!std::filesystem::exists(emb_path)) {
        throw std::runtime_error("missing " + emb_path.string() +
                                 "; run the reduce stage first");
      }
      EmbeddingFile emb = read_embedding_csv(emb_path);
      points = std::move(emb.points);
      spans = spans_from_provenance(emb.provenance);
    } else {
      const TrajectoryDataset ds = dataset_for_stage(config, "cluster");
      points = ds.latent_matrix;
      spans = spans_from_provenance(ds.row_provenance);
    }
    const ClusterOutput out = cluster_points(config, points, spans);
    const std::filesystem::path path = config.output_dir / kClustersFile;
    std::ofstream file(path, std::ios::binary);
    if (!file) {
      throw std::runtime_error("cannot open " + path.string());
    }
    file << dump_json(clusters_json(out.params, out.noise_n, out.segments,
                                    out.noise.assignment, out.profile));
    return path;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("cluster", e.what());
  }
}

std::vector<std::filesystem::path> stage_plot(const PipelineConfig& config) {
  config.validate();
  try {
    const TrajectoryDataset ds = dataset_for_stage(config, "plot");
    const std::filesystem::path clusters_path = config.output_dir / kClustersFile;
    if (!std::filesystem::exists(clusters_path)) {
      throw std::runtime_error("missing " + clusters_path.string() +
                               "; run the cluster stage first");
    }
    const ClustersFile clusters = read_clusters_json(clusters_path);
    const std::vector<BackmappedSegment> backmapped =
        backmap_segments(clusters.assignment, clusters.segments, ds);
    const std::vector<int> kept = dedup_episodes(ds, config.dedup_tau);
    const std::vector<Rgb> colors =
        distinct_colors(std::max(1, clusters.assignment.cluster_count),
                        Rng::derive(config.seed, kColorStream));
    const std::vector<std::string> docs =
        render_plot(backmapped, kept, colors, state_space_axes(config),
                    config.plot_split_threshold);

    std::vector<std::filesystem::path> written;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const std::string name =
          docs.size() == 1 ? "clusters.svg"
                           : "clusters_part" + std::to_string(i + 1) + ".svg";
      const std::filesystem::path path = config.output_dir / name;
      std::ofstream out(path, std::ios::binary);
      if (!out) {
        throw std::runtime_error("cannot open " + path.string());
      }
      out << docs[i];
      written.push_back(path);
    }
    return written;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("plot", e.what());
  }
}

std::filesystem::path stage_patch_eval(const PipelineConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  try {
    PolicyNetwork net;
    if (config.weights) {
      net = load_weights(*config.weights);
    } else if (std::filesystem::exists(config.output_dir / kWeightsFile)) {
      net = load_weights(config.output_dir / kWeightsFile);
    } else {
      net = train_bc(config.bc).net;
    }

    json reports = json::array();
    for (const PatchScenario& sc : config.patch_scenarios) {
      reports.push_back(
          patch_report_json(patch_eval(net, config.env, sc.s0, sc.overrides)));
    }
    const std::filesystem::path path = config.output_dir / kPatchFile;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot open " + path.string());
    }
    out << dump_json(reports);
    return path;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("patch-eval", e.what());
  }
}

RunArtifacts run_pipeline(const PipelineConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);

  FileTracker files;
  std::string stage = "setup";
  RunArtifacts artifacts;
  try {
    stage = "train-bc";
    PolicyNetwork net;
    double bc_final_loss = std::numeric_limits<double>::quiet_NaN();
    if (config.weights) {
      net = load_weights(*config.weights);
    } else {
      BCResult bc = train_bc(config.bc);
      net = std::move(bc.net);
      bc_final_loss = bc.final_loss;
    }
    artifacts.weights_path = config.output_dir / kWeightsFile;
    files.note(artifacts.weights_path);
    save_weights(net, artifacts.weights_path);

    stage = "rollout";
    const std::vector<EnvState> grid = initial_state_grid(
        config.grid.n_pos, config.grid.n_vel, config.grid.pos_range,
        config.grid.vel_range);
    const TrajectoryDataset ds = build_dataset(net, config.env, grid);
    artifacts.dataset_path = config.output_dir / kDatasetFile;
    files.note(artifacts.dataset_path);
    write_dataset_csv(ds, artifacts.dataset_path);

    Eigen::MatrixXd points;
    double pacmap_initial = std::numeric_limits<double>::quiet_NaN();
    double pacmap_final = std::numeric_limits<double>::quiet_NaN();
    if (config.cluster_space == ClusterSpace::ReducedLatent) {
      stage = "reduce";
      ReduceOutput reduced = reduce_latents(config, ds.latent_matrix);
      points = std::move(reduced.points);
      artifacts.target_dim = reduced.target_dim;
      pacmap_initial = reduced.initial_loss;
      pacmap_final = reduced.final_loss;
      artifacts.embedding_path = config.output_dir / kEmbeddingFile;
      files.note(*artifacts.embedding_path);
      write_embedding_csv(points, ds.row_provenance, *artifacts.embedding_path);
    } else {
      points = ds.latent_matrix;
      artifacts.target_dim = static_cast<int>(points.cols());
    }

    stage = "cluster";
    const ClusterOutput clusters =
        cluster_points(config, points, spans_from_provenance(ds.row_provenance));
    artifacts.epsilon = clusters.params.epsilon;
    artifacts.min_lns = clusters.params.min_lns;
    artifacts.noise_n = clusters.noise_n;
    artifacts.cluster_count = clusters.noise.assignment.cluster_count;
    artifacts.segment_count = static_cast<int>(clusters.segments.size());
    artifacts.noise_sweeps = clusters.noise.sweeps;
    artifacts.noise_converged = clusters.noise.converged;
    artifacts.clusters_path = config.output_dir / kClustersFile;
    files.write(artifacts.clusters_path,
                dump_json(clusters_json(clusters.params, clusters.noise_n,
                                        clusters.segments, clusters.noise.assignment,
                                        clusters.profile)));

    stage = "backmap";
    const std::vector<BackmappedSegment> backmapped =
        backmap_segments(clusters.noise.assignment, clusters.segments, ds);

    stage = "plot";
    const std::vector<int> kept = dedup_episodes(ds, config.dedup_tau);
    artifacts.kept_episodes = static_cast<int>(kept.size());
    const std::vector<Rgb> colors =
        distinct_colors(std::max(1, artifacts.cluster_count),
                        Rng::derive(config.seed, kColorStream));
    const std::vector<std::string> docs =
        render_plot(backmapped, kept, colors, state_space_axes(config),
                    config.plot_split_threshold);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const std::string name =
          docs.size() == 1 ? "clusters.svg"
                           : "clusters_part" + std::to_string(i + 1) + ".svg";
      const std::filesystem::path path = config.output_dir / name;
      files.write(path, docs[i]);
      artifacts.plot_paths.push_back(path);
    }

    stage = "manifest";
    json manifest = config_json(config);
    json derived;
    derived["target_dim"] = artifacts.target_dim;
    derived["epsilon"] = artifacts.epsilon;
    derived["min_lns"] = artifacts.min_lns;
    derived["noise_n"] = artifacts.noise_n;
    manifest["derived_params"] = std::move(derived);
    json results;
    results["cluster_count"] = artifacts.cluster_count;
    results["segment_count"] = artifacts.segment_count;
    results["latent_rows"] = ds.latent_matrix.rows();
    int terminated = 0;
    for (const Episode& ep : ds.episodes) {
      terminated += ep.terminated ? 1 : 0;
    }
    results["terminated_episodes"] = terminated;
    results["kept_episodes"] = artifacts.kept_episodes;
    results["noise_sweeps"] = artifacts.noise_sweeps;
    results["noise_changed_sweeps"] = clusters.noise.changed_sweeps;
    results["noise_converged"] = artifacts.noise_converged;
    if (std::isfinite(bc_final_loss)) {
      results["bc_final_loss"] = bc_final_loss;
    } else {
      results["bc_final_loss"] = nullptr;
    }
    if (std::isfinite(pacmap_initial)) {
      results["pacmap_initial_loss"] = pacmap_initial;
      results["pacmap_final_loss"] = pacmap_final;
    }
    manifest["results"] = std::move(results);
    artifacts.manifest_path = config.output_dir / kManifestFile;
    files.write(artifacts.manifest_path, dump_json(manifest));

    return artifacts;
  } catch (const std::exception& e) {
    files.rollback();
    throw StageError(stage, e.what());
  }
}

}  // namespace lmc

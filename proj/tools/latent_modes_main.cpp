#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lmc/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Pipeline config JSON")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "Master seed override");
  cmd->add_option("--out", opts.out, "Output directory override");
}

lmc::PipelineConfig resolve_config(const CommonOpts& opts) {
  std::optional<std::filesystem::path> out;
  if (opts.out) out = std::filesystem::path(*opts.out);
  if (opts.config_path.empty()) {
    // All defaults; overrides still apply.
    lmc::PipelineConfig config = lmc::parse_config("{}", opts.seed, out);
    return config;
  }
  return lmc::load_config(opts.config_path, opts.seed, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral-mode discovery for a Mountain Car policy: latent-space "
               "rollouts, PaCMAP reduction, trajectory clustering, state-space plots"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* train = app.add_subcommand("train-bc", "Train the behavior-cloned policy");
  CLI::App* rollout = app.add_subcommand("rollout", "Roll out the policy from the start grid");
  CLI::App* reduce = app.add_subcommand("reduce", "Embed the latent matrix with PaCMAP");
  CLI::App* sweep = app.add_subcommand("sweep-nnb", "2-D embeddings for several n_nb values");
  CLI::App* cluster = app.add_subcommand("cluster", "Partition and cluster sub-trajectories");
  CLI::App* plot = app.add_subcommand("plot", "Render state-space cluster plots");
  CLI::App* patch = app.add_subcommand("patch-eval", "Compare forced-action rollouts");
  CLI::App* runall = app.add_subcommand("run-all", "Run the whole pipeline");
  for (CLI::App* cmd : {train, rollout, reduce, sweep, cluster, plot, patch, runall}) {
    add_common(cmd, opts);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // command-line mistakes are configuration errors
  }

  try {
    const lmc::PipelineConfig config = resolve_config(opts);

    if (train->parsed()) {
      const auto path = lmc::stage_train_bc(config);
      std::cout << "wrote " << path.string() << "\n";
    } else if (rollout->parsed()) {
      const auto path = lmc::stage_rollout(config);
      std::cout << "wrote " << path.string() << "\n";
    } else if (reduce->parsed()) {
      const auto path = lmc::stage_reduce(config);
      std::cout << "wrote " << path.string() << "\n";
    } else if (sweep->parsed()) {
      for (const auto& path : lmc::stage_sweep_nnb(config)) {
        std::cout << "wrote " << path.string() << "\n";
      }
    } else if (cluster->parsed()) {
      const auto path = lmc::stage_cluster(config);
      std::cout << "wrote " << path.string() << "\n";
    } else if (plot->parsed()) {
      for (const auto& path : lmc::stage_plot(config)) {
        std::cout << "wrote " << path.string() << "\n";
      }
    } else if (patch->parsed()) {
      const auto path = lmc::stage_patch_eval(config);
      std::cout << "wrote " << path.string() << "\n";
    } else if (runall->parsed()) {
      const lmc::RunArtifacts artifacts = lmc::run_pipeline(config);
      std::cout << "target_dim=" << artifacts.target_dim
                << " epsilon=" << artifacts.epsilon << " min_lns=" << artifacts.min_lns
                << " noise_n=" << artifacts.noise_n
                << " clusters=" << artifacts.cluster_count
                << " segments=" << artifacts.segment_count << "\n";
      std::cout << "wrote " << artifacts.manifest_path.string() << "\n";
    }
  } catch (const lmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lmc::StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

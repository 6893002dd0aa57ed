#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lmc/rollout.hpp"

namespace lmc {

// Round-trip-exact decimal formatting, locale independent both ways.
std::string format_double(double v);
double parse_double(std::string_view s);

// One row per step: episode_id, step_index, position, velocity, action,
// reward, latent_0..latent_{D-1}. Every episode is written, truncated ones
// included; a terminated episode is recognizable by its final reward of 100.
void write_dataset_csv(const TrajectoryDataset& dataset,
                       const std::filesystem::path& path);
TrajectoryDataset read_dataset_csv(const std::filesystem::path& path,
                                   bool include_truncated = false);

// row, episode_id, step_index, e_0..e_{d-1}; rows aligned with the dataset's
// latent matrix.
void write_embedding_csv(const Eigen::MatrixXd& points,
                         const std::vector<RowRef>& provenance,
                         const std::filesystem::path& path);

struct EmbeddingFile {
  Eigen::MatrixXd points;
  std::vector<RowRef> provenance;
};
EmbeddingFile read_embedding_csv(const std::filesystem::path& path);

}  // namespace lmc

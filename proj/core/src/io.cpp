#include "lmc/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lmc {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

double parse_double(std::string_view s) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("parse_double: invalid number '" + std::string(s) + "'");
  }
  return value;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

long parse_int(std::string_view s, const char* what) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error(std::string("dataset csv: invalid ") + what + " '" +
                             std::string(s) + "'");
  }
  return value;
}

}  // namespace

void write_dataset_csv(const TrajectoryDataset& dataset,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_dataset_csv: cannot open " + path.string());
  }

  int latent_dim = 0;
  for (const Episode& ep : dataset.episodes) {
    if (!ep.steps.empty()) {
      latent_dim = static_cast<int>(ep.steps.front().latent.size());
      break;
    }
  }

  out << "episode_id,step_index,position,velocity,action,reward";
  for (int k = 0; k < latent_dim; ++k) {
    out << ",latent_" << k;
  }
  out << '\n';

  for (const Episode& ep : dataset.episodes) {
    for (const StepRecord& rec : ep.steps) {
      out << ep.episode_id << ',' << rec.step_index << ','
          << format_double(rec.state.position) << ','
          << format_double(rec.state.velocity) << ',' << format_double(rec.action)
          << ',' << format_double(rec.reward);
      for (Eigen::Index k = 0; k < rec.latent.size(); ++k) {
        out << ',' << format_double(rec.latent(k));
      }
      out << '\n';
    }
  }
  if (!out) {
    throw std::runtime_error("write_dataset_csv: write failed for " + path.string());
  }
}

TrajectoryDataset read_dataset_csv(const std::filesystem::path& path,
                                   bool include_truncated) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_dataset_csv: cannot open " + path.string());
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("read_dataset_csv: empty file " + path.string());
  }
  const std::vector<std::string_view> header = split_csv(line);
  const std::vector<std::string> expected = {"episode_id", "step_index", "position",
                                             "velocity",   "action",     "reward"};
  if (header.size() < expected.size()) {
    throw std::runtime_error("read_dataset_csv: malformed header");
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (header[k] != expected[k]) {
      throw std::runtime_error("read_dataset_csv: expected column '" + expected[k] +
                               "', got '" + std::string(header[k]) + "'");
    }
  }
  const int latent_dim = static_cast<int>(header.size() - expected.size());
  for (int k = 0; k < latent_dim; ++k) {
    const std::string want = "latent_" + std::to_string(k);
    if (header[expected.size() + static_cast<std::size_t>(k)] != want) {
      throw std::runtime_error("read_dataset_csv: expected column '" + want + "'");
    }
  }

  TrajectoryDataset ds;
  Episode* current = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string_view> fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("read_dataset_csv: row with " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    const int episode_id = static_cast<int>(parse_int(fields[0], "episode_id"));
    StepRecord rec;
    rec.step_index = static_cast<int>(parse_int(fields[1], "step_index"));
    rec.state.position = parse_double(fields[2]);
    rec.state.velocity = parse_double(fields[3]);
    rec.action = parse_double(fields[4]);
    rec.reward = parse_double(fields[5]);
    rec.latent.resize(latent_dim);
    for (int k = 0; k < latent_dim; ++k) {
      rec.latent(k) = parse_double(fields[6 + static_cast<std::size_t>(k)]);
    }

    if (current == nullptr || current->episode_id != episode_id) {
      ds.episodes.push_back(Episode{});
      current = &ds.episodes.back();
      current->episode_id = episode_id;
    }
    if (rec.step_index != static_cast<int>(current->steps.size())) {
      throw std::runtime_error("read_dataset_csv: episode " +
                               std::to_string(episode_id) +
                               " has non-consecutive step indices");
    }
    current->total_reward += rec.reward;
    current->steps.push_back(std::move(rec));
  }

  Eigen::Index rows = 0;
  for (Episode& ep : ds.episodes) {
    if (ep.steps.empty()) {
      throw std::runtime_error("read_dataset_csv: empty episode");
    }
    ep.terminated = ep.steps.back().reward == 100.0;
    ep.truncated = !ep.terminated;
    if (ep.terminated || include_truncated) {
      rows += static_cast<Eigen::Index>(ep.steps.size());
    }
  }

  ds.latent_matrix.resize(rows, latent_dim);
  ds.row_provenance.reserve(static_cast<std::size_t>(rows));
  ds.episode_row_span.assign(ds.episodes.size(), {-1, -1});
  Eigen::Index r = 0;
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    const Episode& ep = ds.episodes[e];
    if (!ep.terminated && !include_truncated) continue;
    const int begin = static_cast<int>(r);
    for (const StepRecord& rec : ep.steps) {
      ds.latent_matrix.row(r) = rec.latent.transpose();
      ds.row_provenance.push_back(RowRef{ep.episode_id, rec.step_index});
      ++r;
    }
    ds.episode_row_span[e] = {begin, static_cast<int>(r)};
  }
  return ds;
}

void write_embedding_csv(const Eigen::MatrixXd& points,
                         const std::vector<RowRef>& provenance,
                         const std::filesystem::path& path) {
  if (static_cast<std::size_t>(points.rows()) != provenance.size()) {
    throw std::invalid_argument("write_embedding_csv: provenance size mismatch");
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_embedding_csv: cannot open " + path.string());
  }
  out << "row,episode_id,step_index";
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    out << ",e_" << k;
  }
  out << '\n';
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const RowRef& ref = provenance[static_cast<std::size_t>(r)];
    out << r << ',' << ref.episode_id << ',' << ref.step_index;
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      out << ',' << format_double(points(r, k));
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("write_embedding_csv: write failed for " + path.string());
  }
}

EmbeddingFile read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_embedding_csv: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("read_embedding_csv: empty file " + path.string());
  }
  const std::vector<std::string_view> header = split_csv(line);
  if (header.size() < 4 || header[0] != "row" || header[1] != "episode_id" ||
      header[2] != "step_index") {
    throw std::runtime_error("read_embedding_csv: malformed header");
  }
  const int dim = static_cast<int>(header.size() - 3);

  std::vector<RowRef> provenance;
  std::vector<double> values;
  long expected_row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string_view> fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("read_embedding_csv: malformed row");
    }
    if (parse_int(fields[0], "row") != expected_row) {
      throw std::runtime_error("read_embedding_csv: non-consecutive row indices");
    }
    ++expected_row;
    provenance.push_back(RowRef{static_cast<int>(parse_int(fields[1], "episode_id")),
                                static_cast<int>(parse_int(fields[2], "step_index"))});
    for (int k = 0; k < dim; ++k) {
      values.push_back(parse_double(fields[3 + static_cast<std::size_t>(k)]));
    }
  }

  EmbeddingFile file;
  file.provenance = std::move(provenance);
  file.points.resize(static_cast<Eigen::Index>(file.provenance.size()), dim);
  for (Eigen::Index r = 0; r < file.points.rows(); ++r) {
    for (int k = 0; k < dim; ++k) {
      file.points(r, k) =
          values[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim) +
                 static_cast<std::size_t>(k)];
    }
  }
  return file;
}

}  // namespace lmc

#include "lmc/colors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "lmc/rng.hpp"

namespace lmc {

namespace {

constexpr int kPoolDraws = 2048;
constexpr double kWhiteExclusion = 0.15;

double dist(const Rgb& a, const Rgb& b) {
  const double dr = a[0] - b[0];
  const double dg = a[1] - b[1];
  const double db = a[2] - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

}  // namespace

std::vector<Rgb> color_candidate_pool(std::uint64_t seed) {
  Rng rng(seed);
  const Rgb white{1.0, 1.0, 1.0};
  std::vector<Rgb> pool;
  pool.reserve(kPoolDraws);
  for (int i = 0; i < kPoolDraws; ++i) {
    const Rgb c{rng.uniform(), rng.uniform(), rng.uniform()};
    if (dist(c, white) > kWhiteExclusion) {
      pool.push_back(c);
    }
  }
  return pool;
}

std::vector<Rgb> distinct_colors(int k, std::uint64_t seed) {
  if (k < 1) {
    throw std::invalid_argument("distinct_colors: k must be >= 1");
  }
  const std::vector<Rgb> pool = color_candidate_pool(seed);
  if (k > static_cast<int>(pool.size())) {
    throw std::invalid_argument("distinct_colors: k exceeds candidate pool size");
  }
  const Rgb white{1.0, 1.0, 1.0};

  // min distance of each candidate to the chosen set (white included).
  std::vector<double> min_dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    min_dist[i] = dist(pool[i], white);
  }
  std::vector<bool> used(pool.size(), false);

  std::vector<Rgb> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  for (int step = 0; step < k; ++step) {
    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used[i]) continue;
      if (min_dist[i] > best) {
        best = min_dist[i];
        best_idx = i;
      }
    }
    used[best_idx] = true;
    chosen.push_back(pool[best_idx]);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!used[i]) {
        min_dist[i] = std::min(min_dist[i], dist(pool[i], pool[best_idx]));
      }
    }
  }
  return chosen;
}

std::string to_hex(const Rgb& rgb) {
  auto channel = [](double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<int>(std::lround(clamped * 255.0));
  };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", channel(rgb[0]), channel(rgb[1]),
                channel(rgb[2]));
  return std::string(buf);
}

}  // namespace lmc

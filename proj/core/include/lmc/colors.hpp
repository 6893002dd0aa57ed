#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace lmc {

using Rgb = std::array<double, 3>;  // components in [0, 1]

// Seeded random RGB pool with everything within 0.15 of white removed
// (white is the plot background).
std::vector<Rgb> color_candidate_pool(std::uint64_t seed);

// Greedy farthest-point selection over the candidate pool, with white as a
// permanent reference so early picks stay far from the background.
std::vector<Rgb> distinct_colors(int k, std::uint64_t seed);

std::string to_hex(const Rgb& rgb);

}  // namespace lmc

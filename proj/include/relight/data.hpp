#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "relight/core.hpp"
#include "relight/detail/random.hpp"
#include "relight/io.hpp"

namespace relight::data {

/// Configuration-level split fractions for train / validation / test.
using SplitRatios = std::array<double, 3>;

/// 59 / 3 / 10 of 72 configurations.
inline constexpr SplitRatios kRsrRatios{59.0 / 72.0, 3.0 / 72.0, 10.0 / 72.0};
inline constexpr SplitRatios kIsrRatios{0.85, 0.05, 0.10};

struct Splits {
  io::Manifest train;
  io::Manifest validation;
  io::Manifest test;
};

/// Number of configurations assigned to each split: floor of n * ratio, with
/// the remainder handed to the largest fractional parts (earlier split wins
/// ties). Throws std::invalid_argument if the ratios are negative or do not
/// sum to 1, or if there are fewer configurations than non-empty splits.
std::array<std::size_t, 3> split_counts(std::size_t configurations,
                                        const SplitRatios& ratios);

/// Partitions whole configurations (never individual scenes) after a seeded
/// shuffle of the sorted configuration ids.
Splits split_by_configuration(const io::Manifest& manifest,
                              const SplitRatios& ratios, std::uint64_t seed);

/// Uniform over ordered pairs of distinct captures. Throws
/// std::invalid_argument for scenes with fewer than two captures.
RelightSample sample_pair(const SceneRecord& scene, detail::Rng& rng);

/// Ordered pair (input, target) by capture index.
RelightSample make_pair(const SceneRecord& scene, std::size_t input,
                        std::size_t target);

/// Row-major enumeration of every (input, target) pair with input != target.
std::vector<std::array<std::size_t, 2>> ordered_pairs(std::size_t captures);

}  // namespace relight::data

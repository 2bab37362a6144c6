#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relight/core.hpp"

namespace relight::color {

/// Linear-sRGB color of a blackbody at `kelvin`, clipped to [0,1] and scaled
/// so that the largest channel equals 1. Throws std::out_of_range outside
/// [1667, 25000] K.
Rgb planckian_rgb(double kelvin);

/// CIE 1931 xy chromaticity of the Planckian locus (cubic fits, 1667-25000 K).
std::array<double, 2> planckian_xy(double kelvin);

/// XYZ (Y = 1 scale) to linear sRGB, D65 white.
Rgb xyz_to_linear_srgb(const std::array<double, 3>& xyz);

/// Opponent transform constants: O1 = (R-G)/sqrt2, O2 = (R+G-2B)/sqrt6,
/// O3 = (R+G+B)/sqrt3.
struct OpponentWeights {
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  static constexpr double kInvSqrt6 = 0.40824829046386301637;
  static constexpr double kInvSqrt3 = 0.57735026918962576451;
};

std::array<double, 3> rgb_to_opponent(const Rgb& rgb);

/// Per-pixel opponent transform. The result carries MapKind::shading since
/// O1 and O2 may be negative.
ImageMap rgb_to_opponent(const ImageMap& img);

enum class ChannelSet { chroma, all };

/// Mean over pixels and selected channels of (|dx| + |dy|) / 2, forward
/// differences with a backward difference on the last row/column.
///
/// `channels` selects the first two channels (chroma) or all three.
double gradient_magnitude(const ImageMap& map, ChannelSet channels);

/// Same operator on a single-channel plane, used by tests and tools.
double gradient_magnitude(std::span<const double> plane, int height,
                          int width);

struct GradientRow {
  double chroma = 0.0;
  double all = 0.0;
};

struct GradientStats {
  GradientRow image;
  GradientRow reflectance;
  GradientRow shading;
  GradientRow shading_over_reflectance;
  GradientRow shading_over_image;
  std::size_t samples = 0;
};

struct IntrinsicTriplet {
  const ImageMap* image = nullptr;
  const ImageMap* reflectance = nullptr;
  const ImageMap* shading = nullptr;
};

/// Pulls the next triplet; returns std::nullopt when the dataset is exhausted.
using TripletSource = std::function<std::optional<IntrinsicTriplet>()>;

/// Aggregates opponent-space gradient magnitudes over every triplet. Ratio
/// rows are ratios of the dataset means. Throws std::invalid_argument on an
/// empty dataset or a triplet missing a component.
GradientStats chromaticity_stats(const TripletSource& source);

GradientStats chromaticity_stats(std::span<const SceneRecord> scenes);

/// Aligned text grid matching the layout of the opponent-space statistics
/// table, followed by one `row,<name>,<chroma>,<all>` line per row.
std::string format_stats(const GradientStats& stats);

}  // namespace relight::color

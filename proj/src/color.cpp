#include "relight/color.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "relight/detail/summation.hpp"

namespace relight::color {

std::array<double, 2> planckian_xy(double kelvin) {
  if (!(kelvin >= kMinTemperature && kelvin <= kMaxTemperature)) {
    throw std::out_of_range("planckian_xy: temperature " +
                            std::to_string(kelvin) +
                            " K outside [1667, 25000] K");
  }
  const double t = kelvin;
  const double t2 = t * t;
  const double t3 = t2 * t;
  double x = 0.0;
  if (t <= 4000.0) {
    x = -0.2661239e9 / t3 - 0.2343589e6 / t2 + 0.8776956e3 / t + 0.179910;
  } else {
    x = -3.0258469e9 / t3 + 2.1070379e6 / t2 + 0.2226347e3 / t + 0.240390;
  }
  const double x2 = x * x;
  const double x3 = x2 * x;
  double y = 0.0;
  if (t <= 2222.0) {
    y = -1.1063814 * x3 - 1.34811020 * x2 + 2.18555832 * x - 0.20219683;
  } else if (t <= 4000.0) {
    y = -0.9549476 * x3 - 1.37418593 * x2 + 2.09137015 * x - 0.16748867;
  } else {
    y = 3.0817580 * x3 - 5.87338670 * x2 + 3.75112997 * x - 0.37001483;
  }
  return {x, y};
}

Rgb xyz_to_linear_srgb(const std::array<double, 3>& xyz) {
  const auto [X, Y, Z] = xyz;
  return {3.2404542 * X - 1.5371385 * Y - 0.4985314 * Z,
          -0.9692660 * X + 1.8760108 * Y + 0.0415560 * Z,
          0.0556434 * X - 0.2040259 * Y + 1.0572252 * Z};
}

Rgb planckian_rgb(double kelvin) {
  const auto [x, y] = planckian_xy(kelvin);
  Rgb rgb = xyz_to_linear_srgb({x / y, 1.0, (1.0 - x - y) / y});
  // Negative (out-of-gamut) channels clip to 0; the peak rescale then puts
  // every channel in [0,1].
  for (double& c : rgb) c = std::max(c, 0.0);
  const double peak = std::max({rgb[0], rgb[1], rgb[2]});
  for (double& c : rgb) c /= peak;
  return rgb;
}

std::array<double, 3> rgb_to_opponent(const Rgb& rgb) {
  const auto [r, g, b] = rgb;
  return {(r - g) * OpponentWeights::kInvSqrt2,
          (r + g - 2.0 * b) * OpponentWeights::kInvSqrt6,
          (r + g + b) * OpponentWeights::kInvSqrt3};
}

ImageMap rgb_to_opponent(const ImageMap& img) {
  ImageMap out(img.height(), img.width(), MapKind::shading);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const auto o = rgb_to_opponent(Rgb{src[i], src[i + 1], src[i + 2]});
    dst[i] = static_cast<float>(o[0]);
    dst[i + 1] = static_cast<float>(o[1]);
    dst[i + 2] = static_cast<float>(o[2]);
  }
  return out;
}

namespace {

// Sum over one plane of (|dx| + |dy|) / 2; `value(y, x)` reads the plane.
template <typename Reader>
double plane_gradient_sum(int height, int width, Reader value) {
  if (height < 2 || width < 2) {
    throw std::invalid_argument("gradient_magnitude: need at least 2x2");
  }
  detail::CompensatedSum sum;
  for (int y = 0; y < height; ++y) {
    const int y0 = y + 1 < height ? y : y - 1;
    for (int x = 0; x < width; ++x) {
      const int x0 = x + 1 < width ? x : x - 1;
      const double dx = value(y, x0 + 1) - value(y, x0);
      const double dy = value(y0 + 1, x) - value(y0, x);
      sum.add(0.5 * (std::abs(dx) + std::abs(dy)));
    }
  }
  return sum.value();
}

}  // namespace

double gradient_magnitude(std::span<const double> plane, int height,
                          int width) {
  if (plane.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("gradient_magnitude: plane size mismatch");
  }
  const double total = plane_gradient_sum(height, width, [&](int y, int x) {
    return plane[static_cast<std::size_t>(y) * width + x];
  });
  return total / (static_cast<double>(height) * width);
}

double gradient_magnitude(const ImageMap& map, ChannelSet channels) {
  const int count = channels == ChannelSet::chroma ? 2 : 3;
  detail::CompensatedSum sum;
  for (int c = 0; c < count; ++c) {
    sum.add(plane_gradient_sum(map.height(), map.width(), [&](int y, int x) {
      return static_cast<double>(map.at(y, x, c));
    }));
  }
  return sum.value() /
         (static_cast<double>(map.height()) * map.width() * count);
}

GradientStats chromaticity_stats(const TripletSource& source) {
  detail::CompensatedSum sums[3][2];
  std::size_t n = 0;
  while (auto triplet = source()) {
    const ImageMap* maps[3] = {triplet->image, triplet->reflectance,
                               triplet->shading};
    for (int m = 0; m < 3; ++m) {
      if (maps[m] == nullptr) {
        throw std::invalid_argument(
            "chromaticity_stats: every sample needs image, reflectance and "
            "shading");
      }
      const ImageMap opp = rgb_to_opponent(*maps[m]);
      sums[m][0].add(gradient_magnitude(opp, ChannelSet::chroma));
      sums[m][1].add(gradient_magnitude(opp, ChannelSet::all));
    }
    ++n;
  }
  if (n == 0) {
    throw std::invalid_argument("chromaticity_stats: empty dataset");
  }
  const double inv = 1.0 / static_cast<double>(n);
  auto row = [&](int m) {
    return GradientRow{sums[m][0].value() * inv, sums[m][1].value() * inv};
  };
  auto ratio = [](double num, double den) {
    return den > 0.0 ? num / den : 0.0;
  };
  GradientStats stats;
  stats.image = row(0);
  stats.reflectance = row(1);
  stats.shading = row(2);
  stats.shading_over_reflectance = {
      ratio(stats.shading.chroma, stats.reflectance.chroma),
      ratio(stats.shading.all, stats.reflectance.all)};
  stats.shading_over_image = {ratio(stats.shading.chroma, stats.image.chroma),
                              ratio(stats.shading.all, stats.image.all)};
  stats.samples = n;
  return stats;
}

GradientStats chromaticity_stats(std::span<const SceneRecord> scenes) {
  std::size_t scene = 0;
  std::size_t capture = 0;
  return chromaticity_stats([&]() -> std::optional<IntrinsicTriplet> {
    while (scene < scenes.size() && capture >= scenes[scene].captures.size()) {
      ++scene;
      capture = 0;
    }
    if (scene >= scenes.size()) return std::nullopt;
    const Capture& cap = scenes[scene].captures[capture++];
    return IntrinsicTriplet{&cap.image,
                            cap.reflectance ? &*cap.reflectance : nullptr,
                            cap.shading ? &*cap.shading : nullptr};
  });
}

std::string format_stats(const GradientStats& stats) {
  struct Named {
    const char* label;
    const char* key;
    GradientRow row;
  };
  const Named rows[] = {
      {"|grad I|", "grad_image", stats.image},
      {"|grad R|", "grad_reflectance", stats.reflectance},
      {"|grad S|", "grad_shading", stats.shading},
      {"|grad S|/|grad R|", "shading_over_reflectance",
       stats.shading_over_reflectance},
      {"|grad S|/|grad I|", "shading_over_image", stats.shading_over_image},
  };
  std::ostringstream os;
  os << "# opponent space: O1=(R-G)/sqrt(2) O2=(R+G-2B)/sqrt(6) "
        "O3=(R+G+B)/sqrt(3); gradient=(|dx|+|dy|)/2 forward differences\n";
  os << "# samples: " << stats.samples << "\n";
  os << std::left << std::setw(20) << "" << std::right << std::setw(14)
     << "Chromaticity" << std::setw(14) << "All channels" << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(20) << r.label << std::right << std::setw(14)
       << r.row.chroma << std::setw(14) << r.row.all << "\n";
  }
  os << std::defaultfloat << std::setprecision(17);
  for (const auto& r : rows) {
    os << "row," << r.key << "," << r.row.chroma << "," << r.row.all << "\n";
  }
  return os.str();
}

}  // namespace relight::color

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace relight {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kHalfPi = 0.5 * kPi;

inline constexpr double kMinTemperature = 1667.0;
inline constexpr double kMaxTemperature = 25000.0;

/// Tolerance for |image - clip(reflectance * shading)| on float-stored maps.
inline constexpr double kIntrinsicTolerance = 1e-5;

enum class MapKind : std::uint8_t { image = 0, reflectance = 1, shading = 2 };

std::string to_string(MapKind kind);

using Rgb = std::array<double, 3>;

/// Dense H x W x 3 map, stored row-major with interleaved channels.
///
/// Construction only checks that the buffer matches the declared shape;
/// value ranges are reported by validate().
class ImageMap {
 public:
  ImageMap() = default;
  ImageMap(int height, int width, MapKind kind);
  ImageMap(int height, int width, MapKind kind, std::vector<float> data);

  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] static constexpr int channels() noexcept { return 3; }
  [[nodiscard]] MapKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] float at(int y, int x, int c) const {
    return data_[index(y, x, c)];
  }
  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::span<float> data() noexcept { return data_; }

  [[nodiscard]] bool same_shape(const ImageMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Same pixels reinterpreted under another kind.
  [[nodiscard]] ImageMap with_kind(MapKind kind) const;

  friend bool operator==(const ImageMap&, const ImageMap&) = default;

 private:
  [[nodiscard]] std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               3 +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  MapKind kind_ = MapKind::image;
  std::vector<float> data_;
};

/// clip(reflectance * shading, 0, 1), evaluated in float.
ImageMap compose(const ImageMap& reflectance, const ImageMap& shading);

/// Largest absolute per-element difference; maps must share a shape.
double max_abs_difference(const ImageMap& a, const ImageMap& b);

enum class LightVariant : std::uint8_t { vector = 0, probe = 1 };

struct ProbePair {
  ImageMap chrome;
  ImageMap gray;
  friend bool operator==(const ProbePair&, const ProbePair&) = default;
};

/// Explicit light description. Factory functions normalize angles; the
/// aggregate itself stays a plain value so validate() can inspect anything.
struct LightCondition {
  LightVariant variant = LightVariant::vector;
  double pan = 0.0;   // radians, [0, 2pi)
  double tilt = 0.0;  // radians above the horizon, [0, pi/2]
  Rgb color{1.0, 1.0, 1.0};
  std::optional<double> temperature;
  std::optional<ProbePair> probe;

  /// Pan wraps modulo 2pi and tilt clamps to [0, pi/2]. Color is taken from
  /// the Planckian locus; throws std::out_of_range for temperatures outside
  /// [1667, 25000] K.
  static LightCondition from_temperature(double pan, double tilt,
                                         double kelvin);
  /// Color is rescaled so that its largest channel is 1.
  static LightCondition from_rgb(double pan, double tilt, Rgb color);
  static LightCondition from_probe(ProbePair probe);

  friend bool operator==(const LightCondition&,
                         const LightCondition&) = default;
};

double wrap_pan(double pan);
double clamp_tilt(double tilt);

/// Network-facing light code: (sin pan, cos pan, sin tilt, cos tilt, r, g, b).
inline constexpr int kLightEncodingSize = 7;
using LightEncoding = std::array<double, kLightEncodingSize>;

LightEncoding encode_light(const LightCondition& light);

/// Unit direction toward the light, z up.
std::array<double, 3> light_direction(double pan, double tilt);

struct Capture {
  LightCondition light;
  ImageMap image;
  std::optional<ImageMap> reflectance;
  std::optional<ImageMap> shading;
};

struct SceneRecord {
  std::string scene_id;
  std::int64_t configuration_id = 0;
  std::uint64_t geometry_seed = 0;
  std::vector<Capture> captures;
};

struct RelightSample {
  ImageMap input_image;
  LightCondition original_light;
  LightCondition target_light;
  ImageMap target_image;
  std::optional<ImageMap> gt_reflectance;
  std::optional<ImageMap> gt_shading_ori;
  std::optional<ImageMap> gt_shading_new;
};

/// Input and target swapped, original and target lights swapped, shadings
/// swapped, reflectance shared.
RelightSample reverse(const RelightSample& sample);

struct Violation {
  std::string field;
  std::string rule;
  friend bool operator==(const Violation&, const Violation&) = default;
};

std::vector<Violation> validate(const ImageMap& map, const std::string& field);
std::vector<Violation> validate(const LightCondition& light,
                                const std::string& field);
std::vector<Violation> validate(const SceneRecord& record);
std::vector<Violation> validate(const RelightSample& sample);

std::string describe(const std::vector<Violation>& violations);

}  // namespace relight

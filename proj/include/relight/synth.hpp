#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relight/core.hpp"

namespace relight::synth {

using Vec3 = std::array<double, 3>;

enum class Shape : std::uint8_t { sphere = 0, box = 1 };

enum class TextureKind : std::uint8_t { solid = 0, checker = 1, stripes = 2, noise = 3 };

/// Procedural albedo: solid `primary`, or a pattern blending `primary` and
/// `secondary` evaluated in world coordinates.
struct Material {
  TextureKind texture = TextureKind::solid;
  Rgb primary{0.5, 0.5, 0.5};
  Rgb secondary{0.5, 0.5, 0.5};
  double frequency = 1.0;  // pattern cycles per unit length
  std::uint64_t noise_seed = 0;

  [[nodiscard]] Rgb albedo(const Vec3& p) const;
  friend bool operator==(const Material&, const Material&) = default;
};

/// Objects rest on the floor (z = 0). Spheres use extent[0] as radius; boxes
/// are axis-aligned with half extents.
struct SceneObject {
  Shape shape = Shape::sphere;
  Vec3 position{0.0, 0.0, 0.0};  // center
  Vec3 extent{0.1, 0.1, 0.1};
  Material material;

  /// Radius of the footprint circle used for the overlap test.
  [[nodiscard]] double footprint_radius() const;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
  Material floor;
  double ambient = 0.05;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

inline constexpr int kMinObjects = 3;
inline constexpr int kMaxObjects = 10;
inline constexpr double kMinAmbient = 0.02;
inline constexpr double kMaxAmbient = 0.1;

/// Directional light from (pan, tilt). `radius` is kept as metadata only.
struct LightSpec {
  double pan = 0.0;
  double tilt = kHalfPi / 2.0;
  double radius = 3.0;
  double temperature = 6500.0;

  [[nodiscard]] LightCondition condition() const;
};

struct LightSampling {
  double tilt_min = 0.2617993877991494;  // 15 degrees
  double tilt_max = 1.3962634015954636;  // 80 degrees
  double radius_min = 2.0;
  double radius_max = 4.0;
  double temperature_min = 2500.0;
  double temperature_max = 10000.0;
};

/// Fixed pinhole camera looking at the origin.
struct CameraSpec {
  double elevation = 0.9599310885968813;  // 55 degrees
  double azimuth = -kHalfPi;              // camera sits on the -y side
  double distance = 3.2;
  double vertical_fov = 0.6981317007977318;  // 40 degrees
};

/// Violations of the SceneSpec invariants (object count, overlap, albedo and
/// ambient ranges); empty when the spec is valid.
std::vector<std::string> check_scene(const SceneSpec& spec);

/// Deterministic in `seed`. Throws std::runtime_error if non-overlapping
/// placement fails within the retry budget.
SceneSpec sample_scene(std::uint64_t seed);

/// Light with sin(tilt) uniform in the configured band (uniform on the
/// spherical zone), pan uniform, temperature uniform.
LightSpec sample_light(std::uint64_t seed, const LightSampling& sampling = {});

/// Per-pixel geometry of the first visible surface.
struct GBuffer {
  int resolution = 0;
  std::vector<Vec3> position;
  std::vector<Vec3> normal;
  std::vector<std::uint8_t> is_floor;
  std::vector<std::uint8_t> visible;  // 1 if unoccluded toward the light
  std::vector<double> lambert;        // max(0, n . l)
};

struct RenderResult {
  ImageMap image;
  ImageMap reflectance;
  ImageMap shading;  // unclipped
  GBuffer gbuffer;
};

/// Ray-cast render with one hard shadow ray per pixel.
/// shading = (ambient + visible * max(0, n.l)) * planckian_rgb(T),
/// image = clip(reflectance * shading). Throws std::invalid_argument for
/// resolution < 64 or an invalid spec, std::runtime_error if a camera ray
/// finds no surface.
RenderResult render(const SceneSpec& spec, const LightSpec& light,
                    int resolution, const CameraSpec& camera = {});

struct GenerateOptions {
  int scenes = 8;
  int lights_per_scene = 10;
  int resolution = 256;
  std::uint64_t seed = 0;
  int scenes_per_configuration = 1;
  LightSampling lights;
  CameraSpec camera;
};

/// Renders every scene under its lights and writes map files plus
/// `manifest.jsonl` into `out_dir`. Returns the manifest path.
std::filesystem::path generate_dataset(const GenerateOptions& options,
                                       const std::filesystem::path& out_dir);

/// Same scenes as generate_dataset, kept in memory.
std::vector<SceneRecord> generate_records(const GenerateOptions& options);

}  // namespace relight::synth

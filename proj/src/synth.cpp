#include "relight/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "relight/color.hpp"
#include "relight/detail/random.hpp"
#include "relight/io.hpp"

namespace relight::synth {

namespace {

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalize(const Vec3& a) { return (1.0 / std::sqrt(dot(a, a))) * a; }

double hash_unit(std::uint64_t seed, std::int64_t x, std::int64_t y, std::int64_t z) {
  std::uint64_t h = seed;
  h = detail::mix_seed(h, static_cast<std::uint64_t>(x));
  h = detail::mix_seed(h, static_cast<std::uint64_t>(y));
  h = detail::mix_seed(h, static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, const Vec3& p) {
  const double fx = std::floor(p[0]), fy = std::floor(p[1]), fz = std::floor(p[2]);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(p[0] - fx), ty = smooth(p[1] - fy), tz = smooth(p[2] - fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
        acc += w * hash_unit(seed, ix + dx, iy + dy, iz + dz);
      }
    }
  }
  return acc;
}

Rgb random_color(detail::Rng& rng) {
  return {rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95)};
}

Material random_material(detail::Rng& rng, bool force_texture) {
  Material m;
  const auto pick = rng.uniform_int(force_texture ? 1 : 0, 3);
  m.texture = static_cast<TextureKind>(pick);
  m.primary = random_color(rng);
  m.secondary = random_color(rng);
  m.frequency = rng.uniform(3.0, 9.0);
  m.noise_seed = rng.next();
  return m;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal{0.0, 0.0, 1.0};
  int object = -1;  // -1 floor
  bool found = false;
};

bool intersect_sphere(const SceneObject& obj, const Vec3& o, const Vec3& d, double t_min,
                      double& t, Vec3& n) {
  const double r = obj.extent[0];
  const Vec3 oc = o - obj.position;
  const double b = dot(oc, d);
  const double c = dot(oc, oc) - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  double root = -b - s;
  if (root <= t_min) root = -b + s;
  if (root <= t_min) return false;
  t = root;
  n = normalize(o + root * d - obj.position);
  return true;
}

bool intersect_box(const SceneObject& obj, const Vec3& o, const Vec3& d, double t_min,
                   double& t, Vec3& n) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = 0;
  double near_sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double lo = obj.position[a] - obj.extent[a];
    const double hi = obj.position[a] + obj.extent[a];
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo || o[a] > hi) return false;
      continue;
    }
    double t0 = (lo - o[a]) / d[a];
    double t1 = (hi - o[a]) / d[a];
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return false;
  }
  if (t_near <= t_min) return false;  // origin inside or box behind
  t = t_near;
  n = {0.0, 0.0, 0.0};
  n[near_axis] = near_sign;
  return true;
}

bool intersect(const SceneObject& obj, const Vec3& o, const Vec3& d, double t_min, double& t,
               Vec3& n) {
  return obj.shape == Shape::sphere ? intersect_sphere(obj, o, d, t_min, t, n)
                                    : intersect_box(obj, o, d, t_min, t, n);
}

Hit trace(const SceneSpec& spec, const Vec3& o, const Vec3& d) {
  Hit hit;
  if (d[2] < 0.0) {
    const double t = -o[2] / d[2];
    if (t > 0.0) {
      hit.t = t;
      hit.normal = {0.0, 0.0, 1.0};
      hit.object = -1;
      hit.found = true;
    }
  }
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    double t = 0.0;
    Vec3 n;
    if (intersect(spec.objects[i], o, d, 1e-9, t, n) && t < hit.t) {
      hit.t = t;
      hit.normal = n;
      hit.object = static_cast<int>(i);
      hit.found = true;
    }
  }
  return hit;
}

bool occluded(const SceneSpec& spec, const Vec3& p, const Vec3& l) {
  for (const auto& obj : spec.objects) {
    double t = 0.0;
    Vec3 n;
    if (intersect(obj, p, l, 1e-9, t, n)) return true;
  }
  return false;
}

bool albedo_ok(const Rgb& c) {
  return std::all_of(c.begin(), c.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

}  // namespace

Rgb Material::albedo(const Vec3& p) const {
  double w = 0.0;
  switch (texture) {
    case TextureKind::solid:
      return primary;
    case TextureKind::checker: {
      const auto cell = static_cast<std::int64_t>(std::floor(p[0] * frequency)) +
                        static_cast<std::int64_t>(std::floor(p[1] * frequency)) +
                        static_cast<std::int64_t>(std::floor(p[2] * frequency));
      w = (cell & 1) ? 1.0 : 0.0;
      break;
    }
    case TextureKind::stripes:
      w = 0.5 + 0.5 * std::sin(kTwoPi * frequency * (0.8 * p[0] + 0.6 * p[1] + 0.3 * p[2]));
      break;
    case TextureKind::noise: {
      const Vec3 q = frequency * p;
      w = 0.65 * value_noise(noise_seed, q) + 0.35 * value_noise(noise_seed ^ 0x5bd1e995ULL, 2.0 * q);
      break;
    }
  }
  w = std::clamp(w, 0.0, 1.0);
  return {primary[0] + (secondary[0] - primary[0]) * w,
          primary[1] + (secondary[1] - primary[1]) * w,
          primary[2] + (secondary[2] - primary[2]) * w};
}

double SceneObject::footprint_radius() const {
  return shape == Shape::sphere ? extent[0] : std::hypot(extent[0], extent[1]);
}

LightCondition LightSpec::condition() const {
  return LightCondition::from_temperature(pan, tilt, temperature);
}

std::vector<std::string> check_scene(const SceneSpec& spec) {
  std::vector<std::string> out;
  const auto n = static_cast<int>(spec.objects.size());
  if (n < kMinObjects || n > kMaxObjects) {
    out.push_back("object_count: expected 3..10, got " + std::to_string(n));
  }
  if (!(spec.ambient >= kMinAmbient && spec.ambient <= kMaxAmbient)) {
    out.push_back("ambient: expected [0.02, 0.1]");
  }
  if (!albedo_ok(spec.floor.primary) || !albedo_ok(spec.floor.secondary)) {
    out.push_back("floor: albedo outside [0,1]");
  }
  for (int i = 0; i < n; ++i) {
    const auto& a = spec.objects[i];
    if (!albedo_ok(a.material.primary) || !albedo_ok(a.material.secondary)) {
      out.push_back("objects[" + std::to_string(i) + "]: albedo outside [0,1]");
    }
    for (int j = i + 1; j < n; ++j) {
      const auto& b = spec.objects[j];
      const double dist = std::hypot(a.position[0] - b.position[0], a.position[1] - b.position[1]);
      if (dist < a.footprint_radius() + b.footprint_radius()) {
        out.push_back("objects[" + std::to_string(i) + "," + std::to_string(j) + "]: overlap");
      }
    }
  }
  return out;
}

SceneSpec sample_scene(std::uint64_t seed) {
  constexpr int kObjectRetries = 200;
  constexpr int kSceneRetries = 50;
  constexpr double kGap = 0.02;
  constexpr double kArea = 0.75;
  detail::Rng rng(detail::mix_seed(seed, 0x73636e65ULL));
  for (int attempt = 0; attempt < kSceneRetries; ++attempt) {
    SceneSpec spec;
    spec.seed = seed;
    spec.ambient = rng.uniform(kMinAmbient, kMaxAmbient);
    spec.floor = random_material(rng, true);
    const auto count = static_cast<int>(rng.uniform_int(kMinObjects, kMaxObjects));
    bool failed = false;
    for (int k = 0; k < count && !failed; ++k) {
      SceneObject obj;
      obj.shape = rng.uniform_int(0, 1) == 0 ? Shape::sphere : Shape::box;
      if (obj.shape == Shape::sphere) {
        const double r = rng.uniform(0.08, 0.2);
        obj.extent = {r, r, r};
      } else {
        obj.extent = {rng.uniform(0.06, 0.16), rng.uniform(0.06, 0.16), rng.uniform(0.06, 0.2)};
      }
      obj.material = random_material(rng, false);
      bool placed = false;
      for (int r = 0; r < kObjectRetries && !placed; ++r) {
        const double x = rng.uniform(-kArea, kArea);
        const double y = rng.uniform(-kArea, kArea);
        placed = std::all_of(spec.objects.begin(), spec.objects.end(), [&](const SceneObject& o) {
          return std::hypot(x - o.position[0], y - o.position[1]) >=
                 o.footprint_radius() + obj.footprint_radius() + kGap;
        });
        if (placed) obj.position = {x, y, obj.extent[2]};
      }
      if (!placed) failed = true;
      else spec.objects.push_back(obj);
    }
    if (!failed) return spec;
  }
  throw std::runtime_error("sample_scene: could not place non-overlapping objects for seed " +
                           std::to_string(seed));
}

LightSpec sample_light(std::uint64_t seed, const LightSampling& sampling) {
  detail::Rng rng(detail::mix_seed(seed, 0x6c696768ULL));
  LightSpec light;
  light.pan = rng.uniform(0.0, kTwoPi);
  const double s = rng.uniform(std::sin(sampling.tilt_min), std::sin(sampling.tilt_max));
  light.tilt = std::asin(s);
  light.radius = rng.uniform(sampling.radius_min, sampling.radius_max);
  light.temperature = rng.uniform(sampling.temperature_min, sampling.temperature_max);
  return light;
}

RenderResult render(const SceneSpec& spec, const LightSpec& light, int resolution,
                    const CameraSpec& camera) {
  if (resolution < 64) {
    throw std::invalid_argument("render: resolution must be at least 64");
  }
  if (const auto problems = check_scene(spec); !problems.empty()) {
    throw std::invalid_argument("render: invalid scene spec: " + problems.front());
  }
  const Rgb light_rgb = color::planckian_rgb(light.temperature);
  const auto l = light_direction(light.pan, clamp_tilt(light.tilt));

  const double ce = std::cos(camera.elevation);
  const Vec3 eye{camera.distance * ce * std::cos(camera.azimuth),
                 camera.distance * ce * std::sin(camera.azimuth),
                 camera.distance * std::sin(camera.elevation)};
  const Vec3 forward = normalize((-1.0) * eye);
  const Vec3 right = normalize(cross(forward, {0.0, 0.0, 1.0}));
  const Vec3 up = cross(right, forward);
  const double half = std::tan(0.5 * camera.vertical_fov);

  RenderResult out;
  out.image = ImageMap(resolution, resolution, MapKind::image);
  out.reflectance = ImageMap(resolution, resolution, MapKind::reflectance);
  out.shading = ImageMap(resolution, resolution, MapKind::shading);
  GBuffer& gb = out.gbuffer;
  const auto pixels = static_cast<std::size_t>(resolution) * resolution;
  gb.resolution = resolution;
  gb.position.resize(pixels);
  gb.normal.resize(pixels);
  gb.is_floor.resize(pixels);
  gb.visible.resize(pixels);
  gb.lambert.resize(pixels);

  for (int i = 0; i < resolution; ++i) {
    const double v = (1.0 - 2.0 * (i + 0.5) / resolution) * half;
    for (int j = 0; j < resolution; ++j) {
      const double u = (2.0 * (j + 0.5) / resolution - 1.0) * half;
      const Vec3 d = normalize(forward + u * right + v * up);
      const Hit hit = trace(spec, eye, d);
      if (!hit.found) {
        throw std::runtime_error("render: camera ray at pixel (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") hits no surface");
      }
      const Vec3 p = eye + hit.t * d;
      const Material& mat = hit.object < 0 ? spec.floor : spec.objects[hit.object].material;
      const Rgb albedo = mat.albedo(p);
      const double lambert = std::max(0.0, dot(hit.normal, l));
      const bool visible = lambert > 0.0 && !occluded(spec, p + 1e-7 * hit.normal, l);
      const double irradiance = spec.ambient + (visible ? lambert : 0.0);

      const std::size_t k = static_cast<std::size_t>(i) * resolution + j;
      gb.position[k] = p;
      gb.normal[k] = hit.normal;
      gb.is_floor[k] = hit.object < 0 ? 1 : 0;
      gb.visible[k] = visible ? 1 : 0;
      gb.lambert[k] = lambert;
      for (int c = 0; c < 3; ++c) {
        const float r = static_cast<float>(albedo[c]);
        const float s = static_cast<float>(irradiance * light_rgb[c]);
        out.reflectance.at(i, j, c) = r;
        out.shading.at(i, j, c) = s;
        out.image.at(i, j, c) = std::clamp(r * s, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

namespace {

struct SceneJob {
  SceneSpec spec;
  std::vector<LightSpec> lights;
  std::int64_t configuration_id = 0;
  std::string scene_id;
};

std::vector<SceneJob> plan(const GenerateOptions& options) {
  if (options.scenes < 1 || options.lights_per_scene < 1) {
    throw std::invalid_argument("generate: scenes and lights_per_scene must be positive");
  }
  if (options.scenes_per_configuration < 1) {
    throw std::invalid_argument("generate: scenes_per_configuration must be positive");
  }
  std::vector<SceneJob> jobs;
  for (int s = 0; s < options.scenes; ++s) {
    SceneJob job;
    const std::uint64_t scene_seed = detail::mix_seed(options.seed, static_cast<std::uint64_t>(s));
    job.spec = sample_scene(scene_seed);
    for (int k = 0; k < options.lights_per_scene; ++k) {
      job.lights.push_back(
          sample_light(detail::mix_seed(scene_seed, 1000 + static_cast<std::uint64_t>(k)),
                       options.lights));
    }
    job.configuration_id = s / options.scenes_per_configuration;
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%05d", s);
    job.scene_id = id;
    jobs.push_back(std::move(job));
  }
  return jobs;
}

}  // namespace

std::vector<SceneRecord> generate_records(const GenerateOptions& options) {
  std::vector<SceneRecord> records;
  for (auto& job : plan(options)) {
    SceneRecord rec;
    rec.scene_id = job.scene_id;
    rec.configuration_id = job.configuration_id;
    rec.geometry_seed = job.spec.seed;
    for (const auto& light : job.lights) {
      RenderResult r = render(job.spec, light, options.resolution, options.camera);
      rec.captures.push_back(
          {light.condition(), std::move(r.image), std::move(r.reflectance), std::move(r.shading)});
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::filesystem::path generate_dataset(const GenerateOptions& options,
                                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io::DataError(out_dir.string() + ": " + ec.message());

  io::Manifest manifest;
  manifest.root = out_dir;
  for (auto& job : plan(options)) {
    io::ManifestScene scene;
    scene.scene_id = job.scene_id;
    scene.configuration_id = job.configuration_id;
    scene.geometry_seed = job.spec.seed;
    const std::string reflectance_rel = job.scene_id + "/reflectance.rlm";
    for (std::size_t k = 0; k < job.lights.size(); ++k) {
      const LightSpec& light = job.lights[k];
      RenderResult r = render(job.spec, light, options.resolution, options.camera);
      char stem[64];
      std::snprintf(stem, sizeof(stem), "%s/capture_%02zu", job.scene_id.c_str(), k);
      const std::string base = stem;
      if (k == 0) io::save_map(r.reflectance, out_dir / reflectance_rel);
      io::save_map(r.image, out_dir / (base + "_image.rlm"));
      io::save_map(r.shading, out_dir / (base + "_shading.rlm"));
      io::save_png(r.image, out_dir / (base + ".png"));
      io::ManifestCapture cap;
      cap.light = light.condition();
      cap.radius = light.radius;
      cap.image_path = base + "_image.rlm";
      cap.reflectance_path = reflectance_rel;
      cap.shading_path = base + "_shading.rlm";
      cap.preview_path = base + ".png";
      scene.captures.push_back(std::move(cap));
    }
    manifest.scenes.push_back(std::move(scene));
  }
  const fs::path path = out_dir / "manifest.jsonl";
  io::save_manifest(manifest, path);
  return path;
}

}  // namespace relight::synth

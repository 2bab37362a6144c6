#include "relight/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace relight::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMapMagic[8] = {'R', 'L', 'M', 'A', 'P', '\0', '\0', '\0'};
constexpr std::size_t kMapHeaderSize = 8 + 5 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_map(const ImageMap& map) {
  std::vector<std::uint8_t> out;
  out.reserve(kMapHeaderSize + map.size() * 4);
  out.insert(out.end(), std::begin(kMapMagic), std::end(kMapMagic));
  put_u32(out, kMapFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(map.kind()));
  put_u32(out, static_cast<std::uint32_t>(map.height()));
  put_u32(out, static_cast<std::uint32_t>(map.width()));
  put_u32(out, 3);
  for (float v : map.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ImageMap decode_map(const std::vector<std::uint8_t>& bytes,
                    const std::string& origin) {
  if (bytes.size() < kMapHeaderSize ||
      std::memcmp(bytes.data(), kMapMagic, sizeof(kMapMagic)) != 0) {
    throw DataError(origin + ": not a float map file");
  }
  const std::uint8_t* p = bytes.data() + 8;
  const auto version = static_cast<int>(get_u32(p));
  if (version != kMapFormatVersion) {
    throw SchemaError(origin + ": float map version " + std::to_string(version) +
                          " (expected " + std::to_string(kMapFormatVersion) + ")",
                      version, kMapFormatVersion);
  }
  const auto kind = get_u32(p + 4);
  const auto height = get_u32(p + 8);
  const auto width = get_u32(p + 12);
  const auto channels = get_u32(p + 16);
  if (kind > 2 || channels != 3 || height > 1u << 15 || width > 1u << 15) {
    throw DataError(origin + ": corrupt float map header");
  }
  const std::size_t count = static_cast<std::size_t>(height) * width * 3;
  if (bytes.size() != kMapHeaderSize + count * 4) {
    throw DataError(origin + ": truncated float map payload");
  }
  std::vector<float> data(count);
  const std::uint8_t* src = bytes.data() + kMapHeaderSize;
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(src + 4 * i));
  }
  return ImageMap(static_cast<int>(height), static_cast<int>(width),
                  static_cast<MapKind>(kind), std::move(data));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

void save_map(const ImageMap& map, const fs::path& path) {
  write_file(path, encode_map(map));
}

ImageMap load_map(const fs::path& path) {
  return decode_map(read_file(path), path.string());
}

ImageMap quantize8(const ImageMap& map) {
  ImageMap out = map;
  for (float& v : out.data()) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const ImageMap& map) {
  std::vector<std::uint8_t> pixels(map.size());
  auto src = map.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(map.width());
  image.height = static_cast<png_uint_32>(map.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0,
                                 nullptr)) {
    throw DataError(std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0,
                                 nullptr)) {
    throw DataError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

ImageMap decode_png(const std::vector<std::uint8_t>& bytes, MapKind kind) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError(std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError(std::string("png decode failed: ") + image.message);
  }
  std::vector<float> data(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    data[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return ImageMap(static_cast<int>(image.height), static_cast<int>(image.width),
                  kind, std::move(data));
}

void save_png(const ImageMap& map, const fs::path& path) {
  write_file(path, encode_png(map));
}

ImageMap load_png(const fs::path& path, MapKind kind) {
  try {
    return decode_png(read_file(path), kind);
  } catch (const DataError& e) {
    if (std::string(e.what()).starts_with(path.string())) throw;
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace {

json light_to_json(const LightCondition& light, double radius) {
  json j;
  j["variant"] = light.variant == LightVariant::vector ? "vector" : "probe";
  j["pan"] = light.pan;
  j["tilt"] = light.tilt;
  j["color"] = {light.color[0], light.color[1], light.color[2]};
  j["temperature"] = light.temperature ? json(*light.temperature) : json(nullptr);
  j["radius"] = radius;
  return j;
}

LightCondition light_from_json(const json& j, const std::string& origin) {
  if (j.value("variant", "vector") != "vector") {
    throw DataError(origin + ": only vector lights are stored in manifests");
  }
  LightCondition light;
  light.pan = j.at("pan").get<double>();
  light.tilt = j.at("tilt").get<double>();
  const auto& c = j.at("color");
  light.color = {c.at(0).get<double>(), c.at(1).get<double>(),
                 c.at(2).get<double>()};
  if (j.contains("temperature") && !j["temperature"].is_null()) {
    light.temperature = j["temperature"].get<double>();
  }
  auto violations = validate(light, "light");
  if (!violations.empty()) {
    throw DataError(origin + ": invalid light: " + describe(violations));
  }
  return light;
}

void set_optional(json& j, const char* key, const std::optional<std::string>& v) {
  if (v) j[key] = *v;
}

std::optional<std::string> get_optional(const json& j, const char* key) {
  if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return std::nullopt;
}

}  // namespace

std::string serialize_manifest(const Manifest& manifest) {
  std::ostringstream os;
  json header;
  header["schema_version"] = manifest.schema_version;
  header["kind"] = "relight-manifest";
  header["generator"] = manifest.generator;
  header["shading_falloff"] = manifest.shading_falloff;
  header["scenes"] = manifest.scenes.size();
  os << header.dump() << "\n";
  for (const auto& scene : manifest.scenes) {
    json j;
    j["scene_id"] = scene.scene_id;
    j["configuration_id"] = scene.configuration_id;
    j["geometry_seed"] = scene.geometry_seed;
    json caps = json::array();
    for (const auto& cap : scene.captures) {
      json c;
      c["light"] = light_to_json(cap.light, cap.radius);
      c["image_path"] = cap.image_path;
      set_optional(c, "reflectance_path", cap.reflectance_path);
      set_optional(c, "shading_path", cap.shading_path);
      set_optional(c, "preview_path", cap.preview_path);
      caps.push_back(std::move(c));
    }
    j["captures"] = std::move(caps);
    os << j.dump() << "\n";
  }
  return os.str();
}

Manifest parse_manifest(const std::string& text, const fs::path& root,
                        const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  Manifest manifest;
  manifest.root = root;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (!j.contains("schema_version")) {
          throw DataError(where + ": missing schema_version header");
        }
        const int version = j["schema_version"].get<int>();
        if (version != kManifestSchemaVersion) {
          throw SchemaError(where + ": manifest schema_version " +
                                std::to_string(version) + " (expected " +
                                std::to_string(kManifestSchemaVersion) + ")",
                            version, kManifestSchemaVersion);
        }
        manifest.schema_version = version;
        manifest.generator = j.value("generator", manifest.generator);
        manifest.shading_falloff = j.value("shading_falloff", manifest.shading_falloff);
        have_header = true;
        continue;
      }
      ManifestScene scene;
      scene.scene_id = j.at("scene_id").get<std::string>();
      scene.configuration_id = j.at("configuration_id").get<std::int64_t>();
      scene.geometry_seed = j.value("geometry_seed", std::uint64_t{0});
      for (const auto& c : j.at("captures")) {
        ManifestCapture cap;
        cap.light = light_from_json(c.at("light"), where);
        cap.radius = c.at("light").value("radius", 0.0);
        cap.image_path = c.at("image_path").get<std::string>();
        cap.reflectance_path = get_optional(c, "reflectance_path");
        cap.shading_path = get_optional(c, "shading_path");
        cap.preview_path = get_optional(c, "preview_path");
        scene.captures.push_back(std::move(cap));
      }
      manifest.scenes.push_back(std::move(scene));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (!have_header) throw DataError(origin + ": empty manifest");
  return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  const std::string text = serialize_manifest(manifest);
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Manifest load_manifest(const fs::path& path) {
  const auto bytes = read_file(path);
  Manifest manifest =
      parse_manifest(std::string(bytes.begin(), bytes.end()),
                     path.has_parent_path() ? path.parent_path() : fs::path("."),
                     path.string());
  auto require = [&](const std::string& rel) {
    const fs::path full = manifest.root / rel;
    if (!fs::exists(full)) {
      throw DataError(full.string() + ": referenced by " + path.string() +
                      " but missing");
    }
  };
  for (const auto& scene : manifest.scenes) {
    for (const auto& cap : scene.captures) {
      require(cap.image_path);
      if (cap.reflectance_path) require(*cap.reflectance_path);
      if (cap.shading_path) require(*cap.shading_path);
      if (cap.preview_path) require(*cap.preview_path);
    }
  }
  return manifest;
}

namespace {

ImageMap load_any(const fs::path& path, MapKind kind) {
  if (path.extension() == ".png") return load_png(path, kind);
  ImageMap map = load_map(path);
  if (map.kind() != kind) {
    throw DataError(path.string() + ": expected a " + to_string(kind) +
                    " map, found " + to_string(map.kind()));
  }
  return map;
}

}  // namespace

SceneRecord load_scene(const Manifest& manifest, const ManifestScene& scene) {
  SceneRecord record;
  record.scene_id = scene.scene_id;
  record.configuration_id = scene.configuration_id;
  record.geometry_seed = scene.geometry_seed;
  for (const auto& cap : scene.captures) {
    Capture c;
    c.light = cap.light;
    c.image = load_any(manifest.root / cap.image_path, MapKind::image);
    if (cap.reflectance_path) {
      c.reflectance = load_any(manifest.root / *cap.reflectance_path,
                               MapKind::reflectance);
    }
    if (cap.shading_path) {
      c.shading = load_any(manifest.root / *cap.shading_path, MapKind::shading);
    }
    record.captures.push_back(std::move(c));
  }
  return record;
}

std::vector<SceneRecord> load_dataset(const Manifest& manifest) {
  std::vector<SceneRecord> out;
  out.reserve(manifest.scenes.size());
  for (const auto& scene : manifest.scenes) out.push_back(load_scene(manifest, scene));
  return out;
}

}  // namespace relight::io

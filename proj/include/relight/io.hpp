#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relight/core.hpp"

namespace relight::io {

/// Raised for malformed or unreadable files; the message names the path.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file declares a schema version this build does not read.
class SchemaError : public DataError {
 public:
  SchemaError(const std::string& what, int found, int expected)
      : DataError(what), found_(found), expected_(expected) {}
  [[nodiscard]] int found() const noexcept { return found_; }
  [[nodiscard]] int expected() const noexcept { return expected_; }

 private:
  int found_;
  int expected_;
};

inline constexpr int kMapFormatVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

// Float map files: 8-byte magic "RLMAP\0\0\0", then little-endian uint32
// version, kind, height, width, channels, followed by height*width*3
// little-endian float32 values in row-major HWC order.
std::vector<std::uint8_t> encode_map(const ImageMap& map);
ImageMap decode_map(const std::vector<std::uint8_t>& bytes,
                    const std::string& origin = "<memory>");
void save_map(const ImageMap& map, const std::filesystem::path& path);
ImageMap load_map(const std::filesystem::path& path);

/// 8-bit RGB PNG; values are rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_png(const ImageMap& map);
ImageMap decode_png(const std::vector<std::uint8_t>& bytes,
                    MapKind kind = MapKind::image);
void save_png(const ImageMap& map, const std::filesystem::path& path);
ImageMap load_png(const std::filesystem::path& path,
                  MapKind kind = MapKind::image);

/// Quantize to the 8-bit grid used by PNG storage.
ImageMap quantize8(const ImageMap& map);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes);

struct ManifestCapture {
  LightCondition light;
  double radius = 0.0;
  std::string image_path;
  std::optional<std::string> reflectance_path;
  std::optional<std::string> shading_path;
  std::optional<std::string> preview_path;
};

struct ManifestScene {
  std::string scene_id;
  std::int64_t configuration_id = 0;
  std::uint64_t geometry_seed = 0;
  std::vector<ManifestCapture> captures;
};

/// Line-delimited JSON: a header line followed by one line per scene. Paths
/// are relative to `root`.
struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::string generator = "relight-synth";
  std::string shading_falloff = "none";
  std::filesystem::path root;
  std::vector<ManifestScene> scenes;
};

std::string serialize_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text,
                        const std::filesystem::path& root,
                        const std::string& origin = "<memory>");

void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path);
/// Also checks that every referenced file exists.
Manifest load_manifest(const std::filesystem::path& path);

/// Resolves every capture into in-memory maps.
SceneRecord load_scene(const Manifest& manifest, const ManifestScene& scene);
std::vector<SceneRecord> load_dataset(const Manifest& manifest);

}  // namespace relight::io

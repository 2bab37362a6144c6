#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "relight/core.hpp"
#include "relight/net.hpp"

namespace relight::inference {

/// Bilinear resize of a B x C x H x W tensor, antialiased when shrinking.
/// Same size returns the input unchanged.
torch::Tensor resize(const torch::Tensor& x, int height, int width);

/// Where an H x W image sits inside the square model canvas: scaled by
/// size / max(H, W), centered, zero padded.
struct Letterbox {
  int height = 0;  // original
  int width = 0;
  int size = 0;    // canvas side
  int inner_height = 0;
  int inner_width = 0;
  int top = 0;
  int left = 0;
  [[nodiscard]] bool identity() const {
    return height == size && width == size;
  }
};

Letterbox letterbox_geometry(int height, int width, int size);
/// B x C x H x W -> B x C x size x size.
torch::Tensor letterbox(const torch::Tensor& x, const Letterbox& box);
/// Inverse of letterbox: crop the inner region and resize back to H x W.
torch::Tensor restore(const torch::Tensor& boxed, const Letterbox& box);

struct RelightResult {
  ImageMap relit;
  /// Present when intrinsics were requested from a two-stage model. relit
  /// equals compose(reflectance, shading) exactly.
  std::optional<ImageMap> reflectance;
  std::optional<ImageMap> shading;
  /// Estimated original light code (vector variant only).
  std::optional<LightEncoding> original_light;
};

/// Read-only wrapper around a generator in eval mode; safe for concurrent
/// callers.
class Relighter {
 public:
  explicit Relighter(net::RelightModel model, std::string checkpoint_id = {});
  /// Generator weights from any checkpoint kind.
  static Relighter from_checkpoint(const std::filesystem::path& path);

  /// Any H x W input; non-square or non-native sizes go through the
  /// letterbox. Throws net::ConfigError for a light the model cannot take.
  [[nodiscard]] RelightResult relight(const ImageMap& image,
                                      const LightCondition& target,
                                      bool intrinsics = false) const;

  [[nodiscard]] const net::ModelConfig& config() const;
  [[nodiscard]] std::int64_t parameter_count() const;
  [[nodiscard]] const std::string& checkpoint_id() const { return id_; }
  [[nodiscard]] bool two_stage() const { return config().use_two_stage; }

 private:
  net::RelightModel model_;
  std::string id_;
};

}  // namespace relight::inference

#include "relight/inference.hpp"

#include <algorithm>
#include <cmath>

#include "relight/tensor.hpp"

namespace relight::inference {

namespace F = torch::nn::functional;

torch::Tensor resize(const torch::Tensor& x, int height, int width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  const bool shrink = height < x.size(2) || width < x.size(3);
  return F::interpolate(
      x, F::InterpolateFuncOptions()
             .size(std::vector<std::int64_t>{height, width})
             .mode(torch::kBilinear)
             .align_corners(false)
             .antialias(shrink));
}

Letterbox letterbox_geometry(int height, int width, int size) {
  if (height < 1 || width < 1 || size < 1) {
    throw std::invalid_argument("letterbox needs positive dimensions");
  }
  Letterbox b;
  b.height = height;
  b.width = width;
  b.size = size;
  const double scale = static_cast<double>(size) / std::max(height, width);
  b.inner_height = std::clamp(static_cast<int>(std::lround(height * scale)), 1, size);
  b.inner_width = std::clamp(static_cast<int>(std::lround(width * scale)), 1, size);
  b.top = (size - b.inner_height) / 2;
  b.left = (size - b.inner_width) / 2;
  return b;
}

torch::Tensor letterbox(const torch::Tensor& x, const Letterbox& box) {
  if (box.identity()) return x;
  const auto inner = resize(x, box.inner_height, box.inner_width);
  auto canvas = torch::zeros({x.size(0), x.size(1), box.size, box.size},
                             x.options());
  canvas.narrow(2, box.top, box.inner_height)
      .narrow(3, box.left, box.inner_width)
      .copy_(inner);
  return canvas;
}

torch::Tensor restore(const torch::Tensor& boxed, const Letterbox& box) {
  if (box.identity()) return boxed;
  const auto inner = boxed.narrow(2, box.top, box.inner_height)
                         .narrow(3, box.left, box.inner_width);
  return resize(inner.contiguous(), box.height, box.width);
}

Relighter::Relighter(net::RelightModel model, std::string checkpoint_id)
    : model_(std::move(model)), id_(std::move(checkpoint_id)) {
  model_->to(torch::kFloat32);
  model_->eval();
}

Relighter Relighter::from_checkpoint(const std::filesystem::path& path) {
  return Relighter(net::load_model(path), net::checkpoint_id(path));
}

const net::ModelConfig& Relighter::config() const { return model_->config(); }

std::int64_t Relighter::parameter_count() const {
  return net::parameter_count(*model_);
}

RelightResult Relighter::relight(const ImageMap& image,
                                 const LightCondition& target,
                                 bool intrinsics) const {
  torch::NoGradGuard guard;
  const auto& cfg = config();
  const auto box =
      letterbox_geometry(image.height(), image.width(), cfg.image_size);
  const auto input = letterbox(to_tensor(image).unsqueeze(0), box);

  net::LightInput light;
  if (cfg.light_variant == LightVariant::vector) {
    if (target.variant != LightVariant::vector) {
      throw net::ConfigError("model takes a vector light, got a probe");
    }
    light.vector = to_tensor(encode_light(target)).unsqueeze(0);
  } else {
    if (!target.probe) throw net::ConfigError("model takes a light probe");
    light.probe = probe_tensor(*target.probe).unsqueeze(0);
  }
  // forward() is const on weights in eval mode; the handle is shared.
  auto model = model_;
  const auto out = model->forward(input, light);

  RelightResult result;
  if (out.light_ori.defined()) {
    LightEncoding code{};
    const auto acc = out.light_ori.to(torch::kFloat64).contiguous();
    for (int i = 0; i < kLightEncodingSize; ++i) {
      code[static_cast<std::size_t>(i)] = acc[0][i].item<double>();
    }
    result.original_light = code;
  }
  if (out.reflectance.defined()) {
    // Restore the factors, then recompose so the product holds at any size.
    const auto r = to_map(restore(out.reflectance, box)[0], MapKind::reflectance);
    const auto s = to_map(restore(out.shading_new, box)[0], MapKind::shading);
    result.relit = compose(r, s);
    if (intrinsics) {
      result.reflectance = r;
      result.shading = s;
    }
  } else {
    result.relit = to_map(restore(out.relit, box).clamp(0.0, 1.0)[0], MapKind::image);
  }
  return result;
}

}  // namespace relight::inference

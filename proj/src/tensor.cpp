#include "relight/tensor.hpp"

#include <stdexcept>

namespace relight {

torch::Tensor to_tensor(const ImageMap& map, torch::Dtype dtype) {
  auto hwc = torch::from_blob(const_cast<float*>(map.data().data()),
                              {map.height(), map.width(), 3}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).to(dtype).contiguous().clone();
}

ImageMap to_map(const torch::Tensor& chw, MapKind kind) {
  auto t = chw.detach().to(torch::kCPU);
  if (t.dim() == 4 && t.size(0) == 1) t = t.squeeze(0);
  if (t.dim() != 3 || t.size(0) != 3) {
    throw std::invalid_argument("to_map: expected a 3 x H x W tensor");
  }
  auto hwc = t.permute({1, 2, 0}).to(torch::kFloat32).contiguous();
  const auto h = static_cast<int>(hwc.size(0));
  const auto w = static_cast<int>(hwc.size(1));
  const float* p = hwc.data_ptr<float>();
  return ImageMap(h, w, kind, std::vector<float>(p, p + hwc.numel()));
}

torch::Tensor to_tensor(const LightEncoding& code, torch::Dtype dtype) {
  return torch::tensor(std::vector<double>(code.begin(), code.end()),
                       torch::kFloat64)
      .to(dtype);
}

torch::Tensor probe_tensor(const ProbePair& probe, torch::Dtype dtype) {
  if (!probe.chrome.same_shape(probe.gray)) {
    throw std::invalid_argument("probe_tensor: chrome and gray differ in size");
  }
  return torch::cat({to_tensor(probe.chrome, dtype), to_tensor(probe.gray, dtype)},
                    0);
}

}  // namespace relight

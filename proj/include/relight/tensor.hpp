#pragma once

#include <torch/torch.h>

#include "relight/core.hpp"

namespace relight {

/// HWC map -> CHW float tensor (a copy).
torch::Tensor to_tensor(const ImageMap& map,
                        torch::Dtype dtype = torch::kFloat32);

/// CHW (or 1xCxHxW) tensor -> HWC map. No clipping; the caller owns ranges.
ImageMap to_map(const torch::Tensor& chw, MapKind kind);

/// 7-real light code as a 1-D tensor.
torch::Tensor to_tensor(const LightEncoding& code,
                        torch::Dtype dtype = torch::kFloat32);

/// Chrome and gray probe images stacked along channels: 6 x P x P.
torch::Tensor probe_tensor(const ProbePair& probe,
                           torch::Dtype dtype = torch::kFloat32);

}  // namespace relight

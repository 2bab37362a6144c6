#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "relight/core.hpp"

namespace relight {

/// Stacked training batch. With cross-relighting the second half holds the
/// reversed copies of the first half, so entry i + base_size is reverse(i).
struct Batch {
  torch::Tensor inputs;           // B x 3 x H x W
  torch::Tensor targets;          // B x 3 x H x W
  torch::Tensor original_lights;  // B x 7
  torch::Tensor target_lights;    // B x 7
  torch::Tensor gt_reflectance;   // undefined unless every sample has it
  torch::Tensor gt_shading_ori;
  torch::Tensor gt_shading_new;
  std::vector<bool> reversed;
  std::int64_t base_size = 0;

  [[nodiscard]] std::int64_t size() const { return inputs.size(0); }
  [[nodiscard]] bool cross() const { return size() == 2 * base_size; }
  [[nodiscard]] bool has_intrinsics() const { return gt_reflectance.defined(); }
  [[nodiscard]] Batch to(torch::Dtype dtype) const;
};

/// Stacks B0 samples; with `cross` also appends reverse(sample) for each,
/// giving B = 2 * B0. Throws std::invalid_argument on an empty span, mixed
/// image sizes, or probe lights (the vector encoding is required).
Batch assemble_cross_batch(std::span<const RelightSample> samples, bool cross,
                           torch::Dtype dtype = torch::kFloat32);

/// Rows [begin, begin + count) of every tensor.
Batch slice(const Batch& batch, std::int64_t begin, std::int64_t count);

}  // namespace relight

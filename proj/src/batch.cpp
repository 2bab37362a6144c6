#include "relight/batch.hpp"

#include <stdexcept>

#include "relight/tensor.hpp"

namespace relight {

namespace {

torch::Tensor light_code(const LightCondition& light, torch::Dtype dtype) {
  if (light.variant != LightVariant::vector) {
    throw std::invalid_argument(
        "assemble_cross_batch: probe lights have no vector encoding");
  }
  return to_tensor(encode_light(light), dtype);
}

}  // namespace

Batch assemble_cross_batch(std::span<const RelightSample> samples, bool cross,
                           torch::Dtype dtype) {
  if (samples.empty()) {
    throw std::invalid_argument("assemble_cross_batch: no samples");
  }
  std::vector<RelightSample> all(samples.begin(), samples.end());
  if (cross) {
    for (const auto& s : samples) all.push_back(reverse(s));
  }
  bool intrinsics = true;
  for (const auto& s : all) {
    if (!s.input_image.same_shape(samples[0].input_image) ||
        !s.target_image.same_shape(samples[0].input_image)) {
      throw std::invalid_argument("assemble_cross_batch: mixed image sizes");
    }
    intrinsics = intrinsics && s.gt_reflectance && s.gt_shading_ori &&
                 s.gt_shading_new;
  }
  std::vector<torch::Tensor> in, tg, lo, lt, r, so, sn;
  Batch batch;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& s = all[i];
    in.push_back(to_tensor(s.input_image, dtype));
    tg.push_back(to_tensor(s.target_image, dtype));
    lo.push_back(light_code(s.original_light, dtype));
    lt.push_back(light_code(s.target_light, dtype));
    if (intrinsics) {
      r.push_back(to_tensor(*s.gt_reflectance, dtype));
      so.push_back(to_tensor(*s.gt_shading_ori, dtype));
      sn.push_back(to_tensor(*s.gt_shading_new, dtype));
    }
    batch.reversed.push_back(i >= samples.size());
  }
  batch.inputs = torch::stack(in);
  batch.targets = torch::stack(tg);
  batch.original_lights = torch::stack(lo);
  batch.target_lights = torch::stack(lt);
  if (intrinsics) {
    batch.gt_reflectance = torch::stack(r);
    batch.gt_shading_ori = torch::stack(so);
    batch.gt_shading_new = torch::stack(sn);
  }
  batch.base_size = static_cast<std::int64_t>(samples.size());
  return batch;
}

namespace {

torch::Tensor rows(const torch::Tensor& t, std::int64_t begin,
                   std::int64_t count) {
  return t.defined() ? t.narrow(0, begin, count) : t;
}

torch::Tensor cast(const torch::Tensor& t, torch::Dtype dtype) {
  return t.defined() ? t.to(dtype) : t;
}

}  // namespace

Batch slice(const Batch& batch, std::int64_t begin, std::int64_t count) {
  Batch out;
  out.inputs = rows(batch.inputs, begin, count);
  out.targets = rows(batch.targets, begin, count);
  out.original_lights = rows(batch.original_lights, begin, count);
  out.target_lights = rows(batch.target_lights, begin, count);
  out.gt_reflectance = rows(batch.gt_reflectance, begin, count);
  out.gt_shading_ori = rows(batch.gt_shading_ori, begin, count);
  out.gt_shading_new = rows(batch.gt_shading_new, begin, count);
  out.reversed.assign(batch.reversed.begin() + begin,
                      batch.reversed.begin() + begin + count);
  out.base_size = count;
  return out;
}

Batch Batch::to(torch::Dtype dtype) const {
  Batch out = *this;
  out.inputs = cast(inputs, dtype);
  out.targets = cast(targets, dtype);
  out.original_lights = cast(original_lights, dtype);
  out.target_lights = cast(target_lights, dtype);
  out.gt_reflectance = cast(gt_reflectance, dtype);
  out.gt_shading_ori = cast(gt_shading_ori, dtype);
  out.gt_shading_new = cast(gt_shading_new, dtype);
  return out;
}

}  // namespace relight

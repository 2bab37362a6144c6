#pragma once

#include <vector>

#include "relight/net.hpp"
#include "relight/synth.hpp"

namespace relight::testing {

// Narrow model that keeps every structural piece of the full one.
inline net::ModelConfig tiny_model(int size = 64) {
  net::ModelConfig c;
  c.base_channels = 4;
  c.bottleneck_channels = 8;
  c.light_feature_channels = 2;
  c.stage1_shared_blocks = 1;
  c.stage1_branch_blocks = 1;
  c.stage2_pre_blocks = 1;
  c.stage2_post_blocks = 1;
  c.image_size = size;
  c.probe_size = 8;
  c.discriminator_channels = 4;
  return c;
}

inline std::vector<SceneRecord> small_scenes(int scenes = 2, int lights = 3,
                                             int resolution = 64,
                                             std::uint64_t seed = 5) {
  synth::GenerateOptions o;
  o.scenes = scenes;
  o.lights_per_scene = lights;
  o.resolution = resolution;
  o.seed = seed;
  return synth::generate_records(o);
}

}  // namespace relight::testing

#include "doctest.h"

#include <cmath>

#include "relight/core.hpp"
#include "relight/synth.hpp"

using namespace relight;

namespace {

ImageMap filled(int h, int w, MapKind kind, float v) {
  ImageMap m(h, w, kind);
  for (float& x : m.data()) x = v;
  return m;
}

}  // namespace

TEST_CASE("ImageMap rejects buffers that do not match the shape") {
  CHECK_THROWS_AS(ImageMap(8, 8, MapKind::image, std::vector<float>(10)), std::invalid_argument);
  CHECK_NOTHROW(ImageMap(8, 8, MapKind::image, std::vector<float>(8 * 8 * 3)));
}

TEST_CASE("pan wraps and tilt clamps") {
  CHECK(wrap_pan(-kHalfPi) == doctest::Approx(1.5 * kPi));
  CHECK(wrap_pan(kTwoPi + 0.25) == doctest::Approx(0.25));
  CHECK(wrap_pan(kTwoPi) == 0.0);
  CHECK(clamp_tilt(2.0) == kHalfPi);
  CHECK(clamp_tilt(-0.3) == 0.0);
  const auto light = LightCondition::from_temperature(7.0, 9.0, 5000.0);
  CHECK(light.pan < kTwoPi);
  CHECK(light.tilt == kHalfPi);
  CHECK(validate(light, "light").empty());
}

TEST_CASE("validate: synthetic scene has no violations") {
  synth::GenerateOptions opts;
  opts.scenes = 1;
  opts.lights_per_scene = 3;
  opts.resolution = 64;
  opts.seed = 11;
  const auto records = synth::generate_records(opts);
  REQUIRE(records.size() == 1);
  CHECK(validate(records[0]).empty());
}

TEST_CASE("validate: reflectance value 1.2 is one range violation") {
  RelightSample s;
  s.input_image = filled(8, 8, MapKind::image, 0.5f);
  s.target_image = filled(8, 8, MapKind::image, 0.5f);
  s.original_light = LightCondition::from_temperature(0.1, 0.5, 4000.0);
  s.target_light = LightCondition::from_temperature(1.1, 0.7, 6000.0);
  ImageMap r = filled(8, 8, MapKind::reflectance, 0.5f);
  r.at(3, 4, 1) = 1.2f;
  s.gt_reflectance = r;
  const auto v = validate(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "gt_reflectance");
  CHECK(v[0].rule.starts_with("range"));
}

TEST_CASE("validate: captures of different width are one size violation") {
  SceneRecord rec;
  rec.scene_id = "s";
  const auto light = LightCondition::from_temperature(0.0, 0.4, 6500.0);
  rec.captures.push_back({light, filled(8, 8, MapKind::image, 0.2f), std::nullopt, std::nullopt});
  rec.captures.push_back({light, filled(8, 9, MapKind::image, 0.2f), std::nullopt, std::nullopt});
  const auto v = validate(rec);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "captures[1].image");
  CHECK(v[0].rule.starts_with("size"));
}

TEST_CASE("validate: intrinsic mismatch and shared reflectance") {
  SceneRecord rec;
  const auto light = LightCondition::from_temperature(0.0, 0.4, 6500.0);
  ImageMap refl = filled(8, 8, MapKind::reflectance, 0.5f);
  ImageMap shade = filled(8, 8, MapKind::shading, 1.5f);
  ImageMap img = compose(refl, shade);
  rec.captures.push_back({light, img, refl, shade});
  CHECK(validate(rec).empty());

  ImageMap off = img;
  off.at(0, 0, 0) -= 0.01f;
  rec.captures.push_back({light, off, refl, shade});
  auto v = validate(rec);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule.starts_with("intrinsic"));

  rec.captures.pop_back();
  ImageMap refl2 = refl;
  refl2.at(1, 1, 1) = 0.25f;
  rec.captures.push_back({light, compose(refl2, shade), refl2, shade});
  v = validate(rec);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule.starts_with("shared"));
}

TEST_CASE("validate: light invariants") {
  LightCondition light = LightCondition::from_rgb(0.3, 0.3, {0.5, 0.25, 0.1});
  CHECK(light.color[0] == 1.0);
  CHECK(validate(light, "l").empty());
  light.tilt = 2.0;
  CHECK(validate(light, "l").size() == 1);
  light.tilt = 0.3;
  light.temperature = 3000.0;  // color no longer Planckian
  CHECK(validate(light, "l").size() == 1);
  LightCondition probe;
  probe.variant = LightVariant::probe;
  CHECK(validate(probe, "l").size() == 1);
}

TEST_CASE("validate is deterministic and non-throwing on degenerate input") {
  SceneRecord empty;
  CHECK(validate(empty).size() == 1);
  ImageMap tiny(2, 2, MapKind::image);
  CHECK(validate(tiny, "t").size() == 1);
  CHECK(validate(tiny, "t") == validate(tiny, "t"));
}

TEST_CASE("reverse swaps the pair and is an involution") {
  RelightSample s;
  s.input_image = filled(8, 8, MapKind::image, 0.1f);
  s.target_image = filled(8, 8, MapKind::image, 0.9f);
  s.original_light = LightCondition::from_temperature(0.1, 0.5, 4000.0);
  s.target_light = LightCondition::from_temperature(2.1, 0.9, 9000.0);
  s.gt_reflectance = filled(8, 8, MapKind::reflectance, 0.3f);
  s.gt_shading_ori = filled(8, 8, MapKind::shading, 0.2f);
  s.gt_shading_new = filled(8, 8, MapKind::shading, 1.7f);
  const auto r = reverse(s);
  CHECK(r.input_image == s.target_image);
  CHECK(r.target_light == s.original_light);
  CHECK(r.gt_shading_new == s.gt_shading_ori);
  CHECK(r.gt_reflectance == s.gt_reflectance);
  const auto rr = reverse(r);
  CHECK(rr.input_image == s.input_image);
  CHECK(rr.target_image == s.target_image);
  CHECK(rr.original_light == s.original_light);
  CHECK(rr.gt_shading_ori == s.gt_shading_ori);
}

TEST_CASE("light encoding and direction") {
  const auto light = LightCondition::from_rgb(kHalfPi, 0.0, {1.0, 0.5, 0.25});
  const auto e = encode_light(light);
  CHECK(e[0] == doctest::Approx(1.0));
  CHECK(e[1] == doctest::Approx(0.0));
  CHECK(e[2] == doctest::Approx(0.0));
  CHECK(e[3] == doctest::Approx(1.0));
  CHECK(e[5] == 0.5);
  const auto d = light_direction(0.0, kHalfPi);
  CHECK(d[2] == doctest::Approx(1.0));
}

#include "support/torch_doctest.hpp"

#include <cmath>

#include "relight/inference.hpp"
#include "relight/metrics.hpp"
#include "relight/tensor.hpp"
#include "support/fixtures.hpp"

using namespace relight;
using namespace relight::metrics;

namespace {

ImageMap constant(int h, int w, float v) {
  return ImageMap(h, w, MapKind::image, std::vector<float>(static_cast<std::size_t>(h) * w * 3, v));
}

ImageMap random_map(int h, int w, std::uint64_t seed) {
  torch::manual_seed(seed);
  return to_map(torch::rand({3, h, w}), MapKind::image);
}

inference::Relighter tiny_relighter(bool two_stage = true) {
  torch::manual_seed(21);
  auto c = testing::tiny_model(64);
  c.use_two_stage = two_stage;
  return inference::Relighter(net::RelightModel(c), "tiny");
}

}  // namespace

TEST_CASE("psnr closed forms") {
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr_from_mse(0.0) == kPsnrCap);
  CHECK(psnr(constant(8, 8, 0.0f), constant(8, 8, 0.5f)) == doctest::Approx(6.0206).epsilon(1e-5));
  const auto x = random_map(8, 8, 1);
  CHECK(psnr(x, x) == kPsnrCap);
  const auto t = to_tensor(x).unsqueeze(0);
  CHECK(psnr(t, t + 0.1) == doctest::Approx(20.0).epsilon(1e-5));
  CHECK_THROWS_AS(psnr(x, constant(8, 9, 0.f)), std::invalid_argument);
}

TEST_CASE("mps closed forms") {
  CHECK(mps(0.9151, 0.0700) == doctest::Approx(0.92255).epsilon(1e-12));
  CHECK(std::abs(mps(0.9151, 0.0700) - 0.9225) <= 5e-4);
  CHECK(mps(0.8808, 0.0993) == doctest::Approx(0.89075).epsilon(1e-12));
  CHECK(std::abs(mps(0.8808, 0.0993) - 0.8908) <= 5e-4);
  CHECK(mps(1.0, 0.0) == 1.0);
  const auto x = random_map(16, 16, 2);
  losses::RandomFeatureProvider p;
  const auto tx = to_tensor(x, torch::kFloat64).unsqueeze(0);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mps(ssim(x, x), p.distance(tx, tx).item<double>()) == doctest::Approx(1.0));
}

TEST_CASE("evaluate with a ground-truth oracle scores perfectly") {
  const auto scenes = testing::small_scenes(2, 3);
  // Looks the target up by light, so every prediction is exact.
  const Predictor oracle = [&](const ImageMap& input, const LightCondition& light) {
    for (const auto& s : scenes) {
      bool here = false;
      for (const auto& c : s.captures) here = here || c.image == input;
      if (!here) continue;
      for (const auto& c : s.captures) {
        if (c.light == light) return c.image;
      }
    }
    throw std::runtime_error("oracle miss");
  };
  losses::RandomFeatureProvider p;
  EvalOptions o;
  o.resolution = 64;
  o.method = "oracle";
  const auto t = evaluate(oracle, scenes, o, p);
  CHECK(t.rows.size() == 12);
  CHECK(t.aggregate.mps == doctest::Approx(1.0));
  CHECK(t.aggregate.psnr == kPsnrCap);
  CHECK(t.aggregate.lpips == doctest::Approx(0.0));
  CHECK(t.rows[0].input == 0);
  CHECK(t.rows[0].target == 1);
  CHECK(t.rows[1].target == 2);
  CHECK(t.method == "oracle");
  CHECK(t.provider == p.name());
  CHECK(t.to_csv().find("mean") != std::string::npos);
  CHECK(t.to_text().find("PSNR") != std::string::npos);
}

TEST_CASE("evaluate aggregates are means and subsampling is seeded") {
  const auto scenes = testing::small_scenes(2, 2);
  const Predictor identity = [](const ImageMap& input, const LightCondition&) { return input; };
  losses::RandomFeatureProvider p;
  EvalOptions o;
  o.resolution = 32;
  const auto t = evaluate(identity, scenes, o, p);
  REQUIRE(t.rows.size() == 4);
  double sum = 0.0;
  for (const auto& r : t.rows) {
    sum += r.psnr;
    CHECK(r.mps == doctest::Approx(mps(r.ssim, r.lpips)));
  }
  CHECK(t.aggregate.psnr == doctest::Approx(sum / 4.0));
  // the two directions of one pair have equal symmetric scores
  CHECK(t.rows[0].psnr == doctest::Approx(t.rows[1].psnr));
  CHECK(t.rows[0].lpips == doctest::Approx(t.rows[1].lpips));

  o.max_pairs = 2;
  o.seed = 9;
  const auto a = evaluate(identity, scenes, o, p);
  const auto b = evaluate(identity, scenes, o, p);
  REQUIRE(a.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.rows[i].scene_id == b.rows[i].scene_id);
    CHECK(a.rows[i].input == b.rows[i].input);
    CHECK(a.rows[i].psnr == b.rows[i].psnr);
  }
}

TEST_CASE("letterbox geometry and round trip") {
  const auto box = inference::letterbox_geometry(48, 96, 64);
  CHECK(box.inner_width == 64);
  CHECK(box.inner_height == 32);
  CHECK(box.top == 16);
  CHECK(box.left == 0);
  CHECK(!box.identity());
  CHECK(inference::letterbox_geometry(64, 64, 64).identity());

  // content already at canvas scale survives exactly
  const auto x = torch::rand({1, 3, 40, 64});
  const auto same = inference::letterbox_geometry(40, 64, 64);
  const auto boxed = inference::letterbox(x, same);
  CHECK(boxed.sizes() == torch::IntArrayRef({1, 3, 64, 64}));
  CHECK(boxed.narrow(2, 0, same.top).abs().max().item<double>() == 0.0);
  CHECK(torch::equal(inference::restore(boxed, same), x));

  // a smooth image survives a scale round trip closely
  const auto yy = torch::linspace(0, 1, 96).view({1, 1, 96, 1});
  const auto xx = torch::linspace(0, 1, 80).view({1, 1, 1, 80});
  const auto smooth = torch::cat({yy * xx, yy.expand({1, 1, 96, 80}), xx.expand({1, 1, 96, 80})}, 1);
  const auto g = inference::letterbox_geometry(96, 80, 64);
  const auto back = inference::restore(inference::letterbox(smooth, g), g);
  CHECK(back.sizes() == smooth.sizes());
  CHECK((back - smooth).abs().mean().item<double>() < 0.01);
}

TEST_CASE("relighter output shapes for non-native sizes") {
  const auto r = tiny_relighter();
  const auto light = LightCondition::from_temperature(1.0, 0.5, 4000);
  for (auto [h, w] : {std::pair{64, 64}, std::pair{50, 90}, std::pair{128, 96}}) {
    CAPTURE(h);
    CAPTURE(w);
    const auto out = r.relight(random_map(h, w, 3), light, true);
    CHECK(out.relit.height() == h);
    CHECK(out.relit.width() == w);
    REQUIRE(out.reflectance.has_value());
    REQUIRE(out.shading.has_value());
    CHECK(out.reflectance->kind() == MapKind::reflectance);
    CHECK(out.shading->kind() == MapKind::shading);
    const auto product = compose(*out.reflectance, *out.shading);
    CHECK(product == out.relit);
    CHECK(out.original_light.has_value());
    CHECK(validate(out.relit, "relit").empty());
  }
}

TEST_CASE("relighter is deterministic and rejects unsupported lights") {
  const auto r = tiny_relighter();
  const auto x = random_map(64, 64, 4);
  const auto light = LightCondition::from_rgb(0.3, 0.2, {1.0, 0.5, 0.25});
  CHECK(r.relight(x, light).relit == r.relight(x, light).relit);
  const ImageMap chrome(8, 8, MapKind::image);
  CHECK_THROWS_AS(r.relight(x, LightCondition::from_probe({chrome, chrome})), net::ConfigError);
  const auto single = tiny_relighter(false);
  CHECK(!single.two_stage());
  const auto out = single.relight(x, light, false);
  CHECK(!out.reflectance.has_value());
  CHECK(out.relit.height() == 64);
  CHECK(r.parameter_count() > 0);
  CHECK(r.checkpoint_id() == "tiny");
}

TEST_CASE("model predictor relights through the checkpointed model") {
  const auto r = tiny_relighter();
  const auto path = std::filesystem::temp_directory_path() / "relight_metrics_model.rlckpt";
  {
    torch::manual_seed(21);
    net::RelightModel m(testing::tiny_model(64));
    net::save_model(path, m);
  }
  const auto loaded = inference::Relighter::from_checkpoint(path);
  CHECK(loaded.checkpoint_id() == net::checkpoint_id(path));
  CHECK(!loaded.checkpoint_id().empty());
  const auto x = random_map(64, 64, 5);
  const auto light = LightCondition::from_temperature(2.0, 0.9, 6500);
  CHECK(model_predictor(loaded)(x, light) == r.relight(x, light).relit);
  std::filesystem::remove(path);
}

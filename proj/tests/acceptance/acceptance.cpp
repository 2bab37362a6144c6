// One PASS/FAIL line per acceptance criterion. Exit status is 0 when every
// criterion ran to a verdict (2 with --strict whenever one fails), 1 when a
// criterion could not be evaluated.

#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relight/batch.hpp"
#include "relight/color.hpp"
#include "relight/config.hpp"
#include "relight/data.hpp"
#include "relight/detail/summation.hpp"
#include "relight/io.hpp"
#include "relight/losses.hpp"
#include "relight/metrics.hpp"
#include "relight/net.hpp"
#include "relight/synth.hpp"
#include "relight/tensor.hpp"
#include "relight/train.hpp"

using namespace relight;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ----------------------------------------------------------- renderer

Verdict renderer_identity() {
  double worst_float = 0.0, worst_stored = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto scene = synth::sample_scene(1000 + i / 4);
    const auto light = synth::sample_light(5000 + i);
    const auto r = synth::render(scene, light, 64);
    worst_float = std::max(worst_float, max_abs_difference(compose(r.reflectance, r.shading), r.image));
    const auto image = io::decode_map(io::encode_map(r.image));
    const auto refl = io::decode_map(io::encode_map(r.reflectance));
    const auto shading = io::decode_map(io::encode_map(r.shading));
    worst_stored = std::max(worst_stored, max_abs_difference(compose(refl, shading), image));
  }
  return {worst_float == 0.0 && worst_stored <= 1e-5,
          "100 renders: float max " + fmt("%.3g", worst_float) + " (= 0), reloaded max " +
              fmt("%.3g", worst_stored) + " (<= 1e-5)"};
}

// ------------------------------------------------------------ metrics

Verdict metric_formulas() {
  const double a = metrics::mps(0.9151, 0.0700);
  const double b = metrics::mps(0.8808, 0.0993);
  torch::manual_seed(1);
  const auto x = to_map(torch::rand({3, 32, 32}), MapKind::image);
  const double s = metrics::ssim(x, x);
  const double p = metrics::psnr_from_mse(0.01);
  const bool ok = std::abs(a - 0.9225) <= 5e-4 && std::abs(b - 0.8908) <= 5e-4 &&
                  std::abs(s - 1.0) <= 1e-12 && std::abs(p - 20.0) <= 1e-9;
  return {ok, "mps " + fmt("%.5f", a) + " / " + fmt("%.5f", b) + ", ssim(x,x) " + fmt("%.12f", s) +
                  ", psnr(0.01) " + fmt("%.12f", p)};
}

Verdict activation() {
  const double left = losses::f_ac(-1e-300);
  const double right = losses::f_ac(1e-300);
  const bool ok = std::abs(left - right) <= 1e-12 && losses::f_ac(0.0) == 0.1 &&
                  losses::f_ac(1.0) == 1.1;
  return {ok, "limits " + fmt("%.15g", left) + " / " + fmt("%.15g", right) + ", f(0) " +
                  fmt("%.17g", losses::f_ac(0.0)) + ", f(1) " + fmt("%.17g", losses::f_ac(1.0))};
}

// ---------------------------------------------------------- gradients

// Worst relative error between autograd and central differences over
// `probes` entries of x.
double gradient_error(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                      const torch::Tensor& x0, int probes = 8) {
  auto x = x0.clone().set_requires_grad(true);
  f(x).backward();
  const auto grad = x.grad().view(-1).clone();
  auto flat = x.detach().view(-1);
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const std::int64_t i = (k * 7919 + 13) % flat.numel();
    const double orig = flat[i].item<double>();
    const double h = 1e-6;
    flat[i].fill_(orig + h);
    const double plus = f(x.detach()).item<double>();
    flat[i].fill_(orig - h);
    const double minus = f(x.detach()).item<double>();
    flat[i].fill_(orig);
    const double fd = (plus - minus) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i].item<double>()) / std::max(std::abs(fd), 1e-3));
  }
  return worst;
}

Verdict loss_gradients() {
  torch::manual_seed(2);
  const auto opts = torch::kFloat64;
  const auto x = torch::rand({2, 3, 8, 8}, opts);
  const auto y = torch::rand({2, 3, 8, 8}, opts);
  const auto z = torch::rand({2, 3, 8, 8}, opts);
  losses::RandomFeatureProvider perceptual;
  losses::LossConfig c;
  auto light = [](double pan, double tilt, double r) {
    return torch::tensor({std::sin(pan), std::cos(pan), std::sin(tilt), std::cos(tilt), r, 0.7, 0.4},
                         torch::kFloat64);
  };
  const auto gt_light = torch::stack({light(0.3, 0.5, 1.0), light(2.0, 1.1, 0.2)});
  const auto pred_light = torch::stack({light(1.0, 0.2, 0.5), light(4.0, 0.4, 0.9)});
  const auto scores = torch::randn({2, 1, 4, 4}, opts);
  const std::vector<std::pair<std::string, std::function<double()>>> checks = {
      {"image", [&] { return gradient_error([&](const auto& t) { return losses::image_loss(t, y, c, perceptual); }, x); }},
      {"light", [&] { return gradient_error([&](const auto& t) { return losses::light_loss(t, gt_light); }, pred_light, 14); }},
      {"scs", [&] { return gradient_error([&](const auto& t) { return losses::loss_scs(t, y, c); }, x); }},
      {"rc", [&] { return gradient_error([&](const auto& t) { return losses::loss_rc(t, y); }, x); }},
      {"sc", [&] { return gradient_error([&](const auto& t) { return losses::loss_sc(t, y, z, x * 0.5); }, x); }},
      {"ir", [&] { return gradient_error([&](const auto& t) { return losses::loss_ir(t, y, z, x * 0.3, 0.4); }, x); }},
      {"gan_g", [&] { return gradient_error([&](const auto& t) { return losses::generator_adversarial(t); }, scores); }},
      {"gan_d", [&] { return gradient_error([&](const auto& t) { return losses::discriminator_adversarial(t, scores * 0.5); }, scores); }},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, run] : checks) {
    const double e = run();
    if (e >= worst) {
      worst = e;
      worst_name = name;
    }
  }
  return {worst <= 1e-3, std::to_string(checks.size()) + " terms, worst relative error " +
                             fmt("%.2e", worst) + " (" + worst_name + ", <= 1e-3)"};
}

// -------------------------------------------------------- cross batch

ImageMap random_map(relight::detail::Rng& rng, MapKind kind, int h, int w) {
  std::vector<float> v(static_cast<std::size_t>(h) * w * 3);
  for (auto& e : v) e = static_cast<float>(rng.uniform(0.0, kind == MapKind::shading ? 2.0 : 1.0));
  return ImageMap(h, w, kind, std::move(v));
}

RelightSample fuzz_sample(relight::detail::Rng& rng) {
  const int h = static_cast<int>(rng.uniform_int(1, 6));
  const int w = static_cast<int>(rng.uniform_int(1, 6));
  RelightSample s;
  s.input_image = random_map(rng, MapKind::image, h, w);
  s.target_image = random_map(rng, MapKind::image, h, w);
  auto light = [&] {
    const bool planckian = rng.uniform() < 0.5;
    const double pan = rng.uniform(-7.0, 7.0);
    const double tilt = rng.uniform(0.0, kHalfPi);
    if (planckian) return LightCondition::from_temperature(pan, tilt, rng.uniform(1667.0, 25000.0));
    Rgb rgb{};
    for (auto& c : rgb) c = rng.uniform(0.01, 1.0);
    return LightCondition::from_rgb(pan, tilt, rgb);
  };
  s.original_light = light();
  s.target_light = light();
  if (rng.uniform() < 0.8) {
    s.gt_reflectance = random_map(rng, MapKind::reflectance, h, w);
    s.gt_shading_ori = random_map(rng, MapKind::shading, h, w);
    s.gt_shading_new = random_map(rng, MapKind::shading, h, w);
  }
  return s;
}

bool same(const RelightSample& a, const RelightSample& b) {
  return a.input_image == b.input_image && a.target_image == b.target_image &&
         a.original_light == b.original_light && a.target_light == b.target_light &&
         a.gt_reflectance == b.gt_reflectance && a.gt_shading_ori == b.gt_shading_ori &&
         a.gt_shading_new == b.gt_shading_new;
}

Verdict cross_batch() {
  relight::detail::Rng rng(77);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = fuzz_sample(rng);
    const auto r = reverse(s);
    bool ok = same(reverse(r), s);
    ok = ok && r.input_image == s.target_image && r.target_image == s.input_image;
    ok = ok && r.original_light == s.target_light && r.target_light == s.original_light;
    ok = ok && r.gt_reflectance == s.gt_reflectance;
    ok = ok && r.gt_shading_ori == s.gt_shading_new && r.gt_shading_new == s.gt_shading_ori;
    const std::vector<RelightSample> one{s};
    const auto b = assemble_cross_batch(one, true, torch::kFloat64);
    ok = ok && b.size() == 2 && torch::equal(b.inputs[1], b.targets[0]) &&
         torch::equal(b.targets[1], b.inputs[0]) &&
         torch::equal(b.original_lights[1], b.target_lights[0]);
    if (b.has_intrinsics()) {
      ok = ok && torch::equal(b.gt_shading_ori[1], b.gt_shading_new[0]) &&
           torch::equal(b.gt_reflectance[1], b.gt_reflectance[0]);
    }
    failures += ok ? 0 : 1;
  }
  std::vector<RelightSample> nine;
  while (nine.size() < 9) {
    auto s = fuzz_sample(rng);
    if (nine.empty() || (s.input_image.height() == nine[0].input_image.height() &&
                         s.input_image.width() == nine[0].input_image.width())) {
      nine.push_back(std::move(s));
    }
  }
  const auto b = assemble_cross_batch(nine, true);
  const bool ok = failures == 0 && b.size() == 18 && b.base_size == 9;
  return {ok, "1000 fuzzed samples, " + std::to_string(failures) + " violations; B0=9 -> B=" +
                  std::to_string(b.size())};
}

// ------------------------------------------------------- architecture

net::ModelConfig tiny_model(int size) {
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

Verdict architecture() {
  std::vector<std::string> problems;
  torch::NoGradGuard guard;
  {
    net::ModelConfig full;
    net::Stage1 s1(full);
    s1->eval();
    const auto out = s1->forward(torch::rand({1, 3, 64, 48}));
    if (out.bottleneck.sizes() != torch::IntArrayRef({1, full.bottleneck_channels, 16, 12})) {
      problems.push_back("bottleneck shape");
    }
  }
  {
    net::NonLocalBlock nl(16);
    nl->eval();
    const auto x = torch::randn({2, 16, 6, 5});
    if (!torch::equal(nl->forward(x), x)) problems.push_back("non-local not identity at init");
  }
  {
    auto c = tiny_model(32);
    c.light_variant = LightVariant::probe;
    net::RelightModel m(c);
    m->eval();
    const auto o = m->forward(torch::rand({1, 3, 32, 32}), {{}, torch::rand({1, 6, 8, 8})});
    if (o.light_ori.defined()) problems.push_back("probe variant has an original-light head");
  }
  synth::GenerateOptions go;
  go.scenes = 2;
  go.lights_per_scene = 3;
  go.resolution = 64;
  go.seed = 4;
  const auto scenes = synth::generate_records(go);
  int stepped = 0;
  for (const auto& a : ablations()) {
    ExperimentConfig cfg;
    cfg.model = tiny_model(64);
    cfg.train.batch_size = 4;
    cfg.train.total_steps = 1;
    a.apply(cfg);
    try {
      torch::AutoGradMode enable(true);
      train::Trainer t(cfg, scenes);
      const auto rec = t.step();
      if (!std::isfinite(rec.terms.at("total"))) throw std::runtime_error("non-finite loss");
      ++stepped;
    } catch (const std::exception& e) {
      problems.push_back(a.flag + ": " + e.what());
    }
  }
  std::string detail = "bottleneck 256x16x12 at 64x48, non-local identity, probe head absent, " +
                       std::to_string(stepped) + "/" + std::to_string(ablations().size()) +
                       " ablation flags stepped";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// --------------------------------------------------------------- smoke

struct SmokeOptions {
  std::int64_t steps = 2000;
  std::int64_t uiid_steps = 600;
  int base_batch = 2;
  double lr = 1e-3;
  double budget_seconds = 1800.0;
  bool verbose = false;
};

std::vector<SceneRecord> smoke_scenes(std::uint64_t seed, int scenes) {
  synth::GenerateOptions go;
  go.scenes = scenes;
  go.lights_per_scene = 4;
  go.resolution = 128;
  go.seed = seed;
  return synth::generate_records(go);
}

ExperimentConfig smoke_config(const SmokeOptions& o) {
  ExperimentConfig c;
  c.model.base_channels = 8;
  c.model.bottleneck_channels = 32;
  c.model.light_feature_channels = 4;
  c.model.stage1_shared_blocks = 2;
  c.model.stage1_branch_blocks = 2;
  c.model.stage2_pre_blocks = 2;
  c.model.stage2_post_blocks = 2;
  c.model.image_size = 128;
  c.model.discriminator_channels = 16;
  c.train.batch_size = 2 * o.base_batch;
  c.train.total_steps = o.steps;
  c.train.lr_initial = o.lr;
  return c;
}

// Mean relit PSNR over every ordered pair, model in eval mode.
double pair_psnr(net::RelightModel& m, const std::vector<SceneRecord>& scenes) {
  torch::NoGradGuard g;
  m->eval();
  std::vector<RelightSample> all;
  for (const auto& s : scenes) {
    for (const auto& p : data::ordered_pairs(s.captures.size())) {
      all.push_back(data::make_pair(s, p[0], p[1]));
    }
  }
  relight::detail::CompensatedSum sum;
  for (std::size_t i = 0; i < all.size(); i += 16) {
    const auto n = std::min<std::size_t>(16, all.size() - i);
    const auto b = assemble_cross_batch(std::span(all).subspan(i, n), false);
    const auto o = m->forward(b.inputs, {b.target_lights, {}});
    for (std::size_t k = 0; k < n; ++k) {
      sum += metrics::psnr(o.relit[static_cast<std::int64_t>(k)], b.targets[static_cast<std::int64_t>(k)]);
    }
  }
  m->train();
  return sum.value() / static_cast<double>(all.size());
}

// Mean and first/last 5% of the generator total.
std::pair<double, double> loss_ends(const std::vector<train::StepRecord>& h) {
  const std::size_t k = std::max<std::size_t>(1, h.size() / 20);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    first += h[i].terms.at("total");
    last += h[h.size() - 1 - i].terms.at("total");
  }
  return {first / k, last / k};
}

void progress(const SmokeOptions& o, const train::StepRecord& r, double seconds) {
  if (o.verbose && (r.step % 100 == 0)) {
    std::fprintf(stderr, "  step %lld total %.4f %.0fs\n", static_cast<long long>(r.step),
                 r.terms.at("total"), seconds);
  }
}

// Steps until total_steps or the budget runs out; returns seconds spent.
double train_within_budget(train::Trainer& t, const SmokeOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  while (t.steps_done() < t.config().train.total_steps && elapsed() < o.budget_seconds) {
    progress(o, t.step(), elapsed());
  }
  return elapsed();
}

Verdict smoke_supervised(const SmokeOptions& o) {
  const auto scenes = smoke_scenes(3, 8);
  train::Trainer t(smoke_config(o), scenes);
  const double baseline = pair_psnr(t.model(), scenes);
  const double seconds = train_within_budget(t, o);
  const double trained = pair_psnr(t.model(), scenes);
  const auto [first, last] = loss_ends(t.history());
  const bool ok = trained - baseline >= 6.0 && last < first;
  return {ok, std::to_string(t.steps_done()) + " steps in " + fmt("%.0f", seconds) + " s (< " +
                  fmt("%.0f", o.budget_seconds) + "): PSNR " + fmt("%.2f", baseline) + " -> " +
                  fmt("%.2f", trained) + " dB (gain " + fmt("%.2f", trained - baseline) +
                  ", need >= 6); loss first 5% " + fmt("%.4f", first) + " last 5% " +
                  fmt("%.4f", last)};
}

// Mean over capture pairs of the held-out scene of |R(I_a) - R(I_b)|.
double reflectance_spread(net::RelightModel& m, const SceneRecord& scene) {
  torch::NoGradGuard g;
  m->eval();
  std::vector<torch::Tensor> images, lights;
  for (const auto& c : scene.captures) {
    images.push_back(to_tensor(c.image));
    lights.push_back(to_tensor(encode_light(c.light)));
  }
  const auto o = m->forward(torch::stack(images), {torch::stack(lights), {}});
  const auto r = o.reflectance;
  relight::detail::CompensatedSum sum;
  int n = 0;
  for (std::int64_t a = 0; a < r.size(0); ++a) {
    for (std::int64_t b = a + 1; b < r.size(0); ++b) {
      sum += (r[a] - r[b]).abs().mean().item<double>();
      ++n;
    }
  }
  m->train();
  return sum.value() / n;
}

// Mean angle between the estimated and true original light, in radians.
double light_error(net::RelightModel& m, const std::vector<SceneRecord>& scenes) {
  torch::NoGradGuard g;
  m->eval();
  relight::detail::CompensatedSum sum;
  int n = 0;
  for (const auto& s : scenes) {
    std::vector<torch::Tensor> images, lights;
    for (const auto& c : s.captures) {
      images.push_back(to_tensor(c.image));
      lights.push_back(to_tensor(encode_light(c.light)));
    }
    const auto code = torch::stack(lights);
    const auto o = m->forward(torch::stack(images), {code, {}});
    const auto err = losses::angular_error(o.light_ori, code);
    for (std::int64_t i = 0; i < err.size(0); ++i) {
      sum += err[i].item<double>();
      ++n;
    }
  }
  m->train();
  return sum.value() / n;
}

Verdict smoke_uiid(const SmokeOptions& o) {
  auto scenes = smoke_scenes(3, 9);
  const SceneRecord held_out = scenes.back();
  scenes.pop_back();
  for (auto& s : scenes) {
    for (auto& c : s.captures) {
      c.reflectance.reset();
      c.shading.reset();
    }
  }
  auto cfg = smoke_config(o);
  cfg.train.total_steps = o.uiid_steps;
  ablation_by_flag("uiid").apply(cfg);
  train::Trainer t(cfg, scenes);
  const double spread0 = reflectance_spread(t.model(), held_out);
  const double angle0 = light_error(t.model(), scenes);
  const double seconds = train_within_budget(t, o);
  const double spread1 = reflectance_spread(t.model(), held_out);
  const double angle1 = light_error(t.model(), scenes);
  const bool ok = spread1 <= 0.5 * spread0 && angle1 <= 0.5 * angle0;
  return {ok, std::to_string(t.steps_done()) + " steps in " + fmt("%.0f", seconds) + " s (< " +
                  fmt("%.0f", o.budget_seconds) + "): held-out reflectance L1 " + fmt("%.4f", spread0) + " -> " +
                  fmt("%.4f", spread1) + " (ratio " + fmt("%.2f", spread1 / spread0) +
                  ", need <= 0.5); light angular error " + fmt("%.3f", angle0) + " -> " +
                  fmt("%.3f", angle1) + " rad (ratio " + fmt("%.2f", angle1 / angle0) +
                  ", need <= 0.5)"};
}

// ---------------------------------------------------------- statistics

Verdict chromaticity_ordering() {
  synth::GenerateOptions go;
  go.scenes = 12;
  go.lights_per_scene = 4;
  go.resolution = 128;
  go.seed = 11;
  const auto scenes = synth::generate_records(go);
  const auto s = color::chromaticity_stats(scenes);
  const bool ok = s.shading_over_image.chroma < 1.0 && s.shading.chroma < s.reflectance.chroma;
  return {ok, std::to_string(s.samples) + " triplets: |dS|/|dI| chroma " +
                  fmt("%.4f", s.shading_over_image.chroma) + " (< 1), |dS| chroma " +
                  fmt("%.5f", s.shading.chroma) + " < |dR| chroma " + fmt("%.5f", s.reflectance.chroma)};
}

Verdict split_integrity() {
  io::Manifest m;
  for (int c = 0; c < 72; ++c) {
    for (int k = 0; k < 2; ++k) {
      io::ManifestScene s;
      s.scene_id = "c" + std::to_string(c) + "_" + std::to_string(k);
      s.configuration_id = c;
      m.scenes.push_back(s);
    }
  }
  const auto splits = data::split_by_configuration(m, data::kRsrRatios, 0);
  auto ids = [](const io::Manifest& part) {
    std::set<std::int64_t> out;
    for (const auto& s : part.scenes) out.insert(s.configuration_id);
    return out;
  };
  const auto a = ids(splits.train), b = ids(splits.validation), c = ids(splits.test);
  std::set<std::int64_t> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  all.insert(c.begin(), c.end());
  const bool disjoint = all.size() == a.size() + b.size() + c.size();
  const bool ok = disjoint && all.size() == 72 && a.size() == 59 && b.size() == 3 && c.size() == 10;
  return {ok, "72 configurations -> " + std::to_string(a.size()) + "/" + std::to_string(b.size()) +
                  "/" + std::to_string(c.size()) + (disjoint ? ", disjoint" : ", overlapping")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance report"};
  SmokeOptions smoke;
  std::vector<std::string> only;
  bool strict = false;
  bool skip_smoke = false;
  std::string report_path;
  app.add_option("--only", only, "criterion ids to run");
  app.add_option("--smoke-steps", smoke.steps, "smoke training steps")->capture_default_str();
  app.add_option("--uiid-steps", smoke.uiid_steps, "UIID smoke training steps")->capture_default_str();
  app.add_option("--smoke-budget", smoke.budget_seconds, "seconds per smoke run")->capture_default_str();
  app.add_option("--smoke-base-batch", smoke.base_batch, "samples drawn per smoke step")->capture_default_str();
  app.add_option("--smoke-lr", smoke.lr, "smoke initial learning rate")->capture_default_str();
  app.add_flag("--skip-smoke", skip_smoke, "omit the two training criteria");
  app.add_flag("--verbose", smoke.verbose, "smoke progress on stderr");
  app.add_option("--report", report_path, "also write the verdict lines to this file");
  app.add_flag("--strict", strict, "exit 2 if any criterion fails");
  CLI11_PARSE(app, argc, argv);
  torch::set_num_threads(1);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"renderer-identity", renderer_identity},
      {"metric-formulas", metric_formulas},
      {"activation", activation},
      {"loss-gradients", loss_gradients},
      {"cross-batch", cross_batch},
      {"architecture", architecture},
      {"smoke-supervised", [&] { return smoke_supervised(smoke); }},
      {"smoke-uiid", [&] { return smoke_uiid(smoke); }},
      {"chromaticity-ordering", chromaticity_ordering},
      {"split-integrity", split_integrity},
  };
  std::ofstream report;
  if (!report_path.empty()) report.open(report_path);
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
  };
  int failed = 0, errors = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    if (skip_smoke && id.rfind("smoke", 0) == 0) continue;
    try {
      const auto v = run();
      emit((v.pass ? "PASS " : "FAIL ") + id + ": " + v.detail);
      failed += v.pass ? 0 : 1;
    } catch (const std::exception& e) {
      emit("ERROR " + id + ": " + e.what());
      ++errors;
    }
  }
  if (errors > 0) return 1;
  return strict && failed > 0 ? 2 : 0;
}

#include "relight/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "relight/color.hpp"
#include "relight/detail/random.hpp"

namespace relight::losses {

namespace F = torch::nn::functional;
using json = nlohmann::json;

// ---------------------------------------------------------------- config

std::vector<std::string> LossConfig::check() const {
  std::vector<std::string> out;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0)) out.push_back(std::string(name) + " must be > 0");
  };
  positive(lambda1, "lambda1");
  positive(lambda2, "lambda2");
  positive(k1, "k1");
  positive(k2, "k2");
  positive(alpha, "alpha");
  positive(epsilon, "epsilon");
  positive(mu_start, "mu_start");
  positive(mu_end, "mu_end");
  if (!(mu_decay_fraction > 0.0 && mu_decay_fraction <= 1.0)) {
    out.push_back("mu_decay_fraction must be in (0, 1]");
  }
  return out;
}

namespace {

json weights_json(const LossWeights& w) {
  return {{"relit", w.relit},       {"recon", w.recon},
          {"reflectance", w.reflectance}, {"shading_ori", w.shading_ori},
          {"shading_new", w.shading_new}, {"light", w.light},
          {"gan", w.gan},           {"rc", w.rc},
          {"sc", w.sc},             {"scs", w.scs},
          {"ir", w.ir}};
}

LossWeights weights_from(const json& j) {
  LossWeights w;
  w.relit = j.value("relit", w.relit);
  w.recon = j.value("recon", w.recon);
  w.reflectance = j.value("reflectance", w.reflectance);
  w.shading_ori = j.value("shading_ori", w.shading_ori);
  w.shading_new = j.value("shading_new", w.shading_new);
  w.light = j.value("light", w.light);
  w.gan = j.value("gan", w.gan);
  w.rc = j.value("rc", w.rc);
  w.sc = j.value("sc", w.sc);
  w.scs = j.value("scs", w.scs);
  w.ir = j.value("ir", w.ir);
  return w;
}

}  // namespace

void to_json(json& j, const LossConfig& c) {
  j = json{{"use_ssim", c.use_ssim},
           {"use_lpips", c.use_lpips},
           {"use_intrinsic_gt", c.use_intrinsic_gt},
           {"use_gan", c.use_gan},
           {"uiid_enabled", c.uiid_enabled},
           {"use_rc", c.use_rc},
           {"use_sc", c.use_sc},
           {"use_scs", c.use_scs},
           {"use_ir", c.use_ir},
           {"lambda1", c.lambda1},
           {"lambda2", c.lambda2},
           {"k1", c.k1},
           {"k2", c.k2},
           {"alpha", c.alpha},
           {"epsilon", c.epsilon},
           {"mu_start", c.mu_start},
           {"mu_end", c.mu_end},
           {"mu_decay_fraction", c.mu_decay_fraction},
           {"perceptual_seed", c.perceptual_seed},
           {"weights", weights_json(c.weights)}};
}

void from_json(const json& j, LossConfig& c) {
  LossConfig d;
  c.use_ssim = j.value("use_ssim", d.use_ssim);
  c.use_lpips = j.value("use_lpips", d.use_lpips);
  c.use_intrinsic_gt = j.value("use_intrinsic_gt", d.use_intrinsic_gt);
  c.use_gan = j.value("use_gan", d.use_gan);
  c.uiid_enabled = j.value("uiid_enabled", d.uiid_enabled);
  c.use_rc = j.value("use_rc", d.use_rc);
  c.use_sc = j.value("use_sc", d.use_sc);
  c.use_scs = j.value("use_scs", d.use_scs);
  c.use_ir = j.value("use_ir", d.use_ir);
  c.lambda1 = j.value("lambda1", d.lambda1);
  c.lambda2 = j.value("lambda2", d.lambda2);
  c.k1 = j.value("k1", d.k1);
  c.k2 = j.value("k2", d.k2);
  c.alpha = j.value("alpha", d.alpha);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.mu_start = j.value("mu_start", d.mu_start);
  c.mu_end = j.value("mu_end", d.mu_end);
  c.mu_decay_fraction = j.value("mu_decay_fraction", d.mu_decay_fraction);
  c.perceptual_seed = j.value("perceptual_seed", d.perceptual_seed);
  c.weights = j.contains("weights") ? weights_from(j.at("weights")) : d.weights;
}

// ------------------------------------------------------------------ ssim

namespace {

void require_same(const torch::Tensor& a, const torch::Tensor& b,
                  const char* what) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

// Normalized 11-tap Gaussian, sigma 1.5; the 2-D window is its outer product.
torch::Tensor gaussian_taps(torch::Dtype dtype) {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  auto x = torch::arange(kSize, torch::kFloat64) - (kSize - 1) / 2.0;
  auto g = torch::exp(-(x * x) / (2.0 * kSigma * kSigma));
  return (g / g.sum()).to(dtype);
}

// n x (n + 10) matrix whose row i holds the taps at columns i..i+10.
torch::Tensor banded(const torch::Tensor& taps, std::int64_t n) {
  const auto k = taps.size(0);
  const auto opts = torch::TensorOptions().dtype(torch::kInt64);
  const auto offset = torch::arange(n + k - 1, opts).unsqueeze(0) -
                      torch::arange(n, opts).unsqueeze(1);
  const auto inside = (offset >= 0) & (offset < k);
  return torch::where(inside, taps.index({offset.clamp(0, k - 1)}),
                      torch::zeros({}, taps.options()));
}

}  // namespace

torch::Tensor ssim_per_sample(const torch::Tensor& x, const torch::Tensor& y) {
  require_same(x, y, "ssim");
  if (x.dim() != 4) throw std::invalid_argument("ssim: expected B x C x H x W");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  // All five moment maps share one separable pass, written as two banded
  // matrix products (rows then columns) on the padded B x 5C stack.
  auto stack = torch::cat({x, y, x * x, y * y, x * y}, 1);
  stack = F::pad(stack, F::PadFuncOptions({5, 5, 5, 5}).mode(torch::kReplicate));
  const auto taps = gaussian_taps(x.scalar_type());
  stack = torch::matmul(banded(taps, h), stack);
  stack = torch::matmul(stack, banded(taps, w).t());
  auto m = stack.view({b, 5, c, h, w}).transpose(0, 1);
  auto mx = m[0], my = m[1];
  auto sxx = m[2] - mx * mx;
  auto syy = m[3] - my * my;
  auto sxy = m[4] - mx * my;
  auto map = ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) /
             ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean({1, 2, 3});
}

torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y) {
  return ssim_per_sample(x, y).mean();
}

// ------------------------------------------------------------ perceptual

RandomFeatureProvider::RandomFeatureProvider(std::uint64_t seed, int features,
                                             int scales)
    : seed_(seed) {
  for (int s = 0; s < scales; ++s) {
    detail::Rng rng(detail::mix_seed(seed, static_cast<std::uint64_t>(s)));
    std::vector<double> w(static_cast<std::size_t>(features) * 3 * 9);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    std::vector<double> b(static_cast<std::size_t>(features));
    for (double& v : b) v = rng.uniform(-0.1, 0.1);
    weights_.push_back(
        torch::tensor(w, torch::kFloat64).view({features, 3, 3, 3}));
    biases_.push_back(torch::tensor(b, torch::kFloat64));
  }
}

torch::Tensor RandomFeatureProvider::distance(const torch::Tensor& x,
                                              const torch::Tensor& y) const {
  require_same(x, y, "perceptual distance");
  auto features = [&](const torch::Tensor& t, std::size_t s) {
    auto f = torch::tanh(F::conv2d(
        t, weights_[s].to(t.scalar_type()),
        F::Conv2dFuncOptions().bias(biases_[s].to(t.scalar_type())).padding(1)));
    return f / torch::sqrt((f * f).sum(1, true) + 1e-10);
  };
  // Inputs move to [-1, 1] as LPIPS expects; x and y share each pass.
  const auto n = x.size(0);
  auto both = torch::cat({x, y}, 0) * 2.0 - 1.0;
  torch::Tensor total;
  int used = 0;
  for (std::size_t s = 0; s < weights_.size(); ++s) {
    if (s > 0) {
      if (both.size(2) < 4 || both.size(3) < 4) break;
      both = F::avg_pool2d(both, F::AvgPool2dFuncOptions(2));
    }
    auto f = features(both, s);
    auto d = (f.narrow(0, 0, n) - f.narrow(0, n, n)).pow(2).sum(1).mean({1, 2}) /
             4.0;
    total = total.defined() ? total + d : d;
    ++used;
  }
  return total / used;
}

std::string RandomFeatureProvider::name() const {
  return "random-features(seed=" + std::to_string(seed_) +
         ",scales=" + std::to_string(weights_.size()) + ")";
}

// ------------------------------------------------------------ image loss

torch::Tensor image_loss_per_sample(const torch::Tensor& pred,
                                    const torch::Tensor& gt,
                                    const LossConfig& config,
                                    const PerceptualProvider& perceptual) {
  require_same(pred, gt, "image_loss");
  auto loss = (pred - gt).abs().mean({1, 2, 3});
  if (config.use_ssim) loss = loss + (1.0 - ssim_per_sample(pred, gt));
  if (config.use_lpips) loss = loss + perceptual.distance(pred, gt);
  return loss;
}

torch::Tensor image_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                         const LossConfig& config,
                         const PerceptualProvider& perceptual) {
  return image_loss_per_sample(pred, gt, config, perceptual).mean();
}

// ----------------------------------------------------------------- light

torch::Tensor light_directions(const torch::Tensor& code) {
  if (code.dim() != 2 || code.size(1) != kLightEncodingSize) {
    throw std::invalid_argument("light code must be B x 7");
  }
  auto unit = [](const torch::Tensor& pair) {
    return pair / torch::sqrt((pair * pair).sum(1, true) + 1e-12);
  };
  auto pan = unit(code.narrow(1, 0, 2));   // (sin, cos)
  auto tilt = unit(code.narrow(1, 2, 2));  // (sin, cos)
  auto sp = pan.select(1, 0), cp = pan.select(1, 1);
  auto st = tilt.select(1, 0), ct = tilt.select(1, 1);
  return torch::stack({ct * cp, ct * sp, st}, 1);
}

torch::Tensor light_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  require_same(pred, gt, "light_loss");
  auto cosine = (light_directions(pred) * light_directions(gt)).sum(1);
  auto colour = (pred.narrow(1, 4, 3) - gt.narrow(1, 4, 3)).abs().mean();
  return (1.0 - cosine).mean() + colour;
}

torch::Tensor angular_error(const torch::Tensor& pred, const torch::Tensor& gt) {
  auto cosine = (light_directions(pred) * light_directions(gt)).sum(1);
  return torch::acos(torch::clamp(cosine, -1.0, 1.0));
}

// ------------------------------------------------------------------ UIID

double f_ac(double x, double alpha) {
  return x > 0.0 ? x + alpha : alpha * std::exp(x);
}

torch::Tensor f_ac(const torch::Tensor& x, double alpha) {
  // exp only sees non-positive values, so the unused branch cannot overflow.
  return torch::where(x > 0, x + alpha,
                      alpha * torch::exp(torch::clamp_max(x, 0.0)));
}

torch::Tensor opponent(const torch::Tensor& rgb) {
  if (rgb.dim() != 4 || rgb.size(1) != 3) {
    throw std::invalid_argument("opponent: expected B x 3 x H x W");
  }
  auto r = rgb.select(1, 0), g = rgb.select(1, 1), b = rgb.select(1, 2);
  return torch::stack({(r - g) * color::OpponentWeights::kInvSqrt2,
                       (r + g - 2.0 * b) * color::OpponentWeights::kInvSqrt6,
                       (r + g + b) * color::OpponentWeights::kInvSqrt3},
                      1);
}

torch::Tensor gradient_magnitude(const torch::Tensor& map, int channels) {
  if (map.dim() != 4 || map.size(2) < 2 || map.size(3) < 2) {
    throw std::invalid_argument("gradient_magnitude: need B x C x H x W, H, W >= 2");
  }
  auto m = map.narrow(1, 0, channels);
  auto dx = m.narrow(3, 1, m.size(3) - 1) - m.narrow(3, 0, m.size(3) - 1);
  auto dy = m.narrow(2, 1, m.size(2) - 1) - m.narrow(2, 0, m.size(2) - 1);
  // The last column/row repeats its backward difference.
  dx = torch::cat({dx, dx.narrow(3, dx.size(3) - 1, 1)}, 3);
  dy = torch::cat({dy, dy.narrow(2, dy.size(2) - 1, 1)}, 2);
  return (0.5 * (dx.abs() + dy.abs())).mean({1, 2, 3});
}

torch::Tensor scs_ratios(const torch::Tensor& shading,
                         const torch::Tensor& image, double epsilon) {
  require_same(shading, image, "loss_scs");
  auto s = opponent(shading);
  auto i = opponent(image);
  auto chroma = gradient_magnitude(s, 2) / (gradient_magnitude(i, 2) + epsilon);
  auto all = gradient_magnitude(s, 3) / (gradient_magnitude(i, 3) + epsilon);
  return torch::stack({chroma, all}, 1);
}

torch::Tensor loss_scs(const torch::Tensor& shading, const torch::Tensor& image,
                       const LossConfig& config) {
  auto r = scs_ratios(shading, image, config.epsilon);
  auto per = config.lambda1 * f_ac(r.select(1, 0) - config.k1, config.alpha) +
             config.lambda2 * f_ac(r.select(1, 1) - config.k2, config.alpha);
  return per.mean();
}

torch::Tensor loss_rc(const torch::Tensor& reflectance,
                      const torch::Tensor& reflectance_rev) {
  require_same(reflectance, reflectance_rev, "loss_rc");
  return (reflectance - reflectance_rev).abs().mean();
}

torch::Tensor loss_sc(const torch::Tensor& shading_ori,
                      const torch::Tensor& shading_ori_rev,
                      const torch::Tensor& shading_new,
                      const torch::Tensor& shading_new_rev) {
  require_same(shading_ori, shading_new_rev, "loss_sc");
  require_same(shading_ori_rev, shading_new, "loss_sc");
  return (shading_ori - shading_new_rev).abs().mean() +
         (shading_ori_rev - shading_new).abs().mean();
}

torch::Tensor loss_ir(const torch::Tensor& reflectance,
                      const torch::Tensor& relit_image,
                      const torch::Tensor& reflectance_rev,
                      const torch::Tensor& input_image, double mu) {
  require_same(reflectance, relit_image, "loss_ir");
  require_same(reflectance_rev, input_image, "loss_ir");
  return mu * ((reflectance - relit_image).abs().mean() +
               (reflectance_rev - input_image).abs().mean());
}

double mu_schedule(std::int64_t step, std::int64_t total_steps,
                   const LossConfig& config) {
  const double span = config.mu_decay_fraction * static_cast<double>(total_steps);
  if (span <= 0.0 || static_cast<double>(step) >= span) return config.mu_end;
  const double t = std::max(0.0, static_cast<double>(step) / span);
  return config.mu_start * std::pow(config.mu_end / config.mu_start, t);
}

torch::Tensor generator_adversarial(const torch::Tensor& fake_scores) {
  return (fake_scores - 1.0).pow(2).mean();
}

torch::Tensor discriminator_adversarial(const torch::Tensor& real_scores,
                                        const torch::Tensor& fake_scores) {
  return 0.5 * ((real_scores - 1.0).pow(2).mean() + fake_scores.pow(2).mean());
}

// ---------------------------------------------------------------- totals

namespace {

torch::Tensor rows(const torch::Tensor& t, std::int64_t begin,
                   std::int64_t count) {
  return t.defined() ? t.narrow(0, begin, count) : t;
}

void accumulate(Terms& terms, const std::string& name, const torch::Tensor& v) {
  auto it = terms.find(name);
  if (it == terms.end()) {
    terms.emplace(name, v);
  } else {
    it->second = it->second + v;
  }
}

void for_each_half(const Batch& batch,
                   const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (batch.cross()) {
    fn(0, batch.base_size);
    fn(batch.base_size, batch.base_size);
  } else {
    fn(0, batch.size());
  }
}

// Image terms of L_all (L_all* when `intrinsic` is false), each the sum of
// its per-half means. Every pair goes through one stacked loss evaluation.
void image_terms(Terms& terms, const LossInputs& in, bool intrinsic,
                 const LossConfig& config, const PerceptualProvider& perceptual) {
  const auto& o = in.outputs;
  const auto& b = in.batch;
  std::vector<std::string> names;
  std::vector<torch::Tensor> preds, gts;
  auto add = [&](const char* name, const torch::Tensor& pred,
                 const torch::Tensor& gt) {
    names.emplace_back(name);
    preds.push_back(pred);
    gts.push_back(gt.to(pred.scalar_type()));
  };
  add("relit", o.relit, b.targets);
  if (o.recon.defined()) add("recon", o.recon, b.inputs);
  if (intrinsic && o.reflectance.defined()) {
    add("reflectance", o.reflectance, b.gt_reflectance);
    add("shading_ori", o.shading_ori, b.gt_shading_ori);
    add("shading_new", o.shading_new, b.gt_shading_new);
  }
  const auto per = image_loss_per_sample(torch::cat(preds, 0),
                                         torch::cat(gts, 0), config, perceptual);
  const auto n = b.size();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto v = per.narrow(0, static_cast<std::int64_t>(k) * n, n);
    for_each_half(b, [&](std::int64_t begin, std::int64_t count) {
      accumulate(terms, names[k], v.narrow(0, begin, count).mean());
    });
  }
}

// Light and adversarial terms on one half.
void half_terms(Terms& terms, const LossInputs& in, std::int64_t begin,
                std::int64_t count, const LossConfig& config) {
  const auto& o = in.outputs;
  const auto& b = in.batch;
  if (o.light_ori.defined()) {
    accumulate(terms, "light",
               light_loss(rows(o.light_ori, begin, count),
                          rows(b.original_lights, begin, count)));
  }
  if (config.use_gan && in.fake_scores.defined()) {
    accumulate(terms, "gan",
               generator_adversarial(rows(in.fake_scores, begin, count)));
  }
}

double weight_of(const std::string& name, const LossWeights& w) {
  static const std::map<std::string, double LossWeights::*> table = {
      {"relit", &LossWeights::relit},
      {"recon", &LossWeights::recon},
      {"reflectance", &LossWeights::reflectance},
      {"shading_ori", &LossWeights::shading_ori},
      {"shading_new", &LossWeights::shading_new},
      {"light", &LossWeights::light},
      {"gan", &LossWeights::gan},
      {"rc", &LossWeights::rc},
      {"sc", &LossWeights::sc},
      {"scs", &LossWeights::scs},
      {"ir", &LossWeights::ir}};
  return w.*table.at(name);
}

void finish(Terms& terms, const LossConfig& config) {
  torch::Tensor total;
  for (const auto& [name, value] : terms) {
    auto v = weight_of(name, config.weights) * value;
    total = total.defined() ? total + v : v;
  }
  terms["total"] = total;
}

}  // namespace

Terms total_supervised(const LossInputs& in, const LossConfig& config,
                       const PerceptualProvider& perceptual) {
  const bool intrinsic = config.use_intrinsic_gt && in.batch.has_intrinsics();
  Terms terms;
  image_terms(terms, in, intrinsic, config, perceptual);
  for_each_half(in.batch, [&](std::int64_t begin, std::int64_t count) {
    half_terms(terms, in, begin, count, config);
  });
  finish(terms, config);
  return terms;
}

Terms total_unsupervised(const LossInputs& in, const LossConfig& config,
                         const PerceptualProvider& perceptual) {
  const auto& o = in.outputs;
  const auto& b = in.batch;
  if (!b.cross()) {
    throw net::ConfigError("unsupervised objective needs a cross-relighting batch");
  }
  if (!o.reflectance.defined()) {
    throw net::ConfigError("unsupervised objective needs the two-stage model");
  }
  Terms terms;
  image_terms(terms, in, false, config, perceptual);
  for_each_half(b, [&](std::int64_t begin, std::int64_t count) {
    half_terms(terms, in, begin, count, config);
  });
  const auto n = b.base_size;
  auto fwd = [&](const torch::Tensor& t) { return rows(t, 0, n); };
  auto rev = [&](const torch::Tensor& t) { return rows(t, n, n); };
  if (config.use_rc) terms["rc"] = loss_rc(fwd(o.reflectance), rev(o.reflectance));
  if (config.use_sc) {
    terms["sc"] = loss_sc(fwd(o.shading_ori), rev(o.shading_ori),
                          fwd(o.shading_new), rev(o.shading_new));
  }
  if (config.use_scs) {
    terms["scs"] = loss_scs(fwd(o.shading_ori), fwd(b.inputs), config) +
                   loss_scs(rev(o.shading_ori), rev(b.inputs), config);
  }
  if (config.use_ir) {
    terms["ir"] = loss_ir(fwd(o.reflectance), fwd(b.targets),
                          rev(o.reflectance), fwd(b.inputs), in.mu);
  }
  finish(terms, config);
  return terms;
}

}  // namespace relight::losses

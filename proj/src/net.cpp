#include "relight/net.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "relight/io.hpp"

namespace relight::net {

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using json = nlohmann::json;

// ---------------------------------------------------------------- config

std::vector<std::string> ModelConfig::check() const {
  std::vector<std::string> out;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };
  need(base_channels >= 1, "base_channels must be >= 1");
  need(bottleneck_channels >= 2 && bottleneck_channels % 2 == 0,
       "bottleneck_channels must be even and >= 2");
  need(light_feature_channels >= 1 &&
           light_feature_channels < bottleneck_channels,
       "light_feature_channels must be in [1, bottleneck_channels)");
  need(stage1_shared_blocks >= 1, "stage1_shared_blocks must be >= 1");
  need(stage1_branch_blocks >= 1, "stage1_branch_blocks must be >= 1");
  need(stage2_pre_blocks >= 1, "stage2_pre_blocks must be >= 1");
  need(stage2_post_blocks >= 1, "stage2_post_blocks must be >= 1");
  need(image_size >= 16 && image_size % 16 == 0,
       "image_size must be a positive multiple of 16");
  need(probe_size >= 8, "probe_size must be >= 8");
  need(discriminator_channels >= 1, "discriminator_channels must be >= 1");
  return out;
}

void ModelConfig::require_valid() const {
  const auto problems = check();
  if (problems.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw ConfigError(msg);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"base_channels", c.base_channels},
           {"bottleneck_channels", c.bottleneck_channels},
           {"stage1_shared_blocks", c.stage1_shared_blocks},
           {"stage1_branch_blocks", c.stage1_branch_blocks},
           {"stage2_pre_blocks", c.stage2_pre_blocks},
           {"stage2_post_blocks", c.stage2_post_blocks},
           {"light_feature_channels", c.light_feature_channels},
           {"use_nonlocal", c.use_nonlocal},
           {"use_two_stage", c.use_two_stage},
           {"light_variant",
            c.light_variant == LightVariant::vector ? "vector" : "probe"},
           {"backbone", c.backbone == Backbone::resnet ? "resnet" : "unet"},
           {"image_size", c.image_size},
           {"probe_size", c.probe_size},
           {"discriminator_channels", c.discriminator_channels}};
}

void from_json(const json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  ModelConfig d;
  c.base_channels = j.value("base_channels", d.base_channels);
  c.bottleneck_channels = j.value("bottleneck_channels", d.bottleneck_channels);
  c.stage1_shared_blocks =
      j.value("stage1_shared_blocks", d.stage1_shared_blocks);
  c.stage1_branch_blocks =
      j.value("stage1_branch_blocks", d.stage1_branch_blocks);
  c.stage2_pre_blocks = j.value("stage2_pre_blocks", d.stage2_pre_blocks);
  c.stage2_post_blocks = j.value("stage2_post_blocks", d.stage2_post_blocks);
  c.light_feature_channels =
      j.value("light_feature_channels", d.light_feature_channels);
  c.use_nonlocal = j.value("use_nonlocal", d.use_nonlocal);
  c.use_two_stage = j.value("use_two_stage", d.use_two_stage);
  const std::string variant = j.value("light_variant", std::string("vector"));
  if (variant == "vector") {
    c.light_variant = LightVariant::vector;
  } else if (variant == "probe") {
    c.light_variant = LightVariant::probe;
  } else {
    throw ConfigError("light_variant must be \"vector\" or \"probe\", got \"" +
                      variant + "\"");
  }
  const std::string backbone = j.value("backbone", std::string("resnet"));
  if (backbone == "resnet") {
    c.backbone = Backbone::resnet;
  } else if (backbone == "unet") {
    c.backbone = Backbone::unet;
  } else {
    throw ConfigError("backbone must be \"resnet\" or \"unet\", got \"" +
                      backbone + "\"");
  }
  c.image_size = j.value("image_size", d.image_size);
  c.probe_size = j.value("probe_size", d.probe_size);
  c.discriminator_channels =
      j.value("discriminator_channels", d.discriminator_channels);
}

// ---------------------------------------------------------------- blocks

namespace {

std::int64_t conv_out(int n, int kernel, int stride, int pad) {
  return (n + 2 * pad - kernel) / stride + 1;
}

std::int64_t conv_macs(int in, int out, int kernel, std::int64_t oh,
                       std::int64_t ow) {
  return static_cast<std::int64_t>(in) * out * kernel * kernel * oh * ow;
}

}  // namespace

ConvBlockImpl::ConvBlockImpl(int in, int out, int kernel, int stride, bool relu)
    : in_(in), out_(out), kernel_(kernel), stride_(stride), relu_(relu) {
  conv_ = register_module(
      "conv", nn::Conv2d(nn::Conv2dOptions(in, out, kernel)
                             .stride(stride)
                             .padding(kernel / 2)
                             .bias(false)));
  norm_ = register_module("norm", nn::BatchNorm2d(out));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) {
  auto y = norm_(conv_(x));
  return relu_ ? torch::relu(y) : y;
}

std::int64_t ConvBlockImpl::macs(int h, int w) const {
  return conv_macs(in_, out_, kernel_, conv_out(h, kernel_, stride_, kernel_ / 2),
                   conv_out(w, kernel_, stride_, kernel_ / 2));
}

UpBlockImpl::UpBlockImpl(int in, int out) : in_(in), out_(out) {
  conv_ = register_module(
      "conv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 3)
                                      .stride(2)
                                      .padding(1)
                                      .output_padding(1)
                                      .bias(false)));
  norm_ = register_module("norm", nn::BatchNorm2d(out));
}

torch::Tensor UpBlockImpl::forward(const torch::Tensor& x) {
  return torch::relu(norm_(conv_(x)));
}

std::int64_t UpBlockImpl::macs(int h, int w) const {
  // Every input pixel scatters a 3x3 kernel.
  return conv_macs(in_, out_, 3, h, w);
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  first_ = register_module("first", ConvBlock(channels, channels, 3, 1, true));
  second_ = register_module("second", ConvBlock(channels, channels, 3, 1, false));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  return x + second_(first_(x));
}

std::int64_t ResidualBlockImpl::macs(int h, int w) const {
  return first_->macs(h, w) + second_->macs(h, w);
}

NonLocalBlockImpl::NonLocalBlockImpl(int channels)
    : channels_(channels), inner_(std::max(1, channels / 2)) {
  auto one = [](int in, int out) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, 1));
  };
  theta_ = register_module("theta", one(channels, inner_));
  phi_ = register_module("phi", one(channels, inner_));
  g_ = register_module("g", one(channels, inner_));
  out_ = register_module("out", one(inner_, channels));
  torch::NoGradGuard guard;
  out_->weight.zero_();
  out_->bias.zero_();
}

torch::Tensor NonLocalBlockImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), h = x.size(2), w = x.size(3);
  const auto n = h * w;
  auto theta = theta_(x).view({b, inner_, n}).transpose(1, 2);  // B x N x C'
  auto phi = phi_(x).view({b, inner_, n});                      // B x C' x N
  auto g = g_(x).view({b, inner_, n}).transpose(1, 2);          // B x N x C'
  auto attention = torch::softmax(torch::bmm(theta, phi), -1);  // B x N x N
  auto y = torch::bmm(attention, g).transpose(1, 2).reshape({b, inner_, h, w});
  return x + out_(y);
}

std::int64_t NonLocalBlockImpl::macs(int h, int w) const {
  const std::int64_t n = static_cast<std::int64_t>(h) * w;
  return 3 * conv_macs(channels_, inner_, 1, h, w) + 2 * n * n * inner_ +
         conv_macs(inner_, channels_, 1, h, w);
}

ResidualStackImpl::ResidualStackImpl(int channels, int blocks,
                                     int nonlocal_after, bool residual) {
  auto add_nonlocal = [&] {
    NonLocalBlock nl(channels);
    body_->push_back(nl);
    costs_.push_back([nl](int h, int w) { return nl->macs(h, w); });
    ++nonlocal_count_;
  };
  for (int i = 0; i < blocks; ++i) {
    if (residual) {
      ResidualBlock block(channels);
      body_->push_back(block);
      costs_.push_back([block](int h, int w) { return block->macs(h, w); });
    } else {
      ConvBlock block(channels, channels, 3);
      body_->push_back(block);
      costs_.push_back([block](int h, int w) { return block->macs(h, w); });
    }
    if (i + 1 == nonlocal_after) add_nonlocal();
  }
  register_module("body", body_);
}

torch::Tensor ResidualStackImpl::forward(torch::Tensor x) {
  return body_->forward(x);
}

std::int64_t ResidualStackImpl::macs(int h, int w) const {
  std::int64_t total = 0;
  for (const auto& cost : costs_) total += cost(h, w);
  return total;
}

EncoderImpl::EncoderImpl(int in, int base, int bottleneck) {
  c1_ = register_module("c1", ConvBlock(in, base, 7, 1));
  c2_ = register_module("c2", ConvBlock(base, 2 * base, 3, 2));
  c3_ = register_module("c3", ConvBlock(2 * base, bottleneck, 3, 2));
}

Features EncoderImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(2) % 4 != 0 || x.size(3) % 4 != 0) {
    throw ConfigError("encoder input must be B x C x H x W with H and W "
                      "divisible by 4");
  }
  Features f;
  f.full = c1_(x);
  f.half = c2_(f.full);
  f.bottleneck = c3_(f.half);
  return f;
}

std::int64_t EncoderImpl::macs(int h, int w) const {
  return c1_->macs(h, w) + c2_->macs(h, w) + c3_->macs(h / 2, w / 2);
}

DecoderImpl::DecoderImpl(int in, int base, Head head, bool skip)
    : in_(in), base_(base), head_(head), skip_(skip) {
  up1_ = register_module("up1", UpBlock(in, 2 * base));
  up2_ = register_module("up2", UpBlock(skip ? 4 * base : 2 * base, base));
  last_ = register_module(
      "last", nn::Conv2d(nn::Conv2dOptions(skip ? 2 * base : base, 3, 7)
                             .padding(3)));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& x,
                                   const Features& skips) {
  auto y = up1_(x);
  if (skip_) y = torch::cat({y, skips.half}, 1);
  y = up2_(y);
  if (skip_) y = torch::cat({y, skips.full}, 1);
  y = last_(y);
  return head_ == Head::logistic ? torch::sigmoid(y) : F::softplus(y);
}

std::int64_t DecoderImpl::macs(int h, int w) const {
  const int c2 = skip_ ? 4 * base_ : 2 * base_;
  const int c3 = skip_ ? 2 * base_ : base_;
  return conv_macs(in_, 2 * base_, 3, h / 4, w / 4) +
         conv_macs(c2, base_, 3, h / 2, w / 2) + conv_macs(c3, 3, 7, h, w);
}

// ---------------------------------------------------------------- stages

Stage1Impl::Stage1Impl(const ModelConfig& config) : config_(config) {
  config.require_valid();
  const bool res = config.backbone == Backbone::resnet;
  const bool skip = !res;
  const int c = config.bottleneck_channels;
  encoder_ = register_module(
      "encoder", Encoder(3, config.base_channels, c));
  shared_ = register_module(
      "shared", ResidualStack(c, config.stage1_shared_blocks, -1, res));
  reflectance_blocks_ = register_module(
      "reflectance_blocks",
      ResidualStack(c / 2, config.stage1_branch_blocks, -1, res));
  shading_blocks_ = register_module(
      "shading_blocks",
      ResidualStack(c / 2, config.stage1_branch_blocks, -1, res));
  reflectance_decoder_ = register_module(
      "reflectance_decoder",
      Decoder(c / 2, config.base_channels, Head::logistic, skip));
  shading_decoder_ = register_module(
      "shading_decoder",
      Decoder(c / 2, config.base_channels, Head::softplus, skip));
}

Stage1Impl::Output Stage1Impl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw ConfigError("stage 1 expects a B x 3 x H x W image");
  }
  const Features f = encoder_(image);
  auto halves = shared_(f.bottleneck).chunk(2, 1);
  Output out;
  out.bottleneck = f.bottleneck;
  out.reflectance = reflectance_decoder_(reflectance_blocks_(halves[0]), f);
  out.shading = shading_decoder_(shading_blocks_(halves[1]), f);
  return out;
}

std::int64_t Stage1Impl::macs(int h, int w) const {
  const int qh = h / 4, qw = w / 4;
  return encoder_->macs(h, w) + shared_->macs(qh, qw) +
         reflectance_blocks_->macs(qh, qw) + shading_blocks_->macs(qh, qw) +
         reflectance_decoder_->macs(h, w) + shading_decoder_->macs(h, w);
}

LightReplaceVectorImpl::LightReplaceVectorImpl(int light_channels,
                                               int feature_size)
    : light_channels_(light_channels),
      feature_size_(feature_size),
      seed_size_(feature_size / 4) {
  if (feature_size < 4 || feature_size % 4 != 0) {
    throw ConfigError("vector light replacement needs a bottleneck grid "
                      "divisible by 4");
  }
  const int c = light_channels;
  auto down = [c] {
    return nn::Conv2d(nn::Conv2dOptions(c, c, 3).stride(2).padding(1));
  };
  auto up = [c] {
    return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c, c, 3)
                                   .stride(2)
                                   .padding(1)
                                   .output_padding(1));
  };
  est1_ = register_module("est1", down());
  est2_ = register_module("est2", down());
  est_fc_ = register_module("est_fc", nn::Linear(c, kLightEncodingSize));
  expand_fc_ = register_module(
      "expand_fc",
      nn::Linear(kLightEncodingSize, c * seed_size_ * seed_size_));
  up1_ = register_module("up1", up());
  up2_ = register_module("up2", up());
}

torch::Tensor LightReplaceVectorImpl::estimate(const torch::Tensor& light_feat) {
  auto y = torch::relu(est2_(torch::relu(est1_(light_feat))));
  y = est_fc_(y.mean({2, 3}));
  // Angle pairs stay raw (the loss renormalizes them); color is squashed.
  return torch::cat({y.narrow(1, 0, 4), torch::sigmoid(y.narrow(1, 4, 3))}, 1);
}

torch::Tensor LightReplaceVectorImpl::expand(const torch::Tensor& new_light) {
  if (new_light.dim() != 2 || new_light.size(1) != kLightEncodingSize) {
    throw ConfigError("target light must be B x 7");
  }
  auto y = torch::relu(expand_fc_(new_light))
               .view({new_light.size(0), light_channels_, seed_size_,
                      seed_size_});
  return up2_(torch::relu(up1_(y)));
}

LightReplaceVectorImpl::Output LightReplaceVectorImpl::forward(
    const torch::Tensor& scene_feat, const torch::Tensor& light_feat,
    const torch::Tensor& new_light) {
  if (light_feat.size(1) != light_channels_ ||
      light_feat.size(2) != feature_size_ ||
      light_feat.size(3) != feature_size_) {
    throw ConfigError("light features must be B x " +
                      std::to_string(light_channels_) + " x " +
                      std::to_string(feature_size_) + " x " +
                      std::to_string(feature_size_));
  }
  if (new_light.size(0) != scene_feat.size(0)) {
    throw ConfigError("target light batch differs from the feature batch");
  }
  return {torch::cat({scene_feat, expand(new_light)}, 1), estimate(light_feat)};
}

std::int64_t LightReplaceVectorImpl::macs() const {
  const int c = light_channels_;
  const int f = feature_size_;
  return conv_macs(c, c, 3, f / 2, f / 2) + conv_macs(c, c, 3, f / 4, f / 4) +
         static_cast<std::int64_t>(c) * kLightEncodingSize +
         static_cast<std::int64_t>(kLightEncodingSize) * c * seed_size_ *
             seed_size_ +
         conv_macs(c, c, 3, seed_size_, seed_size_) +
         conv_macs(c, c, 3, 2 * seed_size_, 2 * seed_size_);
}

LightReplaceProbeImpl::LightReplaceProbeImpl(int light_channels,
                                             int feature_size)
    : light_channels_(light_channels), feature_size_(feature_size) {
  conv_ = register_module("conv", ConvBlock(6, light_channels, 3));
  res1_ = register_module("res1", ResidualBlock(light_channels));
  res2_ = register_module("res2", ResidualBlock(light_channels));
}

torch::Tensor LightReplaceProbeImpl::encode(const torch::Tensor& probe) {
  if (probe.dim() != 4 || probe.size(1) != 6) {
    throw ConfigError("probe input must be B x 6 x P x P (chrome, gray)");
  }
  return res2_(res1_(conv_(probe)));
}

torch::Tensor LightReplaceProbeImpl::forward(const torch::Tensor& scene_feat,
                                             const torch::Tensor& probe) {
  auto code = encode(probe);
  if (code.size(0) != scene_feat.size(0)) {
    throw ConfigError("probe batch differs from the feature batch");
  }
  const auto h = scene_feat.size(2), w = scene_feat.size(3);
  if (code.size(2) != h || code.size(3) != w) {
    code = F::interpolate(code, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{h, w})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
  }
  return torch::cat({scene_feat, code}, 1);
}

std::int64_t LightReplaceProbeImpl::macs(int probe_size) const {
  return conv_->macs(probe_size, probe_size) +
         res1_->macs(probe_size, probe_size) +
         res2_->macs(probe_size, probe_size);
}

Stage2Impl::Stage2Impl(const ModelConfig& config) : config_(config) {
  config.require_valid();
  const bool res = config.backbone == Backbone::resnet;
  const bool nonlocal = config.use_nonlocal && res;
  const int c = config.bottleneck_channels;
  encoder_ = register_module("encoder", Encoder(3, config.base_channels, c));
  // Non-local blocks sit between residual blocks 3|4 before the light
  // embedding and 1|2 after it (clamped for shorter stacks).
  pre_ = register_module(
      "pre", ResidualStack(c, config.stage2_pre_blocks,
                           nonlocal ? std::min(3, config.stage2_pre_blocks) : -1,
                           res));
  post_ = register_module(
      "post", ResidualStack(c, config.stage2_post_blocks, nonlocal ? 1 : -1,
                            res));
  const int grid = config.image_size / 4;
  if (config.light_variant == LightVariant::vector) {
    vector_ = register_module(
        "light_vector",
        LightReplaceVector(config.light_feature_channels, grid));
  } else {
    probe_ = register_module(
        "light_probe", LightReplaceProbe(config.light_feature_channels, grid));
  }
  decoder_ = register_module(
      "decoder",
      Decoder(c, config.base_channels,
              config.use_two_stage ? Head::softplus : Head::logistic, !res));
}

Stage2Impl::Output Stage2Impl::forward(const torch::Tensor& shading,
                                       const LightInput& light) {
  const bool vector = config_.light_variant == LightVariant::vector;
  if (vector && light.probe.defined()) {
    throw ConfigError("probe light given to a vector-variant model");
  }
  if (!vector && light.vector.defined()) {
    throw ConfigError("light vector given to a probe-variant model");
  }
  if (vector && !light.vector.defined()) {
    throw ConfigError("vector-variant model needs a B x 7 target light");
  }
  if (!vector && !light.probe.defined()) {
    throw ConfigError("probe-variant model needs a B x 6 x P x P probe pair");
  }
  if (shading.dim() != 4 || shading.size(1) != 3) {
    throw ConfigError("stage 2 expects a B x 3 x H x W map");
  }
  if (vector && (shading.size(2) != config_.image_size ||
                 shading.size(3) != config_.image_size)) {
    throw ConfigError("vector-variant model is built for " +
                      std::to_string(config_.image_size) + "x" +
                      std::to_string(config_.image_size) + " inputs");
  }
  const Features f = encoder_(shading);
  auto feat = pre_(f.bottleneck);
  const int cl = config_.light_feature_channels;
  const int cs = config_.bottleneck_channels - cl;
  auto scene = feat.narrow(1, 0, cs);
  Output out;
  if (vector) {
    auto r = vector_(scene, feat.narrow(1, cs, cl), light.vector);
    feat = r.fused;
    out.light_ori = r.light_ori;
  } else {
    feat = probe_(scene, light.probe);
  }
  out.shading_new = decoder_(post_(feat), f);
  return out;
}

std::int64_t Stage2Impl::macs(int h, int w) const {
  const int qh = h / 4, qw = w / 4;
  std::int64_t total = encoder_->macs(h, w) + pre_->macs(qh, qw) +
                       post_->macs(qh, qw) + decoder_->macs(h, w);
  total += vector_ ? vector_->macs() : probe_->macs(config_.probe_size);
  return total;
}

int Stage2Impl::nonlocal_count() const {
  return pre_->nonlocal_count() + post_->nonlocal_count();
}

RelightModelImpl::RelightModelImpl(const ModelConfig& config)
    : config_(config) {
  config.require_valid();
  if (config.use_two_stage) stage1_ = register_module("stage1", Stage1(config));
  stage2_ = register_module("stage2", Stage2(config));
}

StageOutputs RelightModelImpl::forward(const torch::Tensor& image,
                                       const LightInput& light) {
  StageOutputs out;
  if (!config_.use_two_stage) {
    auto s2 = stage2_(image, light);
    out.shading_new = s2.shading_new;
    out.light_ori = s2.light_ori;
    out.relit = s2.shading_new;
    return out;
  }
  auto s1 = stage1_(image);
  auto s2 = stage2_(s1.shading, light);
  out.reflectance = s1.reflectance;
  out.shading_ori = s1.shading;
  out.shading_new = s2.shading_new;
  out.light_ori = s2.light_ori;
  out.relit = torch::clamp(out.reflectance * out.shading_new, 0.0, 1.0);
  out.recon = torch::clamp(out.reflectance * out.shading_ori, 0.0, 1.0);
  return out;
}

Complexity RelightModelImpl::complexity() const {
  const int s = config_.image_size;
  Complexity c;
  c.parameters = parameter_count(*this);
  c.macs = stage2_->macs(s, s) + (stage1_ ? stage1_->macs(s, s) : 0);
  return c;
}

int RelightModelImpl::nonlocal_count() const {
  return stage2_->nonlocal_count();
}

StageOutputs forward_relight(RelightModel& model, const torch::Tensor& image,
                             const LightInput& light) {
  return model->forward(image, light);
}

// ---------------------------------------------------------- discriminator

DiscriminatorImpl::DiscriminatorImpl(int channels) : channels_(channels) {
  const int d = channels;
  auto conv = [](int in, int out, int stride) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(stride).padding(1));
  };
  auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
  body_->push_back(conv(6, d, 2));
  body_->push_back(lrelu());
  body_->push_back(conv(d, 2 * d, 2));
  body_->push_back(nn::BatchNorm2d(2 * d));
  body_->push_back(lrelu());
  body_->push_back(conv(2 * d, 4 * d, 2));
  body_->push_back(nn::BatchNorm2d(4 * d));
  body_->push_back(lrelu());
  body_->push_back(conv(4 * d, 8 * d, 1));
  body_->push_back(nn::BatchNorm2d(8 * d));
  body_->push_back(lrelu());
  body_->push_back(conv(8 * d, 1, 1));
  register_module("body", body_);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& input,
                                         const torch::Tensor& candidate) {
  return body_->forward(torch::cat({input, candidate}, 1));
}

Complexity DiscriminatorImpl::complexity(int h, int w) const {
  const int d = channels_;
  const int plan[5][3] = {{6, d, 2}, {d, 2 * d, 2}, {2 * d, 4 * d, 2},
                          {4 * d, 8 * d, 1}, {8 * d, 1, 1}};
  Complexity c;
  c.parameters = parameter_count(*this);
  std::int64_t ih = h, iw = w;
  for (const auto& layer : plan) {
    ih = conv_out(static_cast<int>(ih), 4, layer[2], 1);
    iw = conv_out(static_cast<int>(iw), 4, layer[2], 1);
    c.macs += conv_macs(layer[0], layer[1], 4, ih, iw);
  }
  return c;
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

// ------------------------------------------------------------- archives

namespace {

static_assert(std::endian::native == std::endian::little,
              "archives are written in host byte order");

constexpr char kArchiveMagic[8] = {'R', 'L', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kArchiveVersion = 1;
constexpr int kCheckpointSchema = 1;

std::string dtype_name(torch::Dtype t) {
  if (t == torch::kFloat32) return "float32";
  if (t == torch::kFloat64) return "float64";
  if (t == torch::kInt64) return "int64";
  throw ConfigError("archive: unsupported tensor dtype");
}

torch::Dtype dtype_from(const std::string& name) {
  if (name == "float32") return torch::kFloat32;
  if (name == "float64") return torch::kFloat64;
  if (name == "int64") return torch::kInt64;
  throw io::DataError("archive: unknown dtype \"" + name + "\"");
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > in.size()) {
    throw io::DataError("archive " + path + ": truncated header");
  }
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_archive(const std::filesystem::path& path,
                  const TensorArchive& archive) {
  json header = archive.header;
  json table = json::array();
  std::string payload;
  for (const auto& [name, tensor] : archive.tensors) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    const std::size_t bytes = t.numel() * t.element_size();
    table.push_back({{"name", name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", payload.size()},
                     {"bytes", bytes}});
    payload.append(static_cast<const char*>(t.data_ptr()), bytes);
  }
  header["tensors"] = table;
  const std::string text = header.dump();
  std::string out(kArchiveMagic, sizeof(kArchiveMagic));
  put<std::uint32_t>(out, kArchiveVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out += payload;
  io::write_file(path, std::vector<std::uint8_t>(out.begin(), out.end()));
}

TensorArchive load_archive(const std::filesystem::path& path) {
  const auto raw = io::read_file(path);
  const std::string bytes(raw.begin(), raw.end());
  const std::string where = path.string();
  if (bytes.size() < sizeof(kArchiveMagic) ||
      std::memcmp(bytes.data(), kArchiveMagic, sizeof(kArchiveMagic)) != 0) {
    throw io::DataError("archive " + where + ": bad magic");
  }
  std::size_t pos = sizeof(kArchiveMagic);
  const auto version = take<std::uint32_t>(bytes, pos, where);
  if (version != kArchiveVersion) {
    throw io::SchemaError("archive " + where + ": format version " +
                              std::to_string(version) + ", expected " +
                              std::to_string(kArchiveVersion),
                          static_cast<int>(version),
                          static_cast<int>(kArchiveVersion));
  }
  const auto length = take<std::uint64_t>(bytes, pos, where);
  if (pos + length > bytes.size()) {
    throw io::DataError("archive " + where + ": truncated header");
  }
  TensorArchive archive;
  try {
    archive.header = json::parse(bytes.substr(pos, length));
  } catch (const json::exception& e) {
    throw io::DataError("archive " + where + ": header: " + e.what());
  }
  pos += length;
  const std::size_t base = pos;
  for (const auto& entry : archive.header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto dtype = dtype_from(entry.at("dtype").get<std::string>());
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto size = entry.at("bytes").get<std::size_t>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    if (static_cast<std::size_t>(t.numel() * t.element_size()) != size ||
        base + offset + size > bytes.size()) {
      throw io::DataError("archive " + where + ": tensor \"" + name +
                          "\" is truncated or mis-sized");
    }
    std::memcpy(t.data_ptr(), bytes.data() + base + offset, size);
    archive.tensors.emplace(name, t);
  }
  archive.header.erase("tensors");
  return archive;
}

void export_state(const torch::nn::Module& module, const std::string& prefix,
                  std::map<std::string, torch::Tensor>& out) {
  for (const auto& p : module.named_parameters(true)) {
    out[prefix + p.key()] = p.value().detach().clone();
  }
  for (const auto& b : module.named_buffers(true)) {
    out[prefix + b.key()] = b.value().detach().clone();
  }
}

void import_state(torch::nn::Module& module, const std::string& prefix,
                  const std::map<std::string, torch::Tensor>& in) {
  torch::NoGradGuard guard;
  auto assign = [&](const std::string& name, torch::Tensor& target) {
    const auto it = in.find(prefix + name);
    if (it == in.end()) {
      throw ConfigError("checkpoint lacks tensor \"" + prefix + name + "\"");
    }
    if (it->second.sizes() != target.sizes()) {
      throw ConfigError("checkpoint tensor \"" + prefix + name +
                        "\" has a different shape");
    }
    target.copy_(it->second);
  };
  for (auto& p : module.named_parameters(true)) assign(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) assign(b.key(), b.value());
}

void save_model(const std::filesystem::path& path, RelightModel& model) {
  TensorArchive archive;
  archive.header = {{"schema_version", kCheckpointSchema},
                    {"kind", "relight-checkpoint"},
                    {"model_config", model->config()}};
  export_state(*model, "model.", archive.tensors);
  save_archive(path, archive);
}

namespace {

ModelConfig stored_config(const TensorArchive& archive,
                          const std::filesystem::path& path) {
  const int schema = archive.header.value("schema_version", -1);
  if (schema != kCheckpointSchema) {
    throw io::SchemaError("checkpoint " + path.string() + ": schema_version " +
                              std::to_string(schema) + ", expected " +
                              std::to_string(kCheckpointSchema),
                          schema, kCheckpointSchema);
  }
  return archive.header.at("model_config").get<ModelConfig>();
}

}  // namespace

RelightModel load_model(const std::filesystem::path& path) {
  const auto archive = load_archive(path);
  RelightModel model(stored_config(archive, path));
  import_state(*model, "model.", archive.tensors);
  model->eval();
  return model;
}

RelightModel load_model(const std::filesystem::path& path,
                        const ModelConfig& expected) {
  const auto archive = load_archive(path);
  const ModelConfig stored = stored_config(archive, path);
  if (!(stored == expected)) {
    throw ConfigError("checkpoint " + path.string() +
                      " was built with a different model config: stored " +
                      json(stored).dump() + ", expected " +
                      json(expected).dump());
  }
  RelightModel model(stored);
  import_state(*model, "model.", archive.tensors);
  model->eval();
  return model;
}

std::string checkpoint_id(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace relight::net

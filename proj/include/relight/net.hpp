#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "relight/core.hpp"

namespace relight::net {

/// Rejected configuration or an input the configured graph cannot take.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Backbone : std::uint8_t { resnet = 0, unet = 1 };

struct ModelConfig {
  int base_channels = 64;
  int bottleneck_channels = 256;
  int stage1_shared_blocks = 4;
  int stage1_branch_blocks = 5;
  int stage2_pre_blocks = 4;
  int stage2_post_blocks = 5;
  int light_feature_channels = 32;
  bool use_nonlocal = true;
  bool use_two_stage = true;
  LightVariant light_variant = LightVariant::vector;
  Backbone backbone = Backbone::resnet;
  int image_size = 256;
  int probe_size = 64;
  int discriminator_channels = 64;

  /// Empty iff the configuration can be built.
  [[nodiscard]] std::vector<std::string> check() const;
  /// Throws ConfigError listing every problem from check().
  void require_valid() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct Complexity {
  std::int64_t parameters = 0;
  std::int64_t macs = 0;
  Complexity& operator+=(const Complexity& o) {
    parameters += o.parameters;
    macs += o.macs;
    return *this;
  }
};

/// Conv -> BatchNorm -> ReLU, "same" padding for odd kernels.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int in, int out, int kernel, int stride = 1, bool relu = true);
  torch::Tensor forward(const torch::Tensor& x);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d norm_{nullptr};
  int in_, out_, kernel_, stride_;
  bool relu_;
};
TORCH_MODULE(ConvBlock);

/// 3x3 stride-2 transposed conv -> BatchNorm -> ReLU; doubles H and W.
class UpBlockImpl : public torch::nn::Module {
 public:
  UpBlockImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  torch::nn::ConvTranspose2d conv_{nullptr};
  torch::nn::BatchNorm2d norm_{nullptr};
  int in_, out_;
};
TORCH_MODULE(UpBlock);

/// x + BN(conv(ReLU(BN(conv(x))))), channel count preserved.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  ConvBlock first_{nullptr};
  ConvBlock second_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Embedded-Gaussian self-attention over all H*W positions with a residual
/// connection. The output projection starts at zero, so a fresh block is the
/// identity.
class NonLocalBlockImpl : public torch::nn::Module {
 public:
  explicit NonLocalBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  torch::nn::Conv2d theta_{nullptr}, phi_{nullptr}, g_{nullptr}, out_{nullptr};
  int channels_, inner_;
};
TORCH_MODULE(NonLocalBlock);

/// Residual stack with an optional non-local block inserted after
/// `nonlocal_after` residual blocks (-1: none).
class ResidualStackImpl : public torch::nn::Module {
 public:
  ResidualStackImpl(int channels, int blocks, int nonlocal_after,
                    bool residual = true);
  torch::Tensor forward(torch::Tensor x);
  [[nodiscard]] std::int64_t macs(int h, int w) const;
  [[nodiscard]] int nonlocal_count() const { return nonlocal_count_; }

 private:
  torch::nn::Sequential body_;
  std::vector<std::function<std::int64_t(int, int)>> costs_;
  int nonlocal_count_ = 0;
};
TORCH_MODULE(ResidualStack);

/// Skip tensors kept by the encoder for the U-Net backbone.
struct Features {
  torch::Tensor bottleneck;  // bottleneck_channels x H/4 x W/4
  torch::Tensor full;        // base x H x W
  torch::Tensor half;        // 2*base x H/2 x W/2
};

/// 7x7 stride 1, 3x3 stride 2, 3x3 stride 2.
class EncoderImpl : public torch::nn::Module {
 public:
  EncoderImpl(int in, int base, int bottleneck);
  Features forward(const torch::Tensor& x);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  ConvBlock c1_{nullptr}, c2_{nullptr}, c3_{nullptr};
};
TORCH_MODULE(Encoder);

enum class Head : std::uint8_t { logistic, softplus };

/// Two upsampling blocks and a final 7x7 conv to 3 channels. With `skip`
/// the encoder features at H/2 and H are concatenated before each stage.
class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(int in, int base, Head head, bool skip);
  torch::Tensor forward(const torch::Tensor& x, const Features& skips);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  UpBlock up1_{nullptr}, up2_{nullptr};
  torch::nn::Conv2d last_{nullptr};
  int in_, base_;
  Head head_;
  bool skip_;
};
TORCH_MODULE(Decoder);

/// Image -> (reflectance, shading). The bottleneck after the shared blocks
/// is split in two channel halves, one per branch.
class Stage1Impl : public torch::nn::Module {
 public:
  explicit Stage1Impl(const ModelConfig& config);
  struct Output {
    torch::Tensor bottleneck;  // encoder output, before the shared blocks
    torch::Tensor reflectance;
    torch::Tensor shading;
  };
  Output forward(const torch::Tensor& image);
  [[nodiscard]] std::int64_t macs(int h, int w) const;

 private:
  ModelConfig config_;
  Encoder encoder_{nullptr};
  ResidualStack shared_{nullptr}, reflectance_blocks_{nullptr},
      shading_blocks_{nullptr};
  Decoder reflectance_decoder_{nullptr}, shading_decoder_{nullptr};
};
TORCH_MODULE(Stage1);

/// Splits the bottleneck into scene and light channels, estimates the
/// original light from the light channels and replaces them by an expansion
/// of the target light code.
class LightReplaceVectorImpl : public torch::nn::Module {
 public:
  LightReplaceVectorImpl(int light_channels, int feature_size);
  struct Output {
    torch::Tensor fused;
    torch::Tensor light_ori;  // B x 7
  };
  Output forward(const torch::Tensor& scene_feat,
                 const torch::Tensor& light_feat,
                 const torch::Tensor& new_light);
  /// Target code -> B x light_channels x feature_size x feature_size.
  torch::Tensor expand(const torch::Tensor& new_light);
  torch::Tensor estimate(const torch::Tensor& light_feat);
  [[nodiscard]] std::int64_t macs() const;

 private:
  int light_channels_, feature_size_, seed_size_;
  torch::nn::Conv2d est1_{nullptr}, est2_{nullptr};
  torch::nn::Linear est_fc_{nullptr}, expand_fc_{nullptr};
  torch::nn::ConvTranspose2d up1_{nullptr}, up2_{nullptr};
};
TORCH_MODULE(LightReplaceVector);

/// Probe pair (6 channels) -> conv block, two residual blocks, resized to the
/// bottleneck grid and concatenated; nothing is estimated.
class LightReplaceProbeImpl : public torch::nn::Module {
 public:
  LightReplaceProbeImpl(int light_channels, int feature_size);
  torch::Tensor forward(const torch::Tensor& scene_feat,
                        const torch::Tensor& probe);
  torch::Tensor encode(const torch::Tensor& probe);
  [[nodiscard]] std::int64_t macs(int probe_size) const;

 private:
  int light_channels_, feature_size_;
  ConvBlock conv_{nullptr};
  ResidualBlock res1_{nullptr}, res2_{nullptr};
};
TORCH_MODULE(LightReplaceProbe);

/// What the target light is given as.
struct LightInput {
  torch::Tensor vector;  // B x 7, for LightVariant::vector
  torch::Tensor probe;   // B x 6 x P x P, for LightVariant::probe
};

/// Shading (or the image itself without two stages) -> new shading.
class Stage2Impl : public torch::nn::Module {
 public:
  explicit Stage2Impl(const ModelConfig& config);
  struct Output {
    torch::Tensor shading_new;
    torch::Tensor light_ori;  // undefined for the probe variant
  };
  Output forward(const torch::Tensor& shading, const LightInput& light);
  [[nodiscard]] std::int64_t macs(int h, int w) const;
  [[nodiscard]] int nonlocal_count() const;

 private:
  ModelConfig config_;
  Encoder encoder_{nullptr};
  ResidualStack pre_{nullptr}, post_{nullptr};
  LightReplaceVector vector_{nullptr};
  LightReplaceProbe probe_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(Stage2);

struct StageOutputs {
  torch::Tensor reflectance;  // undefined without two stages
  torch::Tensor shading_ori;  // undefined without two stages
  torch::Tensor shading_new;  // equals relit without two stages
  torch::Tensor light_ori;    // undefined for the probe variant
  torch::Tensor relit;
  torch::Tensor recon;        // undefined without two stages
};

/// Generator: Stage 1 then Stage 2 then the products.
class RelightModelImpl : public torch::nn::Module {
 public:
  explicit RelightModelImpl(const ModelConfig& config);
  StageOutputs forward(const torch::Tensor& image, const LightInput& light);
  [[nodiscard]] const ModelConfig& config() const { return config_; }
  /// Parameters and multiply-accumulates of one forward at image_size.
  [[nodiscard]] Complexity complexity() const;
  [[nodiscard]] int nonlocal_count() const;
  Stage1 stage1() const { return stage1_; }
  Stage2 stage2() const { return stage2_; }

 private:
  ModelConfig config_;
  Stage1 stage1_{nullptr};
  Stage2 stage2_{nullptr};
};
TORCH_MODULE(RelightModel);

/// Same as model->forward; the name used throughout the docs.
StageOutputs forward_relight(RelightModel& model, const torch::Tensor& image,
                             const LightInput& light);

/// Conditional PatchGAN: concat(input, candidate) -> one score per patch.
/// Three stride-2 and two stride-1 4x4 convs: 70x70 receptive field.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(int channels);
  torch::Tensor forward(const torch::Tensor& input,
                        const torch::Tensor& candidate);
  [[nodiscard]] Complexity complexity(int h, int w) const;

 private:
  torch::nn::Sequential body_;
  int channels_;
};
TORCH_MODULE(Discriminator);

/// Sum of parameter element counts.
std::int64_t parameter_count(const torch::nn::Module& module);

/// Flat tensor archive used by checkpoints: magic, version, JSON header,
/// raw little-endian arrays. See docs/formats.md.
struct TensorArchive {
  nlohmann::json header;
  std::map<std::string, torch::Tensor> tensors;
};
void save_archive(const std::filesystem::path& path,
                  const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);

/// Parameters and buffers of `module` under "<prefix><name>".
void export_state(const torch::nn::Module& module, const std::string& prefix,
                  std::map<std::string, torch::Tensor>& out);
/// Copies archived values into `module`; throws ConfigError on a missing
/// entry or a shape mismatch.
void import_state(torch::nn::Module& module, const std::string& prefix,
                  const std::map<std::string, torch::Tensor>& in);

/// Generator-only checkpoint. Load throws ConfigError when the stored
/// ModelConfig differs from `expected`.
void save_model(const std::filesystem::path& path, RelightModel& model);
RelightModel load_model(const std::filesystem::path& path);
RelightModel load_model(const std::filesystem::path& path,
                        const ModelConfig& expected);

/// FNV-1a 64 of the checkpoint bytes, 16 hex digits.
std::string checkpoint_id(const std::filesystem::path& path);

}  // namespace relight::net

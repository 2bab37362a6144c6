#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <torch/torch.h>

#include "json.hpp"
#include "relight/batch.hpp"
#include "relight/net.hpp"

namespace relight::losses {

struct LossWeights {
  double relit = 1.0;
  double recon = 1.0;
  double reflectance = 1.0;
  double shading_ori = 1.0;
  double shading_new = 1.0;
  double light = 1.0;
  double gan = 1.0;
  double rc = 1.0;
  double sc = 1.0;
  double scs = 1.0;
  double ir = 1.0;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossConfig {
  bool use_ssim = true;
  bool use_lpips = true;
  bool use_intrinsic_gt = true;
  bool use_gan = true;
  bool uiid_enabled = false;
  bool use_rc = true;
  bool use_sc = true;
  bool use_scs = true;
  bool use_ir = true;
  double lambda1 = 2.0;
  double lambda2 = 0.1;
  double k1 = 0.5254;
  double k2 = 0.7089;
  double alpha = 0.1;
  double epsilon = 1e-6;
  double mu_start = 1.0;
  double mu_end = 0.01;
  double mu_decay_fraction = 1.0 / 3.0;
  std::uint64_t perceptual_seed = 7;
  LossWeights weights;

  [[nodiscard]] std::vector<std::string> check() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

/// Windowed SSIM: 11x11 Gaussian (sigma 1.5), K1 0.01, K2 0.03, dynamic
/// range 1, replicate padding so every pixel has a full window, averaged
/// over pixels, channels and batch.
torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y);
/// Per-sample SSIM, shape B.
torch::Tensor ssim_per_sample(const torch::Tensor& x, const torch::Tensor& y);

/// Perceptual distance in the LPIPS slot. distance(x, x) = 0 and
/// distance(x, y) = distance(y, x) for every provider.
class PerceptualProvider {
 public:
  virtual ~PerceptualProvider() = default;
  /// Per-sample distance, shape B.
  virtual torch::Tensor distance(const torch::Tensor& x,
                                 const torch::Tensor& y) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Fixed random 3x3 filter banks at several scales. Features are tanh of the
/// filter responses, unit-normalized across channels per pixel, and compared
/// by squared difference (LPIPS does the same with learned features). The
/// per-scale value is a quarter of the squared chord, so it lies in [0, 1].
/// Filters come from a seeded generator independent of torch's.
class RandomFeatureProvider final : public PerceptualProvider {
 public:
  explicit RandomFeatureProvider(std::uint64_t seed = 7, int features = 8,
                                 int scales = 3);
  torch::Tensor distance(const torch::Tensor& x,
                         const torch::Tensor& y) const override;
  [[nodiscard]] std::string name() const override;

 private:
  std::uint64_t seed_;
  std::vector<torch::Tensor> weights_;  // float64, features x in x 3 x 3
  std::vector<torch::Tensor> biases_;
};

/// Per-sample L1 + (1 - SSIM) + perceptual, the last two per flag; shape B.
torch::Tensor image_loss_per_sample(const torch::Tensor& pred,
                                    const torch::Tensor& gt,
                                    const LossConfig& config,
                                    const PerceptualProvider& perceptual);
/// Scalar image loss: the batch mean of image_loss_per_sample.
torch::Tensor image_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                         const LossConfig& config,
                         const PerceptualProvider& perceptual);

/// Mean over the batch of (1 - cos angle between directions) plus the mean
/// absolute color difference. pred and gt are B x 7 light codes; pred angle
/// pairs are renormalized first.
torch::Tensor light_loss(const torch::Tensor& pred, const torch::Tensor& gt);
/// Unit directions (B x 3) from B x 7 codes, renormalizing angle pairs.
torch::Tensor light_directions(const torch::Tensor& code);
/// Angle between directions in radians, shape B.
torch::Tensor angular_error(const torch::Tensor& pred, const torch::Tensor& gt);

/// x + alpha for x > 0, alpha * exp(x) otherwise.
double f_ac(double x, double alpha = 0.1);
torch::Tensor f_ac(const torch::Tensor& x, double alpha = 0.1);

/// Opponent transform along dim 1 of a B x 3 x H x W tensor.
torch::Tensor opponent(const torch::Tensor& rgb);
/// Mean of (|dx| + |dy|) / 2 per sample over the first `channels` channels,
/// forward differences with a backward difference on the last row/column.
torch::Tensor gradient_magnitude(const torch::Tensor& map, int channels);

/// Shading chromaticity smoothness, averaged over the batch.
torch::Tensor loss_scs(const torch::Tensor& shading, const torch::Tensor& image,
                       const LossConfig& config);
/// Per-sample (chroma ratio, all-channel ratio), shape B x 2.
torch::Tensor scs_ratios(const torch::Tensor& shading,
                         const torch::Tensor& image, double epsilon);

torch::Tensor loss_rc(const torch::Tensor& reflectance,
                      const torch::Tensor& reflectance_rev);
/// Stage-1 shading of each image against the Stage-2 shading predicted for
/// the same light by the opposite pass: |S_ori - S_new_rev| +
/// |S_ori_rev - S_new|.
torch::Tensor loss_sc(const torch::Tensor& shading_ori,
                      const torch::Tensor& shading_ori_rev,
                      const torch::Tensor& shading_new,
                      const torch::Tensor& shading_new_rev);
torch::Tensor loss_ir(const torch::Tensor& reflectance,
                      const torch::Tensor& relit_image,
                      const torch::Tensor& reflectance_rev,
                      const torch::Tensor& input_image, double mu);

/// Geometric decay from mu_start to mu_end over the first decay_fraction of
/// training, constant afterwards.
double mu_schedule(std::int64_t step, std::int64_t total_steps,
                   const LossConfig& config = {});

/// Least-squares GAN targets: generator pulls fakes to 1; discriminator
/// pulls reals to 1 and fakes to 0 (halved).
torch::Tensor generator_adversarial(const torch::Tensor& fake_scores);
torch::Tensor discriminator_adversarial(const torch::Tensor& real_scores,
                                        const torch::Tensor& fake_scores);

/// Named scalar terms; "total" is their weighted sum.
using Terms = std::map<std::string, torch::Tensor>;

/// Inputs shared by both totals. `fake_scores` are the discriminator scores
/// of (inputs, relit) for the whole batch; undefined disables cGAN.
struct LossInputs {
  const net::StageOutputs& outputs;
  const Batch& batch;
  torch::Tensor fake_scores;
  double mu = 1.0;
};

/// Supervised objective: L_all on the forward half plus L_cross on the
/// reversed half (when the batch carries one). Intrinsic-GT terms need GT
/// and use_intrinsic_gt; without them this is the trimmed objective.
Terms total_supervised(const LossInputs& in, const LossConfig& config,
                       const PerceptualProvider& perceptual);

/// Trimmed objective on both halves plus the enabled UIID constraints.
/// Requires a cross batch and a two-stage model.
Terms total_unsupervised(const LossInputs& in, const LossConfig& config,
                         const PerceptualProvider& perceptual);

}  // namespace relight::losses

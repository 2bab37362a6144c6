#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "relight/core.hpp"
#include "relight/inference.hpp"
#include "relight/losses.hpp"

namespace relight::metrics {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) for [0, 1] data; capped at kPsnrCap.
double psnr_from_mse(double mse);
double psnr(const ImageMap& x, const ImageMap& y);
double psnr(const torch::Tensor& x, const torch::Tensor& y);
/// Windowed SSIM of two maps (same definition as the loss).
double ssim(const ImageMap& x, const ImageMap& y);
/// 0.5 * (ssim + (1 - lpips)).
double mps(double ssim_score, double lpips_score);

/// Prediction of the target-lit image from an input image.
using Predictor =
    std::function<ImageMap(const ImageMap& input, const LightCondition& target)>;

Predictor model_predictor(const inference::Relighter& relighter);

struct EvalOptions {
  int resolution = 256;
  std::optional<std::size_t> max_pairs;  // seeded subsample when set
  std::uint64_t seed = 0;
  std::string method = "model";
};

struct EvalRow {
  std::string scene_id;
  std::size_t input = 0;
  std::size_t target = 0;
  double mps = 0.0;
  double ssim = 0.0;
  double lpips = 0.0;
  double psnr = 0.0;
};

struct EvalTable {
  std::string method;
  std::string provider;  // what filled the LPIPS slot
  int resolution = 0;
  std::vector<EvalRow> rows;
  EvalRow aggregate;  // arithmetic means; scene_id "mean"

  /// Aligned table in the MPS / SSIM / LPIPS / PSNR layout.
  [[nodiscard]] std::string to_text(bool per_pair = false) const;
  /// Header plus one row per pair and a final "mean" row.
  [[nodiscard]] std::string to_csv() const;
};

/// Every ordered pair of every scene in scene then row-major pair order, or
/// `max_pairs` of them chosen by a seeded shuffle and kept in that order.
/// Prediction and target are resized to `resolution` when they differ.
EvalTable evaluate(const Predictor& predictor,
                   const std::vector<SceneRecord>& scenes,
                   const EvalOptions& options,
                   const losses::PerceptualProvider& perceptual);

}  // namespace relight::metrics

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "relight/config.hpp"
#include "relight/core.hpp"
#include "relight/detail/random.hpp"
#include "relight/losses.hpp"
#include "relight/net.hpp"

namespace relight::train {

/// lr_initial * factor^floor(step / interval).
double lr_schedule(std::int64_t step, const TrainConfig& config);

/// Adaptive moment estimation with bias correction. Owns no parameters;
/// `params` must outlive it and keep their order.
class Adam {
 public:
  Adam(std::vector<torch::Tensor> params, double beta1, double beta2,
       double epsilon);
  void zero_grad();
  /// One update at `lr`; parameters without a gradient keep their moments.
  void step(double lr);
  [[nodiscard]] std::int64_t steps() const { return t_; }

  void export_state(const std::string& prefix,
                    std::map<std::string, torch::Tensor>& out) const;
  void import_state(const std::string& prefix,
                    const std::map<std::string, torch::Tensor>& in);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> m_, v_;
  double beta1_, beta2_, epsilon_;
  std::int64_t t_ = 0;
};

/// Training aborted on a NaN/Inf loss term.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::int64_t step, std::string term,
                std::optional<std::filesystem::path> last_good);
  [[nodiscard]] std::int64_t step() const { return step_; }
  [[nodiscard]] const std::string& term() const { return term_; }
  /// Most recent checkpoint written by this run, if any.
  [[nodiscard]] const std::optional<std::filesystem::path>& last_good() const {
    return last_good_;
  }

 private:
  std::int64_t step_;
  std::string term_;
  std::optional<std::filesystem::path> last_good_;
};

struct StepRecord {
  std::int64_t step = 0;  // index of the step just taken, from 0
  double lr = 0.0;
  double mu = 0.0;
  std::map<std::string, double> terms;  // generator terms incl. "total"
  double discriminator = 0.0;           // 0 when cGAN is disabled
  double seconds = 0.0;
};

/// Column order of the metrics log.
const std::vector<std::string>& log_columns();

/// Owns generator, discriminator, optimizers and the sampling stream.
/// Deterministic for a given config, scene list and thread count.
class Trainer {
 public:
  /// Builds fresh weights from config.train.seed. Throws net::ConfigError on
  /// an invalid config and std::invalid_argument on unusable scenes.
  Trainer(ExperimentConfig config, std::vector<SceneRecord> scenes,
          std::optional<std::filesystem::path> output_dir = std::nullopt);

  /// Restores everything a training checkpoint holds. `override_total`
  /// replaces total_steps, which also rescales the derived schedules.
  static Trainer resume(const std::filesystem::path& checkpoint,
                        std::vector<SceneRecord> scenes,
                        std::optional<std::filesystem::path> output_dir =
                            std::nullopt,
                        std::optional<std::int64_t> override_total =
                            std::nullopt);

  /// One generator update followed by one discriminator update.
  StepRecord step();
  /// Steps until `total_steps`, checkpointing every checkpoint_interval and
  /// at the end (when an output directory is set).
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  void save_checkpoint(const std::filesystem::path& path);

  [[nodiscard]] std::int64_t steps_done() const { return step_; }
  [[nodiscard]] const ExperimentConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<StepRecord>& history() const {
    return history_;
  }
  [[nodiscard]] const std::optional<std::filesystem::path>& last_checkpoint()
      const {
    return last_checkpoint_;
  }
  net::RelightModel& model() { return model_; }
  net::Discriminator& discriminator() { return disc_; }
  [[nodiscard]] torch::Dtype dtype() const;

  /// The batch the next step() will use, without advancing the stream.
  [[nodiscard]] Batch peek_batch() const;

 private:
  Batch draw_batch(detail::Rng& rng) const;
  void append_log(const StepRecord& record);

  ExperimentConfig config_;
  std::vector<SceneRecord> scenes_;
  std::optional<std::filesystem::path> output_dir_;
  net::RelightModel model_{nullptr};
  net::Discriminator disc_{nullptr};
  std::unique_ptr<Adam> opt_g_, opt_d_;
  std::unique_ptr<losses::PerceptualProvider> perceptual_;
  detail::Rng rng_;
  std::int64_t step_ = 0;
  std::vector<StepRecord> history_;
  std::optional<std::filesystem::path> last_checkpoint_;
};

}  // namespace relight::train

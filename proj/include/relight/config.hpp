#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "relight/losses.hpp"
#include "relight/net.hpp"

namespace relight {

inline constexpr int kExperimentSchemaVersion = 1;

struct TrainConfig {
  double lr_initial = 2e-4;
  int batch_size = 18;
  std::int64_t total_steps = 2000;
  double decay_factor = 0.5;
  std::int64_t decay_interval = 0;  // 0: total_steps / 4
  std::uint64_t seed = 1;
  bool cross_relighting = true;
  std::optional<std::string> resume_checkpoint;
  std::int64_t checkpoint_interval = 0;  // 0: only at the end
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool double_precision = false;
  int threads = 1;

  [[nodiscard]] std::int64_t effective_decay_interval() const;
  /// Samples drawn per step before reversal.
  [[nodiscard]] int base_batch() const;
  [[nodiscard]] std::vector<std::string> check() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Everything one training run needs; serialized as the experiment file.
struct ExperimentConfig {
  net::ModelConfig model;
  losses::LossConfig loss;
  TrainConfig train;

  /// Every problem, including cross-section conflicts (UIID needs
  /// cross-relighting and two stages).
  [[nodiscard]] std::vector<std::string> check() const;
  /// Throws net::ConfigError with every problem from check().
  void require_valid() const;
  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys and a wrong
/// schema_version raise net::ConfigError.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment(const std::filesystem::path& path);
void save_experiment(const std::filesystem::path& path,
                     const ExperimentConfig& config);

/// One removable component from the ablation tables.
struct Ablation {
  std::string row;   // table row name, e.g. "w/o non-local blocks"
  std::string flag;  // CLI flag without dashes, e.g. "no-nonlocal"
  std::function<void(ExperimentConfig&)> apply;
};

/// Rows of the architecture/loss ablation and the UIID analysis, in table
/// order.
const std::vector<Ablation>& ablations();
const Ablation& ablation_by_flag(const std::string& flag);

}  // namespace relight

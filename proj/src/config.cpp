#include "relight/config.hpp"

#include <set>
#include <stdexcept>
#include <string>

#include "relight/io.hpp"

namespace relight {

using json = nlohmann::json;

std::int64_t TrainConfig::effective_decay_interval() const {
  return decay_interval > 0 ? decay_interval
                            : std::max<std::int64_t>(1, total_steps / 4);
}

int TrainConfig::base_batch() const {
  return cross_relighting ? batch_size / 2 : batch_size;
}

std::vector<std::string> TrainConfig::check() const {
  std::vector<std::string> out;
  if (!(lr_initial > 0.0)) out.push_back("lr_initial must be > 0");
  if (batch_size < 1) out.push_back("batch_size must be >= 1");
  if (cross_relighting && batch_size % 2 != 0) {
    out.push_back("batch_size must be even with cross_relighting");
  }
  if (cross_relighting && batch_size < 2) {
    out.push_back("batch_size must be >= 2 with cross_relighting");
  }
  if (total_steps < 1) out.push_back("total_steps must be >= 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    out.push_back("decay_factor must be in (0, 1]");
  }
  if (decay_interval < 0) out.push_back("decay_interval must be >= 0");
  if (checkpoint_interval < 0) out.push_back("checkpoint_interval must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) out.push_back("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) out.push_back("beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) out.push_back("adam_epsilon must be > 0");
  if (threads < 1) out.push_back("threads must be >= 1");
  return out;
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr_initial", c.lr_initial},
           {"batch_size", c.batch_size},
           {"total_steps", c.total_steps},
           {"decay_factor", c.decay_factor},
           {"decay_interval", c.decay_interval},
           {"seed", c.seed},
           {"cross_relighting", c.cross_relighting},
           {"checkpoint_interval", c.checkpoint_interval},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"adam_epsilon", c.adam_epsilon},
           {"double_precision", c.double_precision},
           {"threads", c.threads}};
  j["resume_checkpoint"] =
      c.resume_checkpoint ? json(*c.resume_checkpoint) : json(nullptr);
}

void from_json(const json& j, TrainConfig& c) {
  TrainConfig d;
  c.lr_initial = j.value("lr_initial", d.lr_initial);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.total_steps = j.value("total_steps", d.total_steps);
  c.decay_factor = j.value("decay_factor", d.decay_factor);
  c.decay_interval = j.value("decay_interval", d.decay_interval);
  c.seed = j.value("seed", d.seed);
  c.cross_relighting = j.value("cross_relighting", d.cross_relighting);
  c.checkpoint_interval = j.value("checkpoint_interval", d.checkpoint_interval);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
  c.double_precision = j.value("double_precision", d.double_precision);
  c.threads = j.value("threads", d.threads);
  c.resume_checkpoint.reset();
  if (j.contains("resume_checkpoint") && !j.at("resume_checkpoint").is_null()) {
    c.resume_checkpoint = j.at("resume_checkpoint").get<std::string>();
  }
}

std::vector<std::string> ExperimentConfig::check() const {
  std::vector<std::string> out;
  for (const auto& p : model.check()) out.push_back("model: " + p);
  for (const auto& p : loss.check()) out.push_back("loss: " + p);
  for (const auto& p : train.check()) out.push_back("train: " + p);
  if (loss.uiid_enabled && !train.cross_relighting) {
    out.push_back("UIID constraints need cross_relighting");
  }
  if (loss.uiid_enabled && !model.use_two_stage) {
    out.push_back("UIID constraints need the two-stage model");
  }
  if (model.light_variant != LightVariant::vector) {
    out.push_back("training supports the vector light variant only");
  }
  return out;
}

void ExperimentConfig::require_valid() const {
  const auto problems = check();
  if (problems.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw net::ConfigError(msg);
}

namespace {

void reject_unknown(const json& j, const std::string& section) {
  if (!j.is_object()) {
    throw net::ConfigError("config section \"" + section +
                           "\" must be an object");
  }
  json defaults;
  if (section == "model") defaults = net::ModelConfig{};
  if (section == "loss") defaults = losses::LossConfig{};
  if (section == "train") defaults = TrainConfig{};
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw net::ConfigError("unknown key \"" + section + "." + key + "\"");
    }
    if (section == "loss" && key == "weights") {
      for (const auto& [w, unused] : value.items()) {
        if (!defaults["weights"].contains(w)) {
          throw net::ConfigError("unknown key \"loss.weights." + w + "\"");
        }
      }
    }
  }
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"schema_version", kExperimentSchemaVersion},
           {"model", c.model},
           {"loss", c.loss},
           {"train", c.train}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw net::ConfigError("experiment config must be an object");
  const int version = j.value("schema_version", kExperimentSchemaVersion);
  if (version != kExperimentSchemaVersion) {
    throw net::ConfigError("experiment schema_version " + std::to_string(version) +
                           ", expected " +
                           std::to_string(kExperimentSchemaVersion));
  }
  static const std::set<std::string> sections = {"schema_version", "model",
                                                 "loss", "train"};
  for (const auto& [key, unused] : j.items()) {
    if (!sections.contains(key)) {
      throw net::ConfigError("unknown top-level key \"" + key + "\"");
    }
  }
  c = ExperimentConfig{};
  try {
    if (j.contains("model")) {
      reject_unknown(j.at("model"), "model");
      c.model = j.at("model").get<net::ModelConfig>();
    }
    if (j.contains("loss")) {
      reject_unknown(j.at("loss"), "loss");
      c.loss = j.at("loss").get<losses::LossConfig>();
    }
    if (j.contains("train")) {
      reject_unknown(j.at("train"), "train");
      c.train = j.at("train").get<TrainConfig>();
    }
  } catch (const json::exception& e) {
    throw net::ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw net::ConfigError("config " + path.string() + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

void save_experiment(const std::filesystem::path& path,
                     const ExperimentConfig& config) {
  const std::string text = json(config).dump(2) + "\n";
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

namespace {

// The UIID-analysis rows all start from training without intrinsic GT.
void uiid_setting(ExperimentConfig& c) {
  c.loss.use_intrinsic_gt = false;
  c.loss.uiid_enabled = true;
}

}  // namespace

const std::vector<Ablation>& ablations() {
  static const std::vector<Ablation> table = {
      {"w/o ResNet(U-net instead)", "unet",
       [](ExperimentConfig& c) {
         c.model.backbone = net::Backbone::unet;
         c.model.use_nonlocal = false;
       }},
      {"w/o non-local blocks", "no-nonlocal",
       [](ExperimentConfig& c) { c.model.use_nonlocal = false; }},
      {"w/o two-stage model", "no-two-stage",
       [](ExperimentConfig& c) { c.model.use_two_stage = false; }},
      {"w/o cross-relighting", "no-cross-relighting",
       [](ExperimentConfig& c) { c.train.cross_relighting = false; }},
      {"w/o lpips", "no-lpips",
       [](ExperimentConfig& c) { c.loss.use_lpips = false; }},
      {"w/o ssim", "no-ssim",
       [](ExperimentConfig& c) { c.loss.use_ssim = false; }},
      {"w/o IID-GT", "no-iid-gt",
       [](ExperimentConfig& c) { c.loss.use_intrinsic_gt = false; }},
      {"w/o IID-GT (w/ UIID)", "uiid", uiid_setting},
      {"w/o L_rc", "no-rc",
       [](ExperimentConfig& c) {
         uiid_setting(c);
         c.loss.use_rc = false;
       }},
      {"w/o L_sc", "no-sc",
       [](ExperimentConfig& c) {
         uiid_setting(c);
         c.loss.use_sc = false;
       }},
      {"w/o L_scs + L_scs*", "no-scs",
       [](ExperimentConfig& c) {
         uiid_setting(c);
         c.loss.use_scs = false;
       }},
      {"w/o L_ir", "no-ir",
       [](ExperimentConfig& c) {
         uiid_setting(c);
         c.loss.use_ir = false;
       }},
  };
  return table;
}

const Ablation& ablation_by_flag(const std::string& flag) {
  for (const auto& a : ablations()) {
    if (a.flag == flag) return a;
  }
  throw net::ConfigError("unknown ablation flag \"" + flag + "\"");
}

}  // namespace relight

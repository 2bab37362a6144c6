#include "relight/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "relight/batch.hpp"
#include "relight/data.hpp"

namespace relight::train {

using json = nlohmann::json;

double lr_schedule(std::int64_t step, const TrainConfig& config) {
  const auto k = std::max<std::int64_t>(0, step) /
                 config.effective_decay_interval();
  return config.lr_initial * std::pow(config.decay_factor, static_cast<double>(k));
}

Adam::Adam(std::vector<torch::Tensor> params, double beta1, double beta2,
           double epsilon)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {
  for (const auto& p : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void Adam::step(double lr) {
  torch::NoGradGuard guard;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = params_[i].grad();
    if (!g.defined()) continue;
    m_[i].mul_(beta1_).add_(g, 1.0 - beta1_);
    v_[i].mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    const auto denom = (v_[i] / bc2).sqrt_().add_(epsilon_);
    params_[i].addcdiv_(m_[i], denom, -lr / bc1);
  }
}

void Adam::export_state(const std::string& prefix,
                        std::map<std::string, torch::Tensor>& out) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out[prefix + "m." + std::to_string(i)] = m_[i].clone();
    out[prefix + "v." + std::to_string(i)] = v_[i].clone();
  }
  out[prefix + "t"] = torch::tensor({t_}, torch::kInt64);
}

void Adam::import_state(const std::string& prefix,
                        const std::map<std::string, torch::Tensor>& in) {
  auto fetch = [&](const std::string& name) -> const torch::Tensor& {
    const auto it = in.find(prefix + name);
    if (it == in.end()) {
      throw net::ConfigError("checkpoint lacks optimizer tensor \"" + prefix +
                             name + "\"");
    }
    return it->second;
  };
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = fetch("m." + std::to_string(i));
    const auto& v = fetch("v." + std::to_string(i));
    if (m.sizes() != m_[i].sizes() || v.sizes() != v_[i].sizes()) {
      throw net::ConfigError("optimizer state " + prefix + std::to_string(i) +
                             " has a different shape");
    }
    m_[i].copy_(m);
    v_[i].copy_(v);
  }
  t_ = fetch("t").item<std::int64_t>();
}

NonFiniteLoss::NonFiniteLoss(std::int64_t step, std::string term,
                             std::optional<std::filesystem::path> last_good)
    : std::runtime_error("non-finite loss term \"" + term + "\" at step " +
                         std::to_string(step) + "; last good checkpoint: " +
                         (last_good ? last_good->string() : "none")),
      step_(step), term_(std::move(term)), last_good_(std::move(last_good)) {}

const std::vector<std::string>& log_columns() {
  static const std::vector<std::string> columns = {
      "step", "lr", "mu", "total", "relit", "recon", "reflectance",
      "shading_ori", "shading_new", "light", "gan", "rc", "sc", "scs", "ir",
      "discriminator", "seconds"};
  return columns;
}

namespace {

constexpr int kTrainingSchema = 1;

std::string rng_state(const detail::Rng& rng) {
  std::ostringstream os;
  os << rng.engine();
  return os.str();
}

void check_scenes(const std::vector<SceneRecord>& scenes, int image_size) {
  if (scenes.empty()) throw std::invalid_argument("training needs at least one scene");
  for (const auto& s : scenes) {
    const auto problems = validate(s);
    if (!problems.empty()) {
      throw std::invalid_argument("scene " + s.scene_id + ": " + describe(problems));
    }
    if (s.captures.size() < 2) {
      throw std::invalid_argument("scene " + s.scene_id +
                                  " has fewer than two captures");
    }
    for (const auto& c : s.captures) {
      if (c.image.width() != image_size || c.image.height() != image_size) {
        throw std::invalid_argument(
            "scene " + s.scene_id + " has " + std::to_string(c.image.width()) +
            "x" + std::to_string(c.image.height()) + " images, model expects " +
            std::to_string(image_size));
      }
    }
  }
}

bool finite(const torch::Tensor& t) {
  return std::isfinite(t.item<double>());
}

}  // namespace

Trainer::Trainer(ExperimentConfig config, std::vector<SceneRecord> scenes,
                 std::optional<std::filesystem::path> output_dir)
    : config_(std::move(config)), scenes_(std::move(scenes)),
      output_dir_(std::move(output_dir)),
      rng_(detail::mix_seed(config_.train.seed, 1)) {
  config_.require_valid();
  check_scenes(scenes_, config_.model.image_size);
  torch::set_num_threads(config_.train.threads);
  torch::manual_seed(config_.train.seed);
  model_ = net::RelightModel(config_.model);
  disc_ = net::Discriminator(config_.model.discriminator_channels);
  model_->to(dtype());
  disc_->to(dtype());
  model_->train();
  disc_->train();
  const auto& t = config_.train;
  opt_g_ = std::make_unique<Adam>(model_->parameters(), t.beta1, t.beta2,
                                  t.adam_epsilon);
  opt_d_ = std::make_unique<Adam>(disc_->parameters(), t.beta1, t.beta2,
                                  t.adam_epsilon);
  perceptual_ =
      std::make_unique<losses::RandomFeatureProvider>(config_.loss.perceptual_seed);
  if (output_dir_) std::filesystem::create_directories(*output_dir_);
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint,
                        std::vector<SceneRecord> scenes,
                        std::optional<std::filesystem::path> output_dir,
                        std::optional<std::int64_t> override_total) {
  const auto archive = net::load_archive(checkpoint);
  const auto& h = archive.header;
  if (h.value("schema_version", -1) != kTrainingSchema ||
      h.value("kind", std::string()) != "relight-training") {
    throw io::SchemaError("checkpoint " + checkpoint.string() +
                              " is not a training checkpoint of schema " +
                              std::to_string(kTrainingSchema),
                          h.value("schema_version", -1), kTrainingSchema);
  }
  auto config = h.at("experiment").get<ExperimentConfig>();
  config.train.resume_checkpoint = checkpoint.string();
  if (override_total) config.train.total_steps = *override_total;
  Trainer t(std::move(config), std::move(scenes), std::move(output_dir));
  net::import_state(*t.model_, "model.", archive.tensors);
  net::import_state(*t.disc_, "disc.", archive.tensors);
  t.opt_g_->import_state("adam_g.", archive.tensors);
  t.opt_d_->import_state("adam_d.", archive.tensors);
  std::istringstream is(h.at("rng_state").get<std::string>());
  is >> t.rng_.engine();
  if (!is) throw net::ConfigError("checkpoint has a corrupt sampler state");
  t.step_ = h.at("step").get<std::int64_t>();
  t.last_checkpoint_ = checkpoint;
  return t;
}

torch::Dtype Trainer::dtype() const {
  return config_.train.double_precision ? torch::kFloat64 : torch::kFloat32;
}

Batch Trainer::draw_batch(detail::Rng& rng) const {
  std::vector<RelightSample> samples;
  const int n = config_.train.base_batch();
  samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = rng.uniform_int(0, static_cast<std::int64_t>(scenes_.size()) - 1);
    samples.push_back(data::sample_pair(scenes_[static_cast<std::size_t>(idx)], rng));
  }
  return assemble_cross_batch(samples, config_.train.cross_relighting, dtype());
}

Batch Trainer::peek_batch() const {
  detail::Rng copy = rng_;
  return draw_batch(copy);
}

StepRecord Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const auto& lc = config_.loss;
  const Batch batch = draw_batch(rng_);
  model_->train();
  disc_->train();

  StepRecord rec;
  rec.step = step_;
  rec.lr = lr_schedule(step_, config_.train);
  rec.mu = losses::mu_schedule(step_, config_.train.total_steps, lc);

  opt_g_->zero_grad();
  const auto out = model_->forward(batch.inputs, {batch.target_lights, {}});
  torch::Tensor fake_scores;
  if (lc.use_gan) fake_scores = disc_->forward(batch.inputs, out.relit);
  const losses::LossInputs in{out, batch, fake_scores, rec.mu};
  const auto terms = lc.uiid_enabled
                         ? losses::total_unsupervised(in, lc, *perceptual_)
                         : losses::total_supervised(in, lc, *perceptual_);
  for (const auto& [name, value] : terms) {
    const double v = value.item<double>();
    if (!std::isfinite(v)) throw NonFiniteLoss(step_, name, last_checkpoint_);
    rec.terms[name] = v;
  }
  terms.at("total").backward();
  opt_g_->step(rec.lr);

  if (lc.use_gan) {
    opt_d_->zero_grad();
    const auto real = disc_->forward(batch.inputs, batch.targets);
    const auto fake = disc_->forward(batch.inputs, out.relit.detach());
    const auto loss_d = losses::discriminator_adversarial(real, fake);
    if (!finite(loss_d)) {
      throw NonFiniteLoss(step_, "discriminator", last_checkpoint_);
    }
    rec.discriminator = loss_d.item<double>();
    loss_d.backward();
    opt_d_->step(rec.lr);
  }

  ++step_;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  history_.push_back(rec);
  append_log(rec);
  return rec;
}

void Trainer::append_log(const StepRecord& r) {
  if (!output_dir_) return;
  const auto path = *output_dir_ / "metrics.csv";
  const bool fresh = !std::filesystem::exists(path) ||
                     std::filesystem::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw io::DataError("cannot append to " + path.string());
  const auto& cols = log_columns();
  if (fresh) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      os << (i ? "," : "") << cols[i];
    }
    os << '\n';
  }
  os.precision(9);
  os << r.step << ',' << r.lr << ',' << r.mu;
  for (std::size_t i = 3; i + 2 < cols.size(); ++i) {
    os << ',';
    const auto it = r.terms.find(cols[i]);
    if (it != r.terms.end()) os << it->second;
  }
  os << ',' << r.discriminator << ',' << r.seconds << '\n';
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  const auto interval = config_.train.checkpoint_interval;
  while (step_ < config_.train.total_steps) {
    const auto rec = step();
    if (on_step) on_step(rec);
    if (output_dir_ && interval > 0 && step_ % interval == 0 &&
        step_ < config_.train.total_steps) {
      std::ostringstream name;
      name << "checkpoint_step";
      name.width(6);
      name.fill('0');
      name << step_ << ".rlckpt";
      save_checkpoint(*output_dir_ / name.str());
    }
  }
  if (output_dir_) save_checkpoint(*output_dir_ / "checkpoint.rlckpt");
}

void Trainer::save_checkpoint(const std::filesystem::path& path) {
  net::TensorArchive archive;
  archive.header = {{"schema_version", kTrainingSchema},
                    {"kind", "relight-training"},
                    {"model_config", config_.model},
                    {"experiment", config_},
                    {"step", step_},
                    {"rng_state", rng_state(rng_)}};
  net::export_state(*model_, "model.", archive.tensors);
  net::export_state(*disc_, "disc.", archive.tensors);
  opt_g_->export_state("adam_g.", archive.tensors);
  opt_d_->export_state("adam_d.", archive.tensors);
  net::save_archive(path, archive);
  last_checkpoint_ = path;
}

}  // namespace relight::train

#include "relight/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "relight/color.hpp"
#include "relight/config.hpp"
#include "relight/data.hpp"
#include "relight/inference.hpp"
#include "relight/io.hpp"
#include "relight/metrics.hpp"
#include "relight/service.hpp"
#include "relight/synth.hpp"
#include "relight/train.hpp"

namespace relight::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct ModelFlags {
  std::optional<int> base_channels, bottleneck_channels, light_channels;
  std::optional<int> s1_shared, s1_branch, s2_pre, s2_post;
  std::optional<int> image_size, disc_channels;

  void add(CLI::App& app) {
    const char* group = "Model";
    app.add_option("--base-channels", base_channels, "encoder width after the first conv")->group(group);
    app.add_option("--bottleneck-channels", bottleneck_channels, "bottleneck width")->group(group);
    app.add_option("--light-channels", light_channels, "light feature channels")->group(group);
    app.add_option("--stage1-shared-blocks", s1_shared, "Stage-1 shared residual blocks")->group(group);
    app.add_option("--stage1-branch-blocks", s1_branch, "Stage-1 per-branch residual blocks")->group(group);
    app.add_option("--stage2-pre-blocks", s2_pre, "Stage-2 blocks before the light replacement")->group(group);
    app.add_option("--stage2-post-blocks", s2_post, "Stage-2 blocks after the light replacement")->group(group);
    app.add_option("--image-size", image_size, "training resolution (square)")->group(group);
    app.add_option("--disc-channels", disc_channels, "discriminator base width")->group(group);
  }

  void apply(net::ModelConfig& m) const {
    if (base_channels) m.base_channels = *base_channels;
    if (bottleneck_channels) m.bottleneck_channels = *bottleneck_channels;
    if (light_channels) m.light_feature_channels = *light_channels;
    if (s1_shared) m.stage1_shared_blocks = *s1_shared;
    if (s1_branch) m.stage1_branch_blocks = *s1_branch;
    if (s2_pre) m.stage2_pre_blocks = *s2_pre;
    if (s2_post) m.stage2_post_blocks = *s2_post;
    if (image_size) m.image_size = *image_size;
    if (disc_channels) m.discriminator_channels = *disc_channels;
  }
};

struct TrainFlags {
  std::optional<std::int64_t> steps, decay_interval, checkpoint_interval;
  std::optional<int> batch_size, threads;
  std::optional<double> lr, decay_factor;
  std::optional<std::uint64_t> seed;
  bool double_precision = false;

  void add(CLI::App& app) {
    const char* group = "Training";
    app.add_option("--steps", steps, "total optimizer steps")->group(group);
    app.add_option("--batch-size", batch_size, "batch size B (B/2 drawn plus reversals)")->group(group);
    app.add_option("--lr", lr, "initial learning rate")->group(group);
    app.add_option("--decay-factor", decay_factor, "step-decay factor")->group(group);
    app.add_option("--decay-interval", decay_interval, "steps between decays (0: steps/4)")->group(group);
    app.add_option("--seed", seed, "seed for weights and sampling")->group(group);
    app.add_option("--checkpoint-interval", checkpoint_interval, "steps between checkpoints (0: end only)")->group(group);
    app.add_option("--threads", threads, "intra-op threads")->group(group);
    app.add_flag("--double", double_precision, "train in float64")->group(group);
  }

  void apply(TrainConfig& t) const {
    if (steps) t.total_steps = *steps;
    if (batch_size) t.batch_size = *batch_size;
    if (lr) t.lr_initial = *lr;
    if (decay_factor) t.decay_factor = *decay_factor;
    if (decay_interval) t.decay_interval = *decay_interval;
    if (seed) t.seed = *seed;
    if (checkpoint_interval) t.checkpoint_interval = *checkpoint_interval;
    if (threads) t.threads = *threads;
    if (double_precision) t.double_precision = true;
  }
};

struct AblationFlags {
  std::vector<std::pair<const Ablation*, bool>> chosen;

  void add(CLI::App& app) {
    chosen.reserve(ablations().size());
    for (const auto& a : ablations()) chosen.emplace_back(&a, false);
    for (auto& [a, on] : chosen) {
      app.add_flag("--" + a->flag, on, "ablation row \"" + a->row + "\"")->group("Ablations");
    }
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& [a, on] : chosen) {
      if (on) a->apply(c);
    }
  }
};

struct SplitFlags {
  std::string split = "all";
  std::string ratios = "rsr";
  std::uint64_t seed = 0;

  void add(CLI::App& app, const std::string& fallback) {
    split = fallback;
    app.add_option("--split", split, "train | validation | test | all")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}))
        ->capture_default_str();
    app.add_option("--split-ratios", ratios, "rsr (59/3/10 of 72) | isr (85/5/10)")
        ->check(CLI::IsMember({"rsr", "isr"}))
        ->capture_default_str();
    app.add_option("--split-seed", seed, "configuration shuffle seed")->capture_default_str();
  }

  std::vector<SceneRecord> load(const fs::path& data_dir) const {
    const fs::path manifest_path =
        fs::is_directory(data_dir) ? data_dir / "manifest.jsonl" : data_dir;
    auto manifest = io::load_manifest(manifest_path);
    if (split != "all") {
      const auto parts = data::split_by_configuration(
          manifest, ratios == "rsr" ? data::kRsrRatios : data::kIsrRatios, seed);
      manifest = split == "train" ? parts.train
                 : split == "validation" ? parts.validation
                                         : parts.test;
    }
    if (manifest.scenes.empty()) {
      throw io::DataError("split \"" + split + "\" of " + manifest_path.string() +
                          " has no scenes");
    }
    return io::load_dataset(manifest);
  }
};

struct LightFlags {
  double pan = 0.0;
  double tilt = 0.7853981633974483;
  std::optional<double> temperature;
  std::vector<double> rgb;

  void add(CLI::App& app, bool with_pan) {
    if (with_pan) app.add_option("--pan", pan, "target pan in radians")->required();
    app.add_option("--tilt", tilt, "target tilt in radians, [0, pi/2]")->required();
    auto* t = app.add_option("--temperature", temperature, "color temperature in kelvin");
    auto* c = app.add_option("--rgb", rgb, "light color r g b")->expected(3)->delimiter(',');
    t->excludes(c);
  }

  [[nodiscard]] LightCondition at(double p) const {
    if (tilt < 0.0 || tilt > kHalfPi) {
      throw net::ConfigError("--tilt must lie in [0, pi/2]");
    }
    if (!rgb.empty()) return LightCondition::from_rgb(p, tilt, {rgb[0], rgb[1], rgb[2]});
    return LightCondition::from_temperature(p, tilt, temperature.value_or(6500.0));
  }
};

ImageMap load_image(const fs::path& path) {
  if (path.extension() == ".rlm") return io::load_map(path);
  return io::load_png(path);
}

void save_image(const ImageMap& map, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (path.extension() == ".rlm") {
    io::save_map(map, path);
  } else {
    io::save_png(map, path);
  }
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix + path.extension().string());
}

ExperimentConfig build_experiment(const std::optional<fs::path>& file,
                                  const ModelFlags& model, const TrainFlags& train,
                                  const AblationFlags& abl) {
  ExperimentConfig c = file ? load_experiment(*file) : ExperimentConfig{};
  model.apply(c.model);
  train.apply(c.train);
  abl.apply(c);
  return c;
}

std::string complexity_table(const net::ModelConfig& config) {
  net::RelightModel model(config);
  net::Discriminator disc(config.discriminator_channels);
  const auto g = model->complexity();
  const auto d = disc->complexity(config.image_size, config.image_size);
  char line[160];
  std::ostringstream os;
  std::snprintf(line, sizeof line, "%-16s %12s %12s\n", "Network", "Params (M)", "MACs (G)");
  os << line;
  std::snprintf(line, sizeof line, "%-16s %12.3f %12.3f\n", "generator",
                static_cast<double>(g.parameters) / 1e6, static_cast<double>(g.macs) / 1e9);
  os << line;
  std::snprintf(line, sizeof line, "%-16s %12.3f %12.3f\n", "discriminator",
                static_cast<double>(d.parameters) / 1e6, static_cast<double>(d.macs) / 1e9);
  os << line;
  os << "input " << config.image_size << "x" << config.image_size
     << ", non-local blocks " << model->nonlocal_count() << "\n";
  return os.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image scene relighting: data generation, training, evaluation, inference."};
  app.name("relight");
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "render a synthetic dataset with intrinsic ground truth");
  synth::GenerateOptions gen_opts;
  fs::path gen_out = "data";
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--scenes", gen_opts.scenes, "number of scenes")->capture_default_str();
  gen->add_option("--lights", gen_opts.lights_per_scene, "captures per scene")->capture_default_str();
  gen->add_option("--resolution", gen_opts.resolution, "image side in pixels")->capture_default_str();
  gen->add_option("--seed", gen_opts.seed, "dataset seed")->capture_default_str();
  gen->add_option("--scenes-per-configuration", gen_opts.scenes_per_configuration,
                  "scenes sharing one configuration id")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "gradient statistics of image, reflectance and shading");
  fs::path stats_data;
  stats->add_option("--data", stats_data, "dataset directory or manifest")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  fs::path train_data, train_out = "run";
  std::optional<fs::path> train_config, train_resume, save_config;
  ModelFlags train_model;
  TrainFlags train_flags;
  AblationFlags train_abl;
  SplitFlags train_split;
  bool quiet = false;
  train_cmd->add_option("--data", train_data, "dataset directory or manifest")->required();
  train_cmd->add_option("--out", train_out, "run directory")->capture_default_str();
  train_cmd->add_option("--config", train_config, "experiment config file (JSON)");
  train_cmd->add_option("--resume", train_resume, "training checkpoint to continue from");
  train_cmd->add_option("--save-config", save_config, "write the effective config and exit");
  train_cmd->add_flag("--quiet", quiet, "no per-step output");
  train_model.add(*train_cmd);
  train_flags.add(*train_cmd);
  train_abl.add(*train_cmd);
  train_split.add(*train_cmd, "train");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  fs::path eval_data;
  std::optional<fs::path> eval_ckpt, eval_csv;
  SplitFlags eval_split;
  metrics::EvalOptions eval_opts;
  std::optional<std::size_t> max_pairs;
  bool identity = false, per_pair = false;
  std::string method;
  eval_cmd->add_option("--data", eval_data, "dataset directory or manifest")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate");
  eval_cmd->add_flag("--identity", identity, "evaluate the input image as the prediction");
  eval_cmd->add_option("--resolution", eval_opts.resolution, "metric resolution")->capture_default_str();
  eval_cmd->add_option("--max-pairs", max_pairs, "seeded subsample of ordered pairs");
  eval_cmd->add_option("--seed", eval_opts.seed, "subsample seed")->capture_default_str();
  eval_cmd->add_option("--method", method, "row label");
  eval_cmd->add_option("--csv", eval_csv, "write per-pair rows");
  eval_cmd->add_flag("--per-pair", per_pair, "print every pair");
  eval_split.add(*eval_cmd, "test");

  // relight
  auto* relight_cmd = app.add_subcommand("relight", "relight one image");
  fs::path rl_ckpt, rl_input, rl_output;
  LightFlags rl_light;
  bool rl_intrinsics = false;
  relight_cmd->add_option("--checkpoint", rl_ckpt, "model checkpoint")->required();
  relight_cmd->add_option("--input", rl_input, "input image (.png or .rlm)")->required();
  relight_cmd->add_option("--out", rl_output, "output path (.png or .rlm)")->required();
  relight_cmd->add_flag("--intrinsics", rl_intrinsics, "also write _reflectance and _shading maps");
  rl_light.add(*relight_cmd, true);

  // animate
  auto* anim = app.add_subcommand("animate", "sweep pan over [0, 2pi) at a fixed tilt");
  fs::path an_ckpt, an_input, an_out = "frames";
  LightFlags an_light;
  int frames = 12;
  anim->add_option("--checkpoint", an_ckpt, "model checkpoint")->required();
  anim->add_option("--input", an_input, "input image (.png or .rlm)")->required();
  anim->add_option("--out", an_out, "frame directory")->capture_default_str();
  anim->add_option("--frames", frames, "number of frames")->check(CLI::PositiveNumber)->capture_default_str();
  an_light.add(*anim, false);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP inference service");
  std::optional<fs::path> sv_ckpt;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--checkpoint", sv_ckpt, "model checkpoint (none: not ready)");
  serve_cmd->add_option("--host", host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "port")->capture_default_str();

  // info
  auto* info = app.add_subcommand("info", "parameter and MAC counts");
  std::optional<fs::path> info_config, info_ckpt;
  ModelFlags info_model;
  info->add_option("--config", info_config, "experiment config file");
  info->add_option("--checkpoint", info_ckpt, "read the model config from a checkpoint");
  info_model.add(*info);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kConfigError;
    }

    if (*gen) {
      const auto manifest = synth::generate_dataset(gen_opts, gen_out);
      out << "wrote " << gen_opts.scenes << " scenes x " << gen_opts.lights_per_scene
          << " lights to " << manifest.string() << "\n";
    } else if (*stats) {
      SplitFlags all;
      const auto scenes = all.load(stats_data);
      out << color::format_stats(color::chromaticity_stats(scenes));
    } else if (*train_cmd) {
      ExperimentConfig config =
          build_experiment(train_config, train_model, train_flags, train_abl);
      config.require_valid();
      if (save_config) {
        save_experiment(*save_config, config);
        out << "wrote " << save_config->string() << "\n";
        return kOk;
      }
      auto scenes = train_split.load(train_data);
      fs::create_directories(train_out);
      const auto log = [&](const train::StepRecord& r) {
        if (quiet) return;
        const auto total = config.train.total_steps;
        if (r.step % 10 == 0 || r.step + 1 == total) {
          char line[160];
          std::snprintf(line, sizeof line, "step %6lld/%lld  lr %.2e  G %.4f  D %.4f  %.2fs\n",
                        static_cast<long long>(r.step + 1), static_cast<long long>(total),
                        r.lr, r.terms.at("total"), r.discriminator, r.seconds);
          out << line << std::flush;
        }
      };
      std::optional<train::Trainer> trainer;
      if (train_resume) {
        trainer.emplace(train::Trainer::resume(
            *train_resume, std::move(scenes), train_out,
            train_flags.steps ? std::optional<std::int64_t>(*train_flags.steps) : std::nullopt));
      } else {
        trainer.emplace(config, std::move(scenes), train_out);
      }
      save_experiment(train_out / "experiment.json", trainer->config());
      trainer->run(log);
      out << "checkpoint " << trainer->last_checkpoint()->string() << "\n";
    } else if (*eval_cmd) {
      const auto scenes = eval_split.load(eval_data);
      if (!identity && !eval_ckpt) {
        throw net::ConfigError("eval needs --checkpoint or --identity");
      }
      eval_opts.max_pairs = max_pairs;
      losses::RandomFeatureProvider provider;
      std::optional<inference::Relighter> relighter;
      metrics::Predictor predictor;
      if (identity) {
        eval_opts.method = method.empty() ? "identity" : method;
        predictor = [](const ImageMap& in, const LightCondition&) { return in; };
      } else {
        relighter.emplace(inference::Relighter::from_checkpoint(*eval_ckpt));
        eval_opts.method = method.empty() ? eval_ckpt->stem().string() : method;
        predictor = metrics::model_predictor(*relighter);
      }
      const auto table = metrics::evaluate(predictor, scenes, eval_opts, provider);
      out << table.to_text(per_pair);
      if (eval_csv) {
        const auto csv = table.to_csv();
        io::write_file(*eval_csv, std::vector<std::uint8_t>(csv.begin(), csv.end()));
      }
    } else if (*relight_cmd) {
      const auto relighter = inference::Relighter::from_checkpoint(rl_ckpt);
      const auto image = load_image(rl_input);
      const auto result = relighter.relight(image, rl_light.at(rl_light.pan), rl_intrinsics);
      save_image(result.relit, rl_output);
      out << "wrote " << rl_output.string() << "\n";
      if (rl_intrinsics && result.reflectance) {
        save_image(*result.reflectance, sibling(rl_output, "_reflectance"));
        save_image(*result.shading, sibling(rl_output, "_shading"));
        out << "wrote " << sibling(rl_output, "_reflectance").string() << " and "
            << sibling(rl_output, "_shading").string() << "\n";
      } else if (rl_intrinsics) {
        err << "model has no intrinsic decomposition; only the relit image was written\n";
      }
    } else if (*anim) {
      const auto relighter = inference::Relighter::from_checkpoint(an_ckpt);
      const auto image = load_image(an_input);
      fs::create_directories(an_out);
      json index = json::array();
      for (int i = 0; i < frames; ++i) {
        const double pan = kTwoPi * static_cast<double>(i) / static_cast<double>(frames);
        const auto result = relighter.relight(image, an_light.at(pan), false);
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.png", i);
        save_image(result.relit, an_out / name);
        index.push_back({{"frame", i}, {"file", name}, {"pan", pan}, {"tilt", an_light.tilt}});
      }
      const std::string text = index.dump(2) + "\n";
      io::write_file(an_out / "frames.json", std::vector<std::uint8_t>(text.begin(), text.end()));
      out << "wrote " << frames << " frames to " << an_out.string() << "\n";
    } else if (*serve_cmd) {
      service::Service svc;
      if (sv_ckpt) {
        svc.load(std::make_shared<const inference::Relighter>(
            inference::Relighter::from_checkpoint(*sv_ckpt)));
      }
      out << "listening on http://" << host << ":" << port << "\n" << std::flush;
      service::serve(svc, host, port);
    } else if (*info) {
      net::ModelConfig model;
      if (info_ckpt) {
        model = inference::Relighter::from_checkpoint(*info_ckpt).config();
      } else if (info_config) {
        model = load_experiment(*info_config).model;
      }
      info_model.apply(model);
      model.require_valid();
      out << complexity_table(model);
    }
    return kOk;
  } catch (const net::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::out_of_range& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const io::DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace relight::cli

#include "relight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "relight/data.hpp"
#include "relight/detail/random.hpp"
#include "relight/detail/summation.hpp"
#include "relight/tensor.hpp"

namespace relight::metrics {

double psnr_from_mse(double mse) {
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const ImageMap& x, const ImageMap& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("psnr: shape mismatch");
  detail::CompensatedSum sum;
  const auto a = x.data();
  const auto b = y.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return psnr_from_mse(sum.value() / static_cast<double>(a.size()));
}

double psnr(const torch::Tensor& x, const torch::Tensor& y) {
  const auto mse = (x.to(torch::kFloat64) - y.to(torch::kFloat64)).pow(2).mean();
  return psnr_from_mse(mse.item<double>());
}

double ssim(const ImageMap& x, const ImageMap& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch");
  torch::NoGradGuard guard;
  return losses::ssim(to_tensor(x, torch::kFloat64).unsqueeze(0),
                      to_tensor(y, torch::kFloat64).unsqueeze(0))
      .item<double>();
}

double mps(double ssim_score, double lpips_score) {
  return 0.5 * (ssim_score + (1.0 - lpips_score));
}

Predictor model_predictor(const inference::Relighter& relighter) {
  return [&relighter](const ImageMap& input, const LightCondition& target) {
    return relighter.relight(input, target, false).relit;
  };
}

namespace {

struct PairRef {
  std::size_t scene;
  std::size_t input;
  std::size_t target;
};

torch::Tensor at_resolution(const ImageMap& map, int resolution) {
  return inference::resize(to_tensor(map, torch::kFloat64).unsqueeze(0),
                           resolution, resolution)
      .clamp(0.0, 1.0);
}

}  // namespace

EvalTable evaluate(const Predictor& predictor,
                   const std::vector<SceneRecord>& scenes,
                   const EvalOptions& options,
                   const losses::PerceptualProvider& perceptual) {
  if (options.resolution < 1) throw std::invalid_argument("resolution must be >= 1");
  std::vector<PairRef> pairs;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& p : data::ordered_pairs(scenes[s].captures.size())) {
      pairs.push_back({s, p[0], p[1]});
    }
  }
  if (options.max_pairs && *options.max_pairs < pairs.size()) {
    detail::Rng rng(options.seed);
    detail::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(*options.max_pairs);
  }

  EvalTable table;
  table.method = options.method;
  table.provider = perceptual.name();
  table.resolution = options.resolution;
  torch::NoGradGuard guard;
  detail::CompensatedSum s_mps, s_ssim, s_lpips, s_psnr;
  for (const auto& p : pairs) {
    const auto& scene = scenes[p.scene];
    const auto& in = scene.captures[p.input];
    const auto& gt = scene.captures[p.target];
    const ImageMap pred = predictor(in.image, gt.light);
    const auto x = at_resolution(pred, options.resolution);
    const auto y = at_resolution(gt.image, options.resolution);
    EvalRow row;
    row.scene_id = scene.scene_id;
    row.input = p.input;
    row.target = p.target;
    row.ssim = losses::ssim(x, y).item<double>();
    row.lpips = perceptual.distance(x, y).mean().item<double>();
    row.psnr = psnr(x, y);
    row.mps = mps(row.ssim, row.lpips);
    s_mps += row.mps;
    s_ssim += row.ssim;
    s_lpips += row.lpips;
    s_psnr += row.psnr;
    table.rows.push_back(row);
  }
  const double n = std::max<double>(1.0, static_cast<double>(table.rows.size()));
  table.aggregate.scene_id = "mean";
  table.aggregate.mps = s_mps.value() / n;
  table.aggregate.ssim = s_ssim.value() / n;
  table.aggregate.lpips = s_lpips.value() / n;
  table.aggregate.psnr = s_psnr.value() / n;
  return table;
}

std::string EvalTable::to_text(bool per_pair) const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s\n", "Method", "MPS^",
                "SSIM^", "LPIPS_", "PSNR^");
  os << line;
  auto emit = [&](const std::string& label, const EvalRow& r) {
    std::snprintf(line, sizeof line, "%-24s %8.4f %8.4f %8.4f %8.2f\n",
                  label.c_str(), r.mps, r.ssim, r.lpips, r.psnr);
    os << line;
  };
  if (per_pair) {
    for (const auto& r : rows) {
      emit(r.scene_id + " " + std::to_string(r.input) + "->" +
               std::to_string(r.target),
           r);
    }
  }
  emit(method, aggregate);
  os << "pairs: " << rows.size() << "  resolution: " << resolution
     << "  LPIPS slot: " << provider << "\n";
  return os.str();
}

std::string EvalTable::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "method,scene_id,input,target,mps,ssim,lpips,psnr,provider\n";
  for (const auto& r : rows) {
    os << method << ',' << r.scene_id << ',' << r.input << ',' << r.target << ','
       << r.mps << ',' << r.ssim << ',' << r.lpips << ',' << r.psnr << ','
       << provider << '\n';
  }
  const auto& a = aggregate;
  os << method << ",mean,,," << a.mps << ',' << a.ssim << ',' << a.lpips << ','
     << a.psnr << ',' << provider << '\n';
  return os.str();
}

}  // namespace relight::metrics

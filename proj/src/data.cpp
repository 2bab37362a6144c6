#include "relight/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace relight::data {

std::array<std::size_t, 3> split_counts(std::size_t configurations,
                                        const SplitRatios& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("split: ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split: ratios must sum to 1");
  }
  const auto nonempty = static_cast<std::size_t>(
      std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));
  if (configurations < nonempty) {
    throw std::invalid_argument("split: " + std::to_string(configurations) +
                                " configurations cannot fill " + std::to_string(nonempty) +
                                " splits");
  }
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(configurations);
    // Nudge before flooring so 59/72 * 72 lands on 59, not 58.999...
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < configurations) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainder[i] > remainder[best] + 1e-12) best = i;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  // A positive ratio must not leave its split empty.
  for (int i = 0; i < 3; ++i) {
    if (ratios[i] > 0.0 && counts[i] == 0) {
      int donor = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[i];
    }
  }
  return counts;
}

Splits split_by_configuration(const io::Manifest& manifest, const SplitRatios& ratios,
                              std::uint64_t seed) {
  std::set<std::int64_t> unique;
  for (const auto& s : manifest.scenes) unique.insert(s.configuration_id);
  std::vector<std::int64_t> ids(unique.begin(), unique.end());
  const auto counts = split_counts(ids.size(), ratios);
  detail::Rng rng(detail::mix_seed(seed, 0x73706c74ULL));
  detail::shuffle(ids.begin(), ids.end(), rng);

  std::map<std::int64_t, int> assignment;
  std::size_t cursor = 0;
  for (int split = 0; split < 3; ++split) {
    for (std::size_t k = 0; k < counts[split]; ++k) assignment[ids[cursor++]] = split;
  }
  Splits out;
  io::Manifest* targets[3] = {&out.train, &out.validation, &out.test};
  for (io::Manifest* m : targets) {
    m->schema_version = manifest.schema_version;
    m->generator = manifest.generator;
    m->shading_falloff = manifest.shading_falloff;
    m->root = manifest.root;
  }
  for (const auto& s : manifest.scenes) {
    targets[assignment.at(s.configuration_id)]->scenes.push_back(s);
  }
  return out;
}

RelightSample make_pair(const SceneRecord& scene, std::size_t input, std::size_t target) {
  if (input >= scene.captures.size() || target >= scene.captures.size() || input == target) {
    throw std::invalid_argument("make_pair: need two distinct capture indices");
  }
  const Capture& a = scene.captures[input];
  const Capture& b = scene.captures[target];
  RelightSample s;
  s.input_image = a.image;
  s.original_light = a.light;
  s.target_light = b.light;
  s.target_image = b.image;
  if (a.reflectance) s.gt_reflectance = a.reflectance;
  if (a.shading) s.gt_shading_ori = a.shading;
  if (b.shading) s.gt_shading_new = b.shading;
  return s;
}

RelightSample sample_pair(const SceneRecord& scene, detail::Rng& rng) {
  const std::size_t n = scene.captures.size();
  if (n < 2) {
    throw std::invalid_argument("sample_pair: scene " + scene.scene_id +
                                " has fewer than two captures");
  }
  const auto input = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  auto target = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 2));
  if (target >= input) ++target;
  return make_pair(scene, input, target);
}

std::vector<std::array<std::size_t, 2>> ordered_pairs(std::size_t captures) {
  std::vector<std::array<std::size_t, 2>> out;
  for (std::size_t i = 0; i < captures; ++i) {
    for (std::size_t j = 0; j < captures; ++j) {
      if (i != j) out.push_back({i, j});
    }
  }
  return out;
}

}  // namespace relight::data

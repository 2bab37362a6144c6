#include "relight/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "relight/color.hpp"

namespace relight {

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::image:
      return "image";
    case MapKind::reflectance:
      return "reflectance";
    case MapKind::shading:
      return "shading";
  }
  return "unknown";
}

ImageMap::ImageMap(int height, int width, MapKind kind)
    : ImageMap(height, width, kind,
               std::vector<float>(static_cast<std::size_t>(
                                      std::max(height, 0)) *
                                      static_cast<std::size_t>(
                                          std::max(width, 0)) *
                                      3,
                                  0.0f)) {}

ImageMap::ImageMap(int height, int width, MapKind kind, std::vector<float> data)
    : height_(height), width_(width), kind_(kind), data_(std::move(data)) {
  if (height < 0 || width < 0) {
    throw std::invalid_argument("ImageMap: negative dimensions");
  }
  if (data_.size() != static_cast<std::size_t>(height) *
                          static_cast<std::size_t>(width) * 3) {
    throw std::invalid_argument("ImageMap: buffer size " +
                                std::to_string(data_.size()) +
                                " does not match " + std::to_string(height) +
                                "x" + std::to_string(width) + "x3");
  }
}

ImageMap ImageMap::with_kind(MapKind kind) const {
  ImageMap out = *this;
  out.kind_ = kind;
  return out;
}

ImageMap compose(const ImageMap& reflectance, const ImageMap& shading) {
  if (!reflectance.same_shape(shading)) {
    throw std::invalid_argument("compose: shape mismatch");
  }
  ImageMap out(reflectance.height(), reflectance.width(), MapKind::image);
  auto r = reflectance.data();
  auto s = shading.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = std::clamp(r[i] * s[i], 0.0f, 1.0f);
  }
  return out;
}

double max_abs_difference(const ImageMap& a, const ImageMap& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_difference: shape mismatch");
  }
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(da[i]) - db[i]));
  }
  return worst;
}

double wrap_pan(double pan) {
  double wrapped = std::fmod(pan, kTwoPi);
  if (wrapped < 0.0) wrapped += kTwoPi;
  if (wrapped >= kTwoPi) wrapped = 0.0;
  return wrapped;
}

double clamp_tilt(double tilt) { return std::clamp(tilt, 0.0, kHalfPi); }

LightCondition LightCondition::from_temperature(double pan, double tilt,
                                                double kelvin) {
  LightCondition light;
  light.pan = wrap_pan(pan);
  light.tilt = clamp_tilt(tilt);
  light.color = color::planckian_rgb(kelvin);
  light.temperature = kelvin;
  return light;
}

LightCondition LightCondition::from_rgb(double pan, double tilt, Rgb color) {
  const double peak = std::max({color[0], color[1], color[2]});
  if (!(peak > 0.0)) {
    throw std::invalid_argument("LightCondition: color must have a positive channel");
  }
  for (double& c : color) c = std::clamp(c / peak, 0.0, 1.0);
  LightCondition light;
  light.pan = wrap_pan(pan);
  light.tilt = clamp_tilt(tilt);
  light.color = color;
  return light;
}

LightCondition LightCondition::from_probe(ProbePair probe) {
  LightCondition light;
  light.variant = LightVariant::probe;
  light.probe = std::move(probe);
  return light;
}

LightEncoding encode_light(const LightCondition& light) {
  return {std::sin(light.pan),  std::cos(light.pan),  std::sin(light.tilt),
          std::cos(light.tilt), light.color[0],        light.color[1],
          light.color[2]};
}

std::array<double, 3> light_direction(double pan, double tilt) {
  const double ct = std::cos(tilt);
  return {ct * std::cos(pan), ct * std::sin(pan), std::sin(tilt)};
}

RelightSample reverse(const RelightSample& sample) {
  RelightSample out;
  out.input_image = sample.target_image;
  out.original_light = sample.target_light;
  out.target_light = sample.original_light;
  out.target_image = sample.input_image;
  out.gt_reflectance = sample.gt_reflectance;
  out.gt_shading_ori = sample.gt_shading_new;
  out.gt_shading_new = sample.gt_shading_ori;
  return out;
}

namespace {

void add(std::vector<Violation>& out, std::string field, std::string rule) {
  out.push_back({std::move(field), std::move(rule)});
}

void append(std::vector<Violation>& out, std::vector<Violation> more) {
  out.insert(out.end(), std::make_move_iterator(more.begin()),
             std::make_move_iterator(more.end()));
}

void check_intrinsics(std::vector<Violation>& out, const std::string& field,
                      const ImageMap& image, const ImageMap& reflectance,
                      const ImageMap& shading) {
  if (!image.same_shape(reflectance) || !image.same_shape(shading)) {
    add(out, field, "size: intrinsic components must match the image size");
    return;
  }
  if (max_abs_difference(image, compose(reflectance, shading)) >
      kIntrinsicTolerance) {
    add(out, field,
        "intrinsic: max |image - clip(reflectance*shading)| exceeds 1e-5");
  }
}

}  // namespace

std::vector<Violation> validate(const ImageMap& map, const std::string& field) {
  std::vector<Violation> out;
  if (map.height() < 8 || map.width() < 8) {
    add(out, field, "size: height and width must be at least 8");
  }
  if (map.size() != static_cast<std::size_t>(map.height()) * map.width() * 3) {
    add(out, field, "channels: exactly 3 channels required");
  }
  bool finite = true;
  bool in_range = true;
  const bool unit = map.kind() != MapKind::shading;
  for (float v : map.data()) {
    if (!std::isfinite(v)) {
      finite = false;
    } else if (v < 0.0f || (unit && v > 1.0f)) {
      in_range = false;
    }
  }
  if (!finite) add(out, field, "range: values must be finite");
  if (!in_range) {
    add(out, field,
        unit ? "range: " + to_string(map.kind()) + " values must lie in [0,1]"
             : std::string("range: shading values must be non-negative"));
  }
  return out;
}

std::vector<Violation> validate(const LightCondition& light,
                                const std::string& field) {
  std::vector<Violation> out;
  if (light.variant == LightVariant::probe) {
    if (!light.probe) {
      add(out, field + ".probe", "variant: probe light requires a probe pair");
    } else {
      append(out, validate(light.probe->chrome, field + ".probe.chrome"));
      append(out, validate(light.probe->gray, field + ".probe.gray"));
    }
    return out;
  }
  if (light.probe) {
    add(out, field + ".probe", "variant: vector light must not carry a probe");
  }
  if (!(light.pan >= 0.0 && light.pan < kTwoPi)) {
    add(out, field + ".pan", "range: pan must lie in [0, 2pi)");
  }
  if (!(light.tilt >= 0.0 && light.tilt <= kHalfPi)) {
    add(out, field + ".tilt", "range: tilt must lie in [0, pi/2]");
  }
  bool color_ok = true;
  double peak = 0.0;
  for (double c : light.color) {
    if (!(c >= 0.0 && c <= 1.0)) color_ok = false;
    peak = std::max(peak, c);
  }
  if (!color_ok) {
    add(out, field + ".color", "range: color channels must lie in [0,1]");
  } else if (std::abs(peak - 1.0) > 1e-9) {
    add(out, field + ".color", "normalization: max color channel must be 1");
  }
  if (light.temperature) {
    const double t = *light.temperature;
    if (!(t >= kMinTemperature && t <= kMaxTemperature)) {
      add(out, field + ".temperature",
          "range: temperature must lie in [1667, 25000] K");
    } else {
      const Rgb expected = color::planckian_rgb(t);
      for (int c = 0; c < 3; ++c) {
        if (std::abs(expected[c] - light.color[c]) > 1e-6) {
          add(out, field + ".color",
              "planckian: color must equal the Planckian color of temperature");
          break;
        }
      }
    }
  }
  return out;
}

std::vector<Violation> validate(const SceneRecord& record) {
  std::vector<Violation> out;
  if (record.captures.empty()) {
    add(out, "captures", "count: a scene needs at least one capture");
    return out;
  }
  const ImageMap& first = record.captures.front().image;
  const ImageMap* shared_reflectance = nullptr;
  for (std::size_t i = 0; i < record.captures.size(); ++i) {
    const Capture& cap = record.captures[i];
    const std::string prefix = "captures[" + std::to_string(i) + "]";
    append(out, validate(cap.light, prefix + ".light"));
    if (cap.image.kind() != MapKind::image) {
      add(out, prefix + ".image", "kind: expected an image map");
    }
    append(out, validate(cap.image, prefix + ".image"));
    if (!cap.image.same_shape(first)) {
      add(out, prefix + ".image", "size: all captures must share H x W");
    }
    if (cap.reflectance) {
      append(out, validate(*cap.reflectance, prefix + ".reflectance"));
      if (shared_reflectance == nullptr) {
        shared_reflectance = &*cap.reflectance;
      } else if (!(cap.reflectance->data().size() ==
                       shared_reflectance->data().size() &&
                   std::equal(cap.reflectance->data().begin(),
                              cap.reflectance->data().end(),
                              shared_reflectance->data().begin()))) {
        add(out, prefix + ".reflectance",
            "shared: reflectance must be identical across captures");
      }
    }
    if (cap.shading) {
      append(out, validate(*cap.shading, prefix + ".shading"));
    }
    if (cap.reflectance && cap.shading) {
      check_intrinsics(out, prefix, cap.image, *cap.reflectance, *cap.shading);
    }
  }
  return out;
}

std::vector<Violation> validate(const RelightSample& sample) {
  std::vector<Violation> out;
  append(out, validate(sample.input_image, "input_image"));
  append(out, validate(sample.target_image, "target_image"));
  if (!sample.input_image.same_shape(sample.target_image)) {
    add(out, "target_image", "size: input and target images must match");
  }
  append(out, validate(sample.original_light, "original_light"));
  append(out, validate(sample.target_light, "target_light"));
  if (sample.gt_reflectance) {
    append(out, validate(*sample.gt_reflectance, "gt_reflectance"));
  }
  if (sample.gt_shading_ori) {
    append(out, validate(*sample.gt_shading_ori, "gt_shading_ori"));
  }
  if (sample.gt_shading_new) {
    append(out, validate(*sample.gt_shading_new, "gt_shading_new"));
  }
  if (sample.gt_reflectance && sample.gt_shading_ori) {
    check_intrinsics(out, "gt_shading_ori", sample.input_image,
                     *sample.gt_reflectance, *sample.gt_shading_ori);
  }
  if (sample.gt_reflectance && sample.gt_shading_new) {
    check_intrinsics(out, "gt_shading_new", sample.target_image,
                     *sample.gt_reflectance, *sample.gt_shading_new);
  }
  return out;
}

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].field << ": " << violations[i].rule;
  }
  return os.str();
}

}  // namespace relight

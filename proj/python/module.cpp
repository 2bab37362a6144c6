#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "relight/cli.hpp"
#include "relight/color.hpp"
#include "relight/inference.hpp"
#include "relight/io.hpp"
#include "relight/losses.hpp"
#include "relight/metrics.hpp"
#include "relight/synth.hpp"

namespace py = pybind11;
using namespace relight;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

ImageMap to_map(const Array& a, MapKind kind) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw std::invalid_argument("expected an H x W x 3 array");
  }
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<float> data(a.data(), a.data() + a.size());
  return ImageMap(h, w, kind, std::move(data));
}

Array to_array(const ImageMap& m) {
  Array out({m.height(), m.width(), 3});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

MapKind kind_of(const std::string& name) {
  if (name == "image") return MapKind::image;
  if (name == "reflectance") return MapKind::reflectance;
  if (name == "shading") return MapKind::shading;
  throw std::invalid_argument("unknown map kind " + name);
}

LightCondition light_of(double pan, double tilt, std::optional<double> temperature,
                        std::optional<Rgb> rgb) {
  if (temperature.has_value() == rgb.has_value()) {
    throw std::invalid_argument("give exactly one of temperature or rgb");
  }
  return temperature ? LightCondition::from_temperature(pan, tilt, *temperature)
                     : LightCondition::from_rgb(pan, tilt, *rgb);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "two-stage relighting core";

  m.def("planckian_rgb", &color::planckian_rgb, py::arg("kelvin"));
  m.def("f_ac", py::overload_cast<double, double>(&losses::f_ac), py::arg("x"),
        py::arg("alpha") = 0.1);
  m.def("mps", &metrics::mps, py::arg("ssim"), py::arg("lpips"));
  m.def("psnr_from_mse", &metrics::psnr_from_mse, py::arg("mse"));
  m.def(
      "psnr",
      [](const Array& x, const Array& y) {
        return metrics::psnr(to_map(x, MapKind::image), to_map(y, MapKind::image));
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "ssim",
      [](const Array& x, const Array& y) {
        return metrics::ssim(to_map(x, MapKind::image), to_map(y, MapKind::image));
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "compose",
      [](const Array& r, const Array& s) {
        return to_array(compose(to_map(r, MapKind::reflectance), to_map(s, MapKind::shading)));
      },
      py::arg("reflectance"), py::arg("shading"));
  m.def(
      "encode_light",
      [](double pan, double tilt, std::optional<double> temperature, std::optional<Rgb> rgb) {
        return encode_light(light_of(pan, tilt, temperature, rgb));
      },
      py::arg("pan"), py::arg("tilt"), py::arg("temperature") = py::none(),
      py::arg("rgb") = py::none());
  m.def(
      "render",
      [](std::uint64_t scene_seed, std::uint64_t light_seed, int resolution) {
        const auto r = synth::render(synth::sample_scene(scene_seed),
                                     synth::sample_light(light_seed), resolution);
        py::dict out;
        out["image"] = to_array(r.image);
        out["reflectance"] = to_array(r.reflectance);
        out["shading"] = to_array(r.shading);
        return out;
      },
      py::arg("scene_seed"), py::arg("light_seed"), py::arg("resolution") = 128);
  m.def(
      "validate",
      [](const Array& a, const std::string& kind) {
        std::vector<std::string> out;
        for (const auto& v : validate(to_map(a, kind_of(kind)), "map")) {
          out.push_back(v.field + ": " + v.rule);
        }
        return out;
      },
      py::arg("array"), py::arg("kind") = "image");

  py::class_<inference::Relighter, std::shared_ptr<inference::Relighter>>(m, "Relighter")
      .def(py::init([](const std::string& path) {
             return std::make_shared<inference::Relighter>(
                 inference::Relighter::from_checkpoint(path));
           }),
           py::arg("checkpoint"))
      .def_property_readonly("checkpoint_id", &inference::Relighter::checkpoint_id)
      .def_property_readonly("parameter_count", &inference::Relighter::parameter_count)
      .def_property_readonly("two_stage", &inference::Relighter::two_stage)
      .def(
          "relight",
          [](const inference::Relighter& self, const Array& image, double pan, double tilt,
             std::optional<double> temperature, std::optional<Rgb> rgb, bool intrinsics) {
            const auto light = light_of(pan, tilt, temperature, rgb);
            const auto map = to_map(image, MapKind::image);
            inference::RelightResult r;
            {
              py::gil_scoped_release release;
              r = self.relight(map, light, intrinsics);
            }
            py::dict out;
            out["relit"] = to_array(r.relit);
            if (r.reflectance) out["reflectance"] = to_array(*r.reflectance);
            if (r.shading && intrinsics) out["shading"] = to_array(*r.shading);
            if (r.original_light) out["original_light"] = *r.original_light;
            return out;
          },
          py::arg("image"), py::arg("pan"), py::arg("tilt"), py::arg("temperature") = py::none(),
          py::arg("rgb") = py::none(), py::arg("intrinsics") = false);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"relight"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));

  // Out-of-range light parameters are argument errors on the Python side.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const std::out_of_range& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  py::register_exception<net::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<io::DataError>(m, "DataError", PyExc_IOError);
}

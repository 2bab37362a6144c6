#include "relight/service.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "httplib.h"
#include "json.hpp"
#include "relight/io.hpp"

namespace relight::service {

using json = nlohmann::json;

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<std::int8_t, 256> decode_table() {
  std::array<std::int8_t, 256> t{};
  for (auto& v : t) v = -1;
  for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
  return t;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static constexpr auto table = decode_table();
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t symbols = 0;
  std::size_t padding = 0;
  for (const char ch : text) {
    if (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t') continue;
    if (ch == '=') {
      ++padding;
      ++symbols;
      continue;
    }
    if (padding > 0) throw std::invalid_argument("base64: data after padding");
    const auto v = table[static_cast<unsigned char>(ch)];
    if (v < 0) throw std::invalid_argument("base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    ++symbols;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (symbols % 4 != 0 || padding > 2) {
    throw std::invalid_argument("base64: length is not a multiple of 4");
  }
  return out;
}

namespace {

Response error(int status, const std::string& field, const std::string& message) {
  Response r;
  r.status = status;
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  r.body = body.dump();
  return r;
}

struct BadField {
  std::string field;
  std::string message;
};

double number(const json& req, const char* field) {
  if (!req.contains(field)) throw BadField{field, std::string("missing ") + field};
  const auto& v = req.at(field);
  if (!v.is_number()) throw BadField{field, std::string(field) + " must be a number"};
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw BadField{field, std::string(field) + " must be finite"};
  return d;
}

bool flag(const json& req, const char* field) {
  if (!req.contains(field)) return false;
  if (!req.at(field).is_boolean()) {
    throw BadField{field, std::string(field) + " must be a boolean"};
  }
  return req.at(field).get<bool>();
}

std::string choice(const json& req, const char* field, const std::string& fallback) {
  if (!req.contains(field)) return fallback;
  const auto& v = req.at(field);
  if (!v.is_string() || (v != "png" && v != "rlmap")) {
    throw BadField{field, std::string(field) + " must be \"png\" or \"rlmap\""};
  }
  return v.get<std::string>();
}

bool has_prefix(const std::vector<std::uint8_t>& bytes, std::string_view magic) {
  return bytes.size() >= magic.size() &&
         std::equal(magic.begin(), magic.end(), bytes.begin(),
                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

std::string encode(const ImageMap& map, const std::string& format) {
  const auto bytes = format == "png" ? io::encode_png(map) : io::encode_map(map);
  return base64_encode(bytes);
}

}  // namespace

Service::Service(ServiceOptions options) : options_(options) {}

void Service::load(std::shared_ptr<const inference::Relighter> relighter) {
  std::lock_guard lock(mutex_);
  relighter_ = std::move(relighter);
}

std::shared_ptr<const inference::Relighter> Service::current() const {
  std::lock_guard lock(mutex_);
  return relighter_;
}

bool Service::ready() const { return current() != nullptr; }

Response Service::health() const {
  Response r;
  const bool ok = ready();
  r.status = ok ? 200 : 503;
  r.body = json{{"status", ok ? "ready" : "not-ready"}}.dump();
  return r;
}

Response Service::model_info() const {
  const auto model = current();
  if (!model) return error(503, "", "no model loaded");
  const auto c = model->config();
  Response r;
  r.body = json{{"model_config", c},
                {"parameter_count", model->parameter_count()},
                {"checkpoint_id", model->checkpoint_id()},
                {"image_size", c.image_size},
                {"two_stage", c.use_two_stage}}
               .dump();
  return r;
}

Response Service::relight(const std::string& body) const {
  if (body.size() > options_.max_body_bytes) {
    return error(413, "", "request body exceeds " +
                              std::to_string(options_.max_body_bytes) + " bytes");
  }
  const auto model = current();
  if (!model) return error(503, "", "no model loaded");

  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception&) {
    return error(400, "body", "request body is not valid JSON");
  }
  if (!req.is_object()) return error(400, "body", "request body must be a JSON object");

  try {
    static const std::array<std::string, 8> known = {
        "image", "image_format", "pan", "tilt", "temperature", "rgb",
        "return_intrinsics", "output_format"};
    for (const auto& [key, unused] : req.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw BadField{key, "unknown field " + key};
      }
    }

    const double pan = number(req, "pan");
    if (pan < -2.0 * kPi || pan > 2.0 * kPi) {
      throw BadField{"pan", "pan must lie in [-2pi, 2pi] radians"};
    }
    const double tilt = number(req, "tilt");
    if (tilt < 0.0 || tilt > kHalfPi) {
      throw BadField{"tilt", "tilt must lie in [0, pi/2] radians"};
    }
    const bool has_t = req.contains("temperature");
    const bool has_rgb = req.contains("rgb");
    if (has_t == has_rgb) {
      throw BadField{"temperature", "give exactly one of temperature or rgb"};
    }
    LightCondition light;
    if (has_t) {
      const double k = number(req, "temperature");
      if (k < kMinTemperature || k > kMaxTemperature) {
        throw BadField{"temperature", "temperature must lie in [1667, 25000] K"};
      }
      light = LightCondition::from_temperature(pan, tilt, k);
    } else {
      const auto& v = req.at("rgb");
      if (!v.is_array() || v.size() != 3) {
        throw BadField{"rgb", "rgb must be an array of three numbers"};
      }
      Rgb rgb{};
      double peak = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        if (!v[i].is_number() || !std::isfinite(v[i].get<double>()) ||
            v[i].get<double>() < 0.0) {
          throw BadField{"rgb", "rgb entries must be finite and non-negative"};
        }
        rgb[i] = v[i].get<double>();
        peak = std::max(peak, rgb[i]);
      }
      if (!(peak > 0.0)) throw BadField{"rgb", "rgb must have a positive entry"};
      light = LightCondition::from_rgb(pan, tilt, rgb);
    }
    const bool intrinsics = flag(req, "return_intrinsics");
    if (intrinsics && !model->two_stage()) {
      throw BadField{"return_intrinsics",
                     "the loaded model has no intrinsic decomposition"};
    }
    const std::string out_format = choice(req, "output_format", "png");

    if (!req.contains("image") || !req.at("image").is_string()) {
      throw BadField{"image", "image must be a base64 string"};
    }
    std::vector<std::uint8_t> bytes;
    try {
      bytes = base64_decode(req.at("image").get_ref<const std::string&>());
    } catch (const std::invalid_argument& e) {
      throw BadField{"image", std::string("image: ") + e.what()};
    }
    const std::string in_format = choice(
        req, "image_format", has_prefix(bytes, std::string_view("RLMAP\0\0\0", 8)) ? "rlmap" : "png");
    ImageMap image;
    try {
      image = in_format == "png" ? io::decode_png(bytes) : io::decode_map(bytes);
    } catch (const std::exception& e) {
      throw BadField{"image", std::string("image could not be decoded: ") + e.what()};
    }
    if (image.kind() != MapKind::image) {
      throw BadField{"image", "image payload must be an image map"};
    }
    if (static_cast<std::int64_t>(image.height()) * image.width() > options_.max_pixels) {
      return error(413, "image", "image exceeds " + std::to_string(options_.max_pixels) +
                                     " pixels");
    }
    const auto problems = validate(image, "image");
    if (!problems.empty()) throw BadField{"image", describe(problems)};

    const auto start = std::chrono::steady_clock::now();
    const auto result = model->relight(image, light, intrinsics);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();

    json out = {{"format", out_format},
                {"width", result.relit.width()},
                {"height", result.relit.height()},
                {"checkpoint_id", model->checkpoint_id()},
                {"relit", encode(result.relit, out_format)}};
    if (intrinsics) {
      out["reflectance"] = encode(*result.reflectance, out_format);
      out["shading"] = encode(*result.shading, out_format);
    }
    if (result.original_light) {
      out["original_light"] = *result.original_light;
    }
    Response r;
    r.body = out.dump();
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.3f", ms);
    r.headers["X-Inference-Time-Ms"] = timing;
    r.headers["X-Checkpoint-Id"] = model->checkpoint_id();
    return r;
  } catch (const BadField& bad) {
    return error(400, bad.field, bad.message);
  } catch (const net::ConfigError& e) {
    return error(400, "", e.what());
  }
}

void Service::mount(httplib::Server& server) const {
  server.set_payload_max_length(options_.max_body_bytes);
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  server.Post("/relight", [this, reply](const httplib::Request& req,
                                        httplib::Response& res) {
    reply(res, relight(req.body));
  });
  server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, health());
  });
  server.Get("/model-info", [this, reply](const httplib::Request&,
                                          httplib::Response& res) {
    reply(res, model_info());
  });
}

void serve(const Service& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace relight::service

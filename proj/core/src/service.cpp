#include "sqseg/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "sqseg/geometry.hpp"
#include "sqseg/image_io.hpp"
#include "sqseg/rle.hpp"
#include "sqseg/tensor_io.hpp"

namespace sqseg {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

struct RequestError {
  int status;
  std::string message;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

HttpResult json_result(int status, const nlohmann::json& j) { return {status, j.dump()}; }

HttpResult error_result(const RequestError& e) { return json_result(e.status, {{"error", e.message}}); }

nlohmann::json parse_body(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw RequestError{400, "request body must be a JSON object"};
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError{400, std::string("malformed JSON: ") + e.what()};
  }
}

std::vector<Squiggle> parse_squiggles(const nlohmann::json& req, const Palette& palette, bool required) {
  if (!req.contains("squiggles")) {
    if (required) throw RequestError{400, "squiggles: field is required"};
    return {};
  }
  const auto& arr = req["squiggles"];
  if (!arr.is_array()) throw RequestError{400, "squiggles: must be an array"};
  if (required && arr.empty()) throw RequestError{400, "squiggles: at least one squiggle is required"};
  std::vector<Squiggle> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "squiggles[" + std::to_string(i) + "]";
    if (!arr[i].is_object()) throw RequestError{400, where + ": must be an object"};
    if (const auto it = arr[i].find("class_id"); it != arr[i].end() && it->is_number_integer() &&
                                                 !palette.valid_class(it->get<int>()))
      throw RequestError{422, where + ".class_id: unknown class " + std::to_string(it->get<int>())};
    try {
      out.push_back(arr[i].get<Squiggle>());
    } catch (const std::exception& e) {
      throw RequestError{400, where + ": " + e.what()};
    }
  }
  return out;
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                            (static_cast<unsigned char>(bytes[i + 1]) << 8) | static_cast<unsigned char>(bytes[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::string out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0, pad = 0;
  for (char ch : text) {
    if (ch == '\n' || ch == '\r' || ch == ' ' || ch == '\t') continue;
    if (ch == '=') {
      ++pad;
      continue;
    }
    const int v = lookup[static_cast<unsigned char>(ch)];
    if (v < 0 || pad > 0) throw std::invalid_argument("invalid base64 data");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xFF));
    }
  }
  if (pad > 2 || bits >= 6) throw std::invalid_argument("invalid base64 length");
  return out;
}

SegmentService::SegmentService(ServiceConfig config) : config_(std::move(config)) {
  if (!config_.model) throw std::invalid_argument("SegmentService: no model");
  const int n = config_.max_concurrent > 0 ? config_.max_concurrent : default_thread_count();
  slots_ = std::make_unique<std::counting_semaphore<>>(n);
}

void SegmentService::log_line(const nlohmann::json& line) const {
  if (!config_.log) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  *config_.log << line.dump() << '\n' << std::flush;
}

HttpResult SegmentService::health() const {
  return json_result(200, {{"status", "ok"}, {"model_id", config_.model->model_id()}});
}

HttpResult SegmentService::palette() const {
  return json_result(200, {{"classes", config_.palette}});
}

namespace {

std::string load_image_bytes(const nlohmann::json& field, const ServiceConfig& cfg) {
  std::string b64, path;
  if (field.is_string()) {
    const std::string s = field.get<std::string>();
    constexpr std::string_view prefix = "data:image/png;base64,";
    if (s.starts_with(prefix)) b64 = s.substr(prefix.size());
    else path = s;
  } else if (field.is_object() && field.contains("base64") && field["base64"].is_string()) {
    b64 = field["base64"].get<std::string>();
  } else if (field.is_object() && field.contains("path") && field["path"].is_string()) {
    path = field["path"].get<std::string>();
  } else {
    throw RequestError{400, "image: expected a data URL, {\"base64\": ...} or {\"path\": ...}"};
  }

  if (!path.empty() || b64.empty()) {
    if (!cfg.data_dir) throw RequestError{400, "image.path: server has no data directory configured"};
    const std::filesystem::path rel(path);
    if (path.empty() || rel.is_absolute()) throw RequestError{400, "image.path: must be a relative path"};
    for (const auto& part : rel)
      if (part == "..") throw RequestError{400, "image.path: must stay inside the data directory"};
    const auto full = *cfg.data_dir / rel;
    std::error_code ec;
    const auto size = std::filesystem::file_size(full, ec);
    if (ec) throw RequestError{400, "image.path: cannot read '" + path + "'"};
    if (size > cfg.max_image_bytes) throw RequestError{413, "image exceeds " + std::to_string(cfg.max_image_bytes) + " bytes"};
    try {
      return read_file_bytes(full);
    } catch (const std::exception&) {
      throw RequestError{400, "image.path: cannot read '" + path + "'"};
    }
  }
  if (b64.size() / 4 * 3 > cfg.max_image_bytes + 3)
    throw RequestError{413, "image exceeds " + std::to_string(cfg.max_image_bytes) + " bytes"};
  std::string bytes;
  try {
    bytes = base64_decode(b64);
  } catch (const std::invalid_argument& e) {
    throw RequestError{400, std::string("image: ") + e.what()};
  }
  if (bytes.size() > cfg.max_image_bytes)
    throw RequestError{413, "image exceeds " + std::to_string(cfg.max_image_bytes) + " bytes"};
  return bytes;
}

}  // namespace

HttpResult SegmentService::segment(const std::string& body) {
  const auto t0 = Clock::now();
  try {
    const auto req = parse_body(body);
    if (!req.contains("image")) throw RequestError{400, "image: field is required"};
    const auto squiggles = parse_squiggles(req, config_.palette, true);
    if (req.contains("model_id")) {
      if (!req["model_id"].is_string()) throw RequestError{400, "model_id: must be a string"};
      if (req["model_id"].get<std::string>() != config_.model->model_id())
        throw RequestError{400, "model_id: unknown model '" + req["model_id"].get<std::string>() + "'"};
    }
    bool return_probs = false;
    if (req.contains("return_probs")) {
      if (!req["return_probs"].is_boolean()) throw RequestError{400, "return_probs: must be a boolean"};
      return_probs = req["return_probs"].get<bool>();
    }

    const std::string png = load_image_bytes(req["image"], config_);
    Tensor rgb;
    try {
      rgb = decode_rgb_png(png);
    } catch (const ImageError& e) {
      throw RequestError{400, std::string("image: ") + e.what()};
    }
    for (const auto& s : squiggles)
      for (const auto& p : s.points)
        if (!(std::isfinite(p.x) && std::isfinite(p.y)))
          throw RequestError{400, "squiggles: coordinates must be finite"};
    const double t_decode = ms_since(t0);

    const auto t1 = Clock::now();
    SceneResult scene{LabelMask(1, 1), {}};
    {
      slots_->acquire();
      struct Release {
        std::counting_semaphore<>* s;
        ~Release() { s->release(); }
      } release{slots_.get()};
      SceneOptions opts;
      opts.stain_target = config_.stain_target;
      scene = segment_scene(rgb, squiggles, *config_.model, config_.palette.num_classes(), opts);
    }
    const double t_infer = ms_since(t1);

    const auto t2 = Clock::now();
    nlohmann::json mask = rle_to_json(scene.labels);
    mask["palette"] = config_.palette;
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& m : scene.probmaps) {
      double lo = 1.0, hi = 0.0, sum = 0.0;
      for (float v : m.probs) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
        sum += v;
      }
      nlohmann::json entry{{"min", lo}, {"mean", sum / static_cast<double>(m.probs.size())}, {"max", hi}};
      if (return_probs)
        entry["tensor"] = base64_encode(encode_raw_tensor(
            Tensor({1, static_cast<std::size_t>(m.height), static_cast<std::size_t>(m.width)}, m.probs)));
      per_class[std::to_string(m.class_id)] = std::move(entry);
    }
    const double t_encode = ms_since(t2);
    const nlohmann::json timing{{"decode", t_decode}, {"inference", t_infer}, {"encode", t_encode}, {"total", ms_since(t0)}};
    log_line({{"event", "segment"}, {"status", 200}, {"width", scene.labels.width()},
              {"height", scene.labels.height()}, {"timing_ms", timing}});
    return json_result(200, {{"model_id", config_.model->model_id()},
                             {"label_mask", std::move(mask)},
                             {"per_class", std::move(per_class)},
                             {"timing_ms", timing}});
  } catch (const RequestError& e) {
    log_line({{"event", "segment"}, {"status", e.status}, {"error", e.message}});
    return error_result(e);
  } catch (const std::invalid_argument& e) {
    log_line({{"event", "segment"}, {"status", 400}, {"error", e.what()}});
    return error_result({400, e.what()});
  } catch (const std::exception& e) {
    std::ostringstream id;
    id << std::hex << std::setw(8) << std::setfill('0') << (++error_counter_ * 0x9E3779B1u & 0xFFFFFFFFu);
    log_line({{"event", "segment"}, {"status", 500}, {"error_id", id.str()}, {"detail", e.what()}});
    return json_result(500, {{"error", "internal error"}, {"error_id", id.str()}});
  }
}

HttpResult SegmentService::export_annotations(const std::string& body) const {
  try {
    const auto req = parse_body(body);
    nlohmann::json features = nlohmann::json::array();
    if (req.contains("label_mask")) {
      LabelMask labels(1, 1);
      try {
        labels = rle_from_json(req["label_mask"], config_.palette.num_classes());
      } catch (const std::exception& e) {
        throw RequestError{400, std::string("label_mask: ") + e.what()};
      }
      for (int c : labels.present_classes()) {
        const ClassInfo* info = config_.palette.find(c);
        for (const auto& poly : mask_to_polygons(labels.class_mask(c))) {
          nlohmann::json ring = nlohmann::json::array();
          for (const auto& v : poly.vertices) ring.push_back({v.x, v.y});
          ring.push_back(ring.front());
          features.push_back({{"type", "Feature"},
                              {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}},
                              {"properties",
                               {{"class_id", c},
                                {"name", info ? info->name : ""},
                                {"color", color_hex(config_.palette.color(c))},
                                {"hole", poly.signed_area() < 0}}}});
        }
      }
    }
    for (const auto& s : parse_squiggles(req, config_.palette, false)) {
      nlohmann::json line = nlohmann::json::array();
      for (const auto& p : s.points) line.push_back({p.x, p.y});
      features.push_back({{"type", "Feature"},
                          {"geometry", {{"type", "LineString"}, {"coordinates", line}}},
                          {"properties", {{"class_id", s.class_id}, {"radius", s.radius}, {"kind", "squiggle"}}}});
    }
    if (!req.contains("label_mask") && !req.contains("squiggles"))
      throw RequestError{400, "expected label_mask and/or squiggles"};
    return json_result(200, {{"type", "FeatureCollection"}, {"features", features}});
  } catch (const RequestError& e) {
    return error_result(e);
  } catch (const std::exception& e) {
    return error_result({400, e.what()});
  }
}

HttpResult SegmentService::handle(const std::string& method, const std::string& path, const std::string& body) {
  if (method == "GET" && path == "/api/health") return health();
  if (method == "GET" && path == "/api/palette") return palette();
  if (method == "POST" && path == "/api/segment") return segment(body);
  if (method == "POST" && path == "/api/export") return export_annotations(body);
  return json_result(404, {{"error", "no route for " + method + " " + path}});
}

struct HttpServer::Impl {
  std::shared_ptr<SegmentService> service;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<SegmentService> service, int worker_threads) : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  const std::size_t workers = static_cast<std::size_t>(std::max(1, worker_threads));
  impl_->server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  // base64 inflates by 4/3; leave room for the JSON around the image.
  impl_->server.set_payload_max_length(impl_->service->config().max_image_bytes / 3 * 4 + (1u << 20));
  auto route = [svc = impl_->service](const httplib::Request& req, httplib::Response& res) {
    const HttpResult r = svc->handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get("/api/health", route);
  impl_->server.Get("/api/palette", route);
  impl_->server.Post("/api/segment", route);
  impl_->server.Post("/api/export", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace sqseg

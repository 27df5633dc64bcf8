#include "ssr/service.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <httplib.h>

namespace ssr {

using nlohmann::json;

namespace {

struct BadRequest {
  int status;
  std::string message;
};

Sketch sketch_from_request(const json& request, std::size_t max_strokes) {
  if (!request.is_object() || !request.contains("strokes")) throw BadRequest{400, "body must be an object with 'strokes'"};
  const json& strokes = request.at("strokes");
  if (!strokes.is_array()) throw BadRequest{400, "'strokes' must be a list of strokes"};
  if (strokes.empty()) throw BadRequest{422, "sketch has no strokes"};
  if (strokes.size() > max_strokes) {
    throw BadRequest{422, fmt::format("sketch has {} strokes; the model accepts at most {}", strokes.size(), max_strokes)};
  }
  Sketch sketch;
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    const json& stroke = strokes[i];
    if (!stroke.is_array()) throw BadRequest{400, fmt::format("stroke {} must be a list of [x, y] points", i)};
    if (stroke.empty()) throw BadRequest{422, fmt::format("stroke {} has no points", i)};
    std::vector<std::pair<double, double>> xy;
    for (const json& pt : stroke) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        throw BadRequest{400, fmt::format("stroke {} has a point that is not [x, y]", i)};
      }
      xy.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    }
    sketch.strokes.push_back(Stroke::from_xy(xy));
  }
  return normalize(sketch);
}

}  // namespace

RecognitionService::RecognitionService(LoadedCheckpoint checkpoint) : checkpoint_(std::move(checkpoint)) {}

json RecognitionService::model_info() const {
  const SsrModel& m = checkpoint_.model;
  return {{"scenario", to_string(m.scenario().scenario)},
          {"token_path", to_string(m.scenario().path)},
          {"fusion_mode", to_string(m.scenario().fusion)},
          {"label_space", label_space_to_json(m.labels())},
          {"dims", model_config_to_json(m.model_config())},
          {"checkpoint_hash", checkpoint_.hash}};
}

RecognitionService::Response RecognitionService::recognize(const std::string& body) const {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception& e) {
    return {400, {{"error", fmt::format("malformed JSON: {}", e.what())}}};
  }
  return recognize(request);
}

RecognitionService::Response RecognitionService::recognize(const json& request) const {
  const SsrModel& m = checkpoint_.model;
  const LabelSpace& labels = m.labels();
  Sketch sketch;
  try {
    sketch = sketch_from_request(request, m.model_config().max_strokes);
  } catch (const BadRequest& e) {
    return {e.status, {{"error", e.message}}};
  } catch (const std::exception& e) {
    return {400, {{"error", e.what()}}};
  }

  Prediction p;
  {
    NoGradGuard no_grad;
    p = m.predict(sketch);
  }

  json out;
  std::vector<std::size_t> rank(p.category_probs.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return p.category_probs[a] > p.category_probs[b]; });
  out["categories"] = json::array();
  for (std::size_t c : rank) out["categories"].push_back({{"name", labels.category_names[c]}, {"p", p.category_probs[c]}});

  // Components named in the explanation, in component-id order.
  std::set<std::size_t> detected;
  const Scenario scenario = m.scenario().scenario;
  if (scenario == Scenario::kLabelsFull) {
    out["stroke_components"] = json::array();
    for (std::size_t i = 0; i < p.stroke_components.size(); ++i) {
      const std::size_t id = p.stroke_components[i];
      out["stroke_components"].push_back(
          {{"id", id}, {"name", labels.component_names[id]}, {"p", p.stroke_confidence[i]}});
      detected.insert(id);
    }
  } else if (scenario == Scenario::kPriorInfo) {
    out["existence"] = json::array();
    for (std::size_t j = 0; j < p.existence_probs.size(); ++j) {
      out["existence"].push_back({{"name", labels.component_names[j]}, {"p", p.existence_probs[j]}});
      if (p.existence_probs[j] >= 0.5) detected.insert(j);
    }
  } else {
    detected.insert(p.assigned_components.begin(), p.assigned_components.end());
  }
  out["assignment"] = p.assignment;

  std::string parts;
  for (std::size_t j : detected) parts += (parts.empty() ? "" : ", ") + labels.component_names[j];
  out["explanation"] =
      detected.empty()
          ? fmt::format("recognized as {}; no semantic components detected", labels.category_names[p.category])
          : fmt::format("recognized as {} because it is composed of {}", labels.category_names[p.category], parts);
  return {200, std::move(out)};
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(const RecognitionService& service) : impl_(std::make_unique<Impl>()) {
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  };
  impl_->server.Get("/healthz", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, service.health());
  });
  impl_->server.Get("/model", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, service.model_info());
  });
  impl_->server.Post("/recognize", [&service, send](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.recognize(req.body);
    send(res, r.status, r.body);
  });
  // The vendored server also sets SO_REUSEPORT, which would let a second
  // instance share a busy port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  // The drawing UI may be served from another origin.
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  impl_->server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error(fmt::format("cannot bind {}", host));
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error(fmt::format("cannot bind {}:{} (port busy or not permitted)", host, port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace ssr

#include "dronegate/gate.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dronegate/text.hpp"

namespace dronegate::gate {

namespace {

using nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(cat("cannot open '", path.string(), "'"));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string require_config_string(const nlohmann::json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) {
    throw ConfigError(cat("config needs a text field '", key, "'"));
  }
  return it->get<std::string>();
}

classifier::ClassifierConfig parse_classifier_config(const nlohmann::json& doc) {
  classifier::ClassifierConfig config;
  if (doc.contains("kind")) {
    const std::string kind = require_config_string(doc, "kind");
    if (kind == "static") {
      config.kind = classifier::ClassifierKind::Static;
    } else if (kind == "remote") {
      config.kind = classifier::ClassifierKind::Remote;
    } else if (kind == "scripted") {
      config.kind = classifier::ClassifierKind::Scripted;
    } else {
      throw ConfigError(cat("unknown classifier kind '", kind, "'"));
    }
  }
  if (doc.contains("use_kgp")) {
    if (!doc["use_kgp"].is_boolean()) throw ConfigError("use_kgp must be true or false");
    config.use_kgp = doc["use_kgp"].get<bool>();
  }
  if (doc.contains("endpoint")) config.endpoint = require_config_string(doc, "endpoint");
  if (doc.contains("model_name")) config.model_name = require_config_string(doc, "model_name");
  if (doc.contains("timeout_ms")) {
    if (!doc["timeout_ms"].is_number_integer() || doc["timeout_ms"].get<long>() <= 0) {
      throw ConfigError("timeout_ms must be a positive integer");
    }
    config.timeout_ms = doc["timeout_ms"].get<long>();
  }
  return config;
}

std::string error_response(const ordered_json& id, const std::string& message) {
  ordered_json doc;
  doc["id"] = id;
  doc["error"] = message;
  return doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

ConfigError::ConfigError(const std::string& reason)
    : std::runtime_error(cat("config error: ", reason)) {}

BindError::BindError(const std::string& reason)
    : std::runtime_error(cat("bind error: ", reason)) {}

GateConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError(cat("'", path.string(), "' is not a structured-text object"));
  }
  GateConfig config;
  const std::filesystem::path base =
      path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const auto resolve = [&base](const std::string& raw) {
    const std::filesystem::path p(raw);
    return p.is_absolute() ? p : base / p;
  };
  config.scene_path = resolve(require_config_string(doc, "scene_path"));
  config.kg_path = resolve(require_config_string(doc, "kg_path"));
  config.templates_path = resolve(require_config_string(doc, "templates_path"));
  if (doc.contains("listen_address")) {
    config.listen_address = require_config_string(doc, "listen_address");
  }
  if (doc.contains("max_request_bytes")) {
    if (!doc["max_request_bytes"].is_number_integer() ||
        doc["max_request_bytes"].get<long long>() < 1024) {
      throw ConfigError("max_request_bytes must be an integer of at least 1024");
    }
    config.max_request_bytes = doc["max_request_bytes"].get<std::size_t>();
  }
  if (doc.contains("classifier")) {
    if (!doc["classifier"].is_object()) throw ConfigError("classifier must be an object");
    config.classifier = parse_classifier_config(doc["classifier"]);
  }
  return config;
}

GateContext load_context(const GateConfig& config) {
  try {
    GateContext context;
    context.scene = scene::load_scene(read_file(config.scene_path));
    const kg::KnowledgeGraph graph = kg::parse_triples(read_file(config.kg_path));
    const std::vector<kg::PredicateTemplate> templates =
        kg::parse_templates(read_file(config.templates_path));
    context.rules = kg::compile_rules(graph, templates);
    context.kgp_text =
        kg::render_kgp(graph, templates, kg::default_preamble(), kg::default_epilogue());
    return context;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

GateDecision gate_submit(const GateConfig& config, const GateContext& context,
                         const std::string& code, const std::string& request_id) {
  GateDecision decision;
  decision.request_id = request_id;
  const analyzer::Verdict verdict = analyzer::analyze(code, context.scene, context.rules);
  SafetyLabel label = verdict.label;
  if (config.classifier.kind != classifier::ClassifierKind::Static) {
    classifier::ClassifierConfig cc = config.classifier;
    if (cc.use_kgp && !cc.kgp_text) cc.kgp_text = context.kgp_text;
    classifier::ClassificationRequest request;
    request.id = request_id;
    request.code = code;
    const classifier::ClassificationResult result =
        classifier::classify(cc, request, context.scene, context.rules);
    decision.classifier_label = result.label;
    decision.classifier_rationale = result.rationale;
    // The classifier may only tighten the static verdict, never loosen it.
    if (result.label == SafetyLabel::Unsafe) label = SafetyLabel::Unsafe;
  }
  decision.label = label;
  decision.violations = verdict.violations;
  if (label == SafetyLabel::Safe && verdict.trajectory) {
    decision.flight_log = verdict.trajectory;
  }
  return decision;
}

GateDecision gate_submit(const GateConfig& config, const std::string& code) {
  return gate_submit(config, load_context(config), code);
}

std::string decision_to_json(const GateDecision& decision, int indent) {
  ordered_json doc;
  doc["id"] = decision.request_id.empty() ? ordered_json() : ordered_json(decision.request_id);
  const analyzer::Verdict verdict{decision.label, decision.violations, std::nullopt};
  const auto verdict_doc = ordered_json::parse(analyzer::verdict_to_json(verdict));
  doc["label"] = verdict_doc.at("label");
  doc["violations"] = verdict_doc.at("violations");
  if (decision.flight_log) {
    doc["flight_log"] = ordered_json::parse(analyzer::trajectory_to_json(*decision.flight_log));
  }
  if (decision.classifier_label) {
    doc["classifier_label"] = std::string(analyzer::to_string(*decision.classifier_label));
  }
  if (decision.classifier_rationale) {
    doc["classifier_rationale"] = *decision.classifier_rationale;
  }
  // Hostile request bytes can flow into violation details; replace invalid
  // sequences rather than letting serialization fail after a verdict exists.
  return doc.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

GateService::GateService(GateConfig config)
    : config_(std::move(config)), context_(load_context(config_)) {}

GateService::~GateService() { stop(); }

void GateService::start() {
  const std::size_t colon = config_.listen_address.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw BindError(cat("listen address '", config_.listen_address, "' must be host:port"));
  }
  std::string host = config_.listen_address.substr(0, colon);
  const std::string port_text = config_.listen_address.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] =
      std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 ||
      port > 65535) {
    throw BindError(cat("invalid port '", port_text, "'"));
  }
  if (host == "localhost") host = "127.0.0.1";

  sockaddr_in address{};
  address.sin_family = AF_INET;
  address.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &address.sin_addr) != 1) {
    throw BindError(cat("invalid IPv4 host '", host, "'"));
  }

  listen_fd_ = socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw BindError(std::strerror(errno));
  const int enable = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &enable, sizeof enable);
  if (bind(listen_fd_, reinterpret_cast<const sockaddr*>(&address), sizeof address) != 0) {
    const std::string reason = std::strerror(errno);
    close(listen_fd_);
    listen_fd_ = -1;
    throw BindError(cat("cannot bind ", config_.listen_address, ": ", reason));
  }
  if (listen(listen_fd_, 16) != 0) {
    const std::string reason = std::strerror(errno);
    close(listen_fd_);
    listen_fd_ = -1;
    throw BindError(cat("cannot listen on ", config_.listen_address, ": ", reason));
  }
  sockaddr_in bound{};
  socklen_t bound_len = sizeof bound;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &bound_len);
  port_ = ntohs(bound.sin_port);

  running_ = true;
  acceptor_ = std::thread(&GateService::accept_loop, this);
}

void GateService::stop() {
  running_ = false;
  if (listen_fd_ >= 0) {
    shutdown(listen_fd_, SHUT_RDWR);
    close(listen_fd_);
    listen_fd_ = -1;
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const int fd : connections_) shutdown(fd, SHUT_RDWR);
    workers.swap(threads_);
  }
  for (std::thread& worker : workers) worker.join();
}

void GateService::accept_loop() {
  while (running_) {
    const int fd = accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener went away (stop) or failed for good
    }
    std::lock_guard<std::mutex> lock(mutex_);
    if (!running_) {
      close(fd);
      break;
    }
    connections_.push_back(fd);
    threads_.emplace_back(&GateService::serve_connection, this, fd);
  }
}

namespace {

void send_line(int fd, std::string line) {
  line += '\n';
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = send(fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return;  // peer is gone; the connection loop will notice on recv
    }
    sent += static_cast<std::size_t>(n);
  }
}

}  // namespace

void GateService::serve_connection(int fd) {
  std::string buffer;
  bool discarding = false;
  char chunk[4096];
  for (;;) {
    const ssize_t n = recv(fd, chunk, sizeof chunk, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    std::size_t newline;
    while ((newline = buffer.find('\n', start)) != std::string::npos) {
      std::string line = buffer.substr(start, newline - start);
      start = newline + 1;
      if (discarding) {
        discarding = false;
        send_line(fd, error_response(nullptr, "request line exceeds the size limit"));
        continue;
      }
      if (line.size() > config_.max_request_bytes) {
        send_line(fd, error_response(nullptr, "request line exceeds the size limit"));
        continue;
      }
      send_line(fd, handle_request_line(line));
    }
    buffer.erase(0, start);
    if (discarding) {
      buffer.clear();
    } else if (buffer.size() > config_.max_request_bytes) {
      buffer.clear();
      discarding = true;
    }
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    std::erase(connections_, fd);
  }
  close(fd);
}

std::string GateService::handle_request_line(const std::string& line) {
  ordered_json id;  // null until the request proves it has a usable id
  try {
    const auto doc = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
      return error_response(id, "request must be one structured-text object per line");
    }
    if (doc.contains("id") && doc["id"].is_string()) id = doc["id"].get<std::string>();
    if (!doc.contains("id") || !doc["id"].is_string()) {
      return error_response(id, "request needs a text field 'id'");
    }
    if (!doc.contains("code") || !doc["code"].is_string()) {
      return error_response(id, "request needs a text field 'code'");
    }
    const GateDecision decision = gate_submit(config_, context_, doc["code"].get<std::string>(),
                                              doc["id"].get<std::string>());
    return decision_to_json(decision);
  } catch (const std::exception& e) {
    // Nothing above should throw, but a request must never take the service
    // down — answer with an error and keep listening.
    std::cerr << "gate: request failed: " << e.what() << "\n";
    return error_response(id, cat("internal error: ", e.what()));
  }
}

}  // namespace dronegate::gate

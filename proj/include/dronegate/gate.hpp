#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dronegate/analyzer.hpp"
#include "dronegate/classifier.hpp"
#include "dronegate/kg.hpp"
#include "dronegate/scene.hpp"

namespace dronegate::gate {

using analyzer::SafetyLabel;

/// The gate's answer for one submission. flight_log is present exactly when
/// the label is SAFE — rejected code is never interpreted into a flight.
struct GateDecision {
  std::string request_id;
  SafetyLabel label = SafetyLabel::Unsafe;
  std::vector<analyzer::Violation> violations;
  std::optional<analyzer::Trajectory> flight_log;
  // What the configured classifier said, when it is not the static analyzer
  // itself. The decision label may be stricter than this: the static
  // analyzer always runs as a hard backstop.
  std::optional<SafetyLabel> classifier_label;
  std::optional<std::string> classifier_rationale;
};

/// Unusable configuration: unreadable file, malformed content, or a value
/// outside its allowed range.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& reason);
};

/// The service could not bind or listen on the configured address.
struct BindError : std::runtime_error {
  explicit BindError(const std::string& reason);
};

struct GateConfig {
  classifier::ClassifierConfig classifier;
  std::filesystem::path scene_path;
  std::filesystem::path kg_path;
  std::filesystem::path templates_path;
  std::string listen_address = "127.0.0.1:7700";
  std::size_t max_request_bytes = 65536;  // per protocol line; at least 1024
};

/// Reads a structured config file. Relative paths inside the file resolve
/// against the file's own directory, so a config travels with its data.
GateConfig load_config(const std::filesystem::path& path);

/// The immutable world every request is judged against.
struct GateContext {
  scene::Scene scene;
  kg::RuleSet rules;
  std::string kgp_text;  // rendered rule prompt for classifiers that use it
};

/// Loads and parses the three data files named by the config; any underlying
/// parse failure surfaces as ConfigError.
GateContext load_context(const GateConfig& config);

/// Judges one code submission. The static analyzer always runs; when the
/// configured classifier is remote or scripted, its answer is recorded but
/// can only tighten the decision — code the analyzer rejects stays rejected.
GateDecision gate_submit(const GateConfig& config, const GateContext& context,
                         const std::string& code, const std::string& request_id = "");

/// Convenience overload that loads the context first (ConfigError on failure).
GateDecision gate_submit(const GateConfig& config, const std::string& code);

/// Single-line structured rendering of a decision (no trailing newline);
/// keys: id, label, violations, flight_log (SAFE only), classifier_label and
/// classifier_rationale when a non-static classifier ran.
std::string decision_to_json(const GateDecision& decision, int indent = -1);

/// Newline-delimited structured-text gate over a plain stream socket. One
/// request object {"id", "code"} per line; one decision per line back, same
/// order. Malformed lines get {"id": ..., "error": ...} and the connection
/// stays open; a line longer than max_request_bytes is discarded up to the
/// next newline and answered with an error. Connections are served
/// concurrently against the shared immutable context.
class GateService {
 public:
  explicit GateService(GateConfig config);  // loads the context; ConfigError
  ~GateService();

  GateService(const GateService&) = delete;
  GateService& operator=(const GateService&) = delete;

  /// Binds, listens, and starts accepting. Throws BindError on failure.
  void start();

  /// Stops accepting, unblocks in-flight reads, and joins every connection
  /// thread. Safe to call more than once.
  void stop();

  /// The actual bound port (useful when the config asked for port 0).
  int port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(int fd);
  std::string handle_request_line(const std::string& line);

  GateConfig config_;
  GateContext context_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mutex_;  // guards connections_ and threads_
  std::vector<int> connections_;
  std::vector<std::thread> threads_;
};

}  // namespace dronegate::gate

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dronegate/analyzer.hpp"
#include "dronegate/kg.hpp"
#include "dronegate/scene.hpp"

namespace dronegate::classifier {

using analyzer::Category;
using analyzer::SafetyLabel;

struct Message {
  std::string role;  // "system" or "user"
  std::string content;
};

struct ClassificationRequest {
  std::string id;
  std::string code;
  std::optional<std::string> kgp_prompt;  // rendered rule prompt, when enabled
  double temperature = 0.0;
};

struct ClassificationResult {
  std::string id;
  SafetyLabel label = SafetyLabel::Unsafe;
  std::optional<std::string> rationale;     // why, when not a clean model answer
  std::optional<std::string> raw_response;  // remote reply body, when there was one
  std::optional<long> latency_ms;
};

enum class ClassifierKind { Static, Remote, Scripted };

/// One dataset row the scripted classifier replays against.
struct ScriptRow {
  std::string id;
  SafetyLabel label = SafetyLabel::Safe;
  Category category = Category::Altitude;
};

/// Deterministic misclassification plan: per category, how many examples of
/// each true label get their prediction flipped. Flips hit the first k rows
/// of the (category, label) group ordered by ascending id.
struct MockScript {
  std::map<Category, int> flip_unsafe_to_safe;  // manufactures false negatives
  std::map<Category, int> flip_safe_to_unsafe;  // manufactures false positives
  std::vector<ScriptRow> rows;
};

/// Builds a MockScript by spreading the requested flip totals across
/// categories in declaration order, bounded by each category's row counts.
/// Throws std::invalid_argument when a total exceeds the available rows.
MockScript make_script(std::vector<ScriptRow> rows, int flip_unsafe_to_safe_total,
                       int flip_safe_to_unsafe_total);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::Static;
  bool use_kgp = false;
  std::optional<std::string> kgp_text;  // rendered prompt used when use_kgp
  std::optional<std::string> endpoint;  // remote; falls back to GATE_LLM_ENDPOINT
  std::optional<std::string> model_name;
  long timeout_ms = 30000;
  std::optional<MockScript> script;  // required for the scripted kind
};

/// The fixed system instruction every classifier prompt starts from; frozen
/// byte-exactly as data/golden/classifier_instruction.txt.
std::string_view classifier_instruction();

/// Deterministic chat messages: system = instruction (plus the rule prompt
/// when given), user = the code verbatim.
std::vector<Message> build_prompt(const std::string& code,
                                  const std::optional<std::string>& kgp);

/// Classifies one request. Every path yields a definite binary label:
///  - static: wraps the trajectory analyzer;
///  - remote: one chat-completion exchange, first-token label parse, one
///    retry on timeout; connection/HTTP/ambiguity failures are UNSAFE;
///  - scripted: replays the dataset label, flipped per the MockScript.
ClassificationResult classify(const ClassifierConfig& config,
                              const ClassificationRequest& request, const scene::Scene& scene,
                              const kg::RuleSet& rules);

}  // namespace dronegate::classifier

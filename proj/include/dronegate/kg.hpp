#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dronegate::kg {

// ---------------------------------------------------------------------------
// Triples and templates
// ---------------------------------------------------------------------------

/// One (subject, predicate, object) fact, e.g. (Drone, must_not_fly_higher_than,
/// 120_meters). Components are underscored tokens with no whitespace.
struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct KnowledgeGraph {
  std::vector<Triple> triples;  // source order, no duplicates
};

enum class RuleKind {
  AltitudeLimit,
  MinDistanceCrowd,
  MinDistanceObject,
  NoHoverCrowd,
  ContextFlag,
};

/// Maps a predicate to its natural-language sentence (with {subject} and
/// {object} placeholders, each exactly once) and the kind of executable rule
/// its triples compile to.
struct PredicateTemplate {
  std::string predicate;
  std::string sentence_template;
  RuleKind rule_kind = RuleKind::ContextFlag;
};

class TripleFormatError : public std::runtime_error {
 public:
  TripleFormatError(int line, std::string reason);
  int line;
};

class DuplicateTripleError : public std::runtime_error {
 public:
  explicit DuplicateTripleError(const Triple& triple);
};

class TemplateFormatError : public std::runtime_error {
 public:
  TemplateFormatError(int line, std::string reason);
  int line;
};

class MissingTemplateError : public std::runtime_error {
 public:
  explicit MissingTemplateError(std::string predicate);
  std::string predicate;
};

class UnparsableQuantityError : public std::runtime_error {
 public:
  explicit UnparsableQuantityError(const Triple& triple);
};

/// One `(subject, predicate, object)` per non-empty line; `#` comments allowed.
KnowledgeGraph parse_triples(std::string_view text);

/// One `predicate = sentence template | rule kind` per non-empty line.
std::vector<PredicateTemplate> parse_templates(std::string_view text);

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

/// The canonical prompt framing shipped with the project; rendered prompts
/// are frozen byte-exactly as golden files under data/golden/.
std::string_view default_preamble();
std::string_view default_epilogue();

/// Expands one triple through its template: placeholders are substituted with
/// the triple's components, underscores turned into spaces.
std::string render_sentence(const Triple& triple, const PredicateTemplate& tpl);

/// Deterministic prompt text: preamble, blank line, one sentence per triple in
/// source order, blank line, epilogue, trailing newline.
std::string render_kgp(const KnowledgeGraph& kg, const std::vector<PredicateTemplate>& templates,
                       std::string_view preamble, std::string_view epilogue);

// ---------------------------------------------------------------------------
// Rule compilation
// ---------------------------------------------------------------------------

enum class TargetClass { Crowd, Object };
enum class Condition { Daytime, SafeWeather };

struct AltitudeLimit {
  double max_altitude_m = 0.0;  // strict bound: flying above it violates
  friend bool operator==(const AltitudeLimit&, const AltitudeLimit&) = default;
};

struct MinDistance {
  TargetClass target_class = TargetClass::Object;
  double min_m = 0.0;  // strict bound: closer than this violates
  friend bool operator==(const MinDistance&, const MinDistance&) = default;
};

struct NoHoverAbove {
  TargetClass target_class = TargetClass::Crowd;
  friend bool operator==(const NoHoverAbove&, const NoHoverAbove&) = default;
};

/// Advisory condition (daylight, weather) the trajectory checker cannot
/// evaluate; carried through for reporting, never produces violations.
struct ContextFlag {
  Condition condition = Condition::Daytime;
  friend bool operator==(const ContextFlag&, const ContextFlag&) = default;
};

struct Rule {
  std::variant<AltitudeLimit, MinDistance, NoHoverAbove, ContextFlag> node;
  std::size_t triple_index = 0;  // which source triple this rule came from
  friend bool operator==(const Rule&, const Rule&) = default;
};

struct RuleSet {
  std::vector<Rule> rules;  // one per triple, in triple order
  KnowledgeGraph source;
};

/// True for rules the trajectory checker can decide (everything but
/// ContextFlag).
bool is_evaluable(const Rule& rule);

/// Short human-readable form, e.g. "altitude limit 120 m".
std::string rule_to_string(const Rule& rule);

/// Compiles every triple to a rule via its template's rule kind. Distance
/// rules read their threshold from the first number in the object token and
/// their target class from its leading word (people/person/crowd vs. objects).
RuleSet compile_rules(const KnowledgeGraph& kg, const std::vector<PredicateTemplate>& templates);

}  // namespace dronegate::kg

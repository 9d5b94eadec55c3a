#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronegate/analyzer.hpp"
#include "dronegate/classifier.hpp"
#include "dronegate/kg.hpp"
#include "dronegate/scene.hpp"

namespace dronegate::eval {

using analyzer::Category;
using analyzer::SafetyLabel;

/// One labeled code snippet of the benchmark dataset.
struct LabeledExample {
  std::string id;
  std::string code;
  SafetyLabel label = SafetyLabel::Safe;
  Category category = Category::Altitude;
  std::string description;
  std::string split = "test";         // only "test" rows drive evaluation
  std::string labeled_by = "static";  // "static" rows can be re-checked against the analyzer
};

/// A dataset line that does not follow the record schema (bad structured
/// text, missing field, unknown label/category, code that does not parse,
/// duplicate id). `line` is 1-based.
struct DatasetFormatError : std::runtime_error {
  std::size_t line;
  DatasetFormatError(std::size_t line, const std::string& reason);
};

/// A record marked labeled_by "static" whose stored label disagrees with the
/// trajectory analyzer on the given scene and rules.
struct LabelMismatchError : std::runtime_error {
  std::string id;
  explicit LabelMismatchError(const std::string& id);
};

/// compute_metrics was handed a matrix with no observations.
struct EmptyMatrixError : std::runtime_error {
  EmptyMatrixError();
};

/// The generator could not satisfy a requested example (odd per-category
/// count, or no candidate earned the intended label within the retry budget).
struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& reason);
};

/// Reads a line-delimited dataset: one structured record per line with keys
/// id, code, label, category, description and optional split ("test" default)
/// and labeled_by ("static" default). Blank lines are skipped; ids must be
/// unique; every code field must parse under the flight DSL grammar.
std::vector<LabeledExample> load_dataset(std::istream& in);
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path);

/// Same as above, then re-checks every record marked labeled_by "static"
/// against the trajectory analyzer; the first disagreement raises
/// LabelMismatchError.
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         const scene::Scene& scene, const kg::RuleSet& rules);

/// Writes the records back out, one per line, preserving order.
void save_dataset(const std::filesystem::path& path,
                  const std::vector<LabeledExample>& examples);

struct GenerationSpec {
  std::uint64_t seed = 0;
  std::map<Category, int> per_category;  // total per category; half SAFE, half UNSAFE
  double train_fraction = 0.0;  // trailing fraction of each (category, label) group
};

/// Produces per_category[c] examples for each requested category, ids
/// prefixed alt/obj/crd/hov with a 3-digit ordinal, alternating SAFE (odd
/// ordinals) and UNSAFE (even). Candidate snippets are drawn from fixed
/// geometric corridors and labeled by the trajectory analyzer: a SAFE
/// candidate must produce no violation, an UNSAFE one must violate only its
/// own category. Deterministic for a fixed seed. With train_fraction f, the
/// last round(f * group size) rows of each (category, label) group are marked
/// split "train"; the rest stay "test".
std::vector<LabeledExample> generate_dataset(const GenerationSpec& spec,
                                             const scene::Scene& scene,
                                             const kg::RuleSet& rules);

/// Binary confusion counts with UNSAFE as the positive class.
struct ConfusionMatrix {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;
  long long total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  ConfusionMatrix overall;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  std::map<Category, ConfusionMatrix> per_category;
  bool zero_denominator = false;  // some metric fell back to the 0 convention
};

/// Standard binary metrics over the matrix. Any metric whose denominator is
/// zero is defined as 0 and the report's zero_denominator flag is raised.
/// Throws EmptyMatrixError when the matrix holds no observations.
MetricsReport compute_metrics(const ConfusionMatrix& matrix);

/// Runs the configured classifier over every "test" row and aggregates
/// overall and per-category matrices. Aggregation is by id, so row order
/// never changes the result. An empty test split surfaces as EmptyMatrixError.
MetricsReport evaluate(const classifier::ClassifierConfig& config,
                       const std::vector<LabeledExample>& dataset, const scene::Scene& scene,
                       const kg::RuleSet& rules);

enum class ReportFormat { TextTable, Json };

/// TextTable: an overall row under the header
/// "TP  FP  TN  FN  Acc.  Prec.  Rec.  F1-score  MCC" (cells joined by two
/// spaces, percentages to 2 decimals, rounded half away from zero), then a
/// per-category count block when any category is present. Json: the same
/// numbers as raw fractions under stable keys.
std::string render_report(const MetricsReport& report, ReportFormat format);

}  // namespace dronegate::eval

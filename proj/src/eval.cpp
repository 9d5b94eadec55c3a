#include "dronegate/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dronegate/dsl.hpp"
#include "dronegate/text.hpp"

namespace dronegate::eval {

namespace {

using nlohmann::ordered_json;

std::optional<SafetyLabel> parse_label(std::string_view text) {
  if (text == "SAFE") return SafetyLabel::Safe;
  if (text == "UNSAFE") return SafetyLabel::Unsafe;
  return std::nullopt;
}

std::optional<Category> parse_category(std::string_view text) {
  for (const Category category : {Category::Altitude, Category::DistObject,
                                  Category::DistCrowd, Category::HoverCrowd}) {
    if (text == analyzer::to_string(category)) return category;
  }
  return std::nullopt;
}

std::string require_string(const nlohmann::json& record, const char* key, std::size_t line) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw DatasetFormatError(line, cat("missing or non-text field '", key, "'"));
  }
  return it->get<std::string>();
}

LabeledExample parse_record(const std::string& line, std::size_t line_no) {
  const auto record = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (record.is_discarded() || !record.is_object()) {
    throw DatasetFormatError(line_no, "not a structured record");
  }
  LabeledExample example;
  example.id = require_string(record, "id", line_no);
  example.code = require_string(record, "code", line_no);
  example.description = require_string(record, "description", line_no);

  const std::string label_text = require_string(record, "label", line_no);
  const auto label = parse_label(label_text);
  if (!label) throw DatasetFormatError(line_no, cat("unknown label '", label_text, "'"));
  example.label = *label;

  const std::string category_text = require_string(record, "category", line_no);
  const auto category = parse_category(category_text);
  if (!category) {
    throw DatasetFormatError(line_no, cat("unknown category '", category_text, "'"));
  }
  example.category = *category;

  if (record.contains("split")) {
    example.split = require_string(record, "split", line_no);
    if (example.split != "test" && example.split != "train") {
      throw DatasetFormatError(line_no, cat("unknown split '", example.split, "'"));
    }
  }
  if (record.contains("labeled_by")) {
    example.labeled_by = require_string(record, "labeled_by", line_no);
  }

  try {
    dsl::parse(example.code);
  } catch (const dsl::LexError& e) {
    throw DatasetFormatError(line_no, cat("code does not lex: ", e.what()));
  } catch (const dsl::ParseError& e) {
    throw DatasetFormatError(line_no, cat("code does not parse: ", e.what()));
  }
  return example;
}

// ---- generation ----

double round2(double v) { return std::round(v * 100.0) / 100.0; }

// Shortest fixed-notation rendering that round-trips the value.
std::string num(double v) {
  std::array<char, 64> buf;
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
  return std::string(buf.data(), ptr);
}

double draw(std::mt19937_64& rng, double lo, double hi) {
  return round2(std::uniform_real_distribution<double>(lo, hi)(rng));
}

struct Candidate {
  std::string code;
  std::string description;
};

// Candidate corridors keep at least ~2 m of slack from every rule boundary so
// the 2-decimal rounding of coordinates can never flip the intended label.

Candidate altitude_candidate(std::mt19937_64& rng, bool unsafe) {
  const double x = draw(rng, -15.0, 15.0);
  const double y = draw(rng, -25.0, 5.0);
  const double z = unsafe ? draw(rng, 125.0, 195.0) : draw(rng, 10.0, 115.0);
  Candidate candidate;
  candidate.code =
      cat("aw.takeoff()\naw.fly_to([", num(x), ", ", num(y), ", ", num(z), "])");
  candidate.description = cat("Climbs to ", num(z), " m over open ground, ",
                              unsafe ? "above" : "below", " the altitude limit.");
  return candidate;
}

struct ApproachTarget {
  const char* name;
  double cx, cy;      // footprint center
  double r;           // surface radius
  double hlo, hhi;    // approach altitude window
};

// Obstacles whose straight-line approach from the launch pad passes nothing
// else closer than the standoff distance.
constexpr ApproachTarget kTargets[] = {
    {"turbine1", 120.0, 0.0, 4.0, 10.0, 70.0},
    {"turbine2", 160.0, 60.0, 4.0, 10.0, 70.0},
    {"tower3", 0.0, -120.0, 3.0, 8.0, 35.0},
    {"car", 60.0, -40.0, 2.0, 1.0, 1.0},
};

Candidate object_candidate(std::mt19937_64& rng, bool unsafe, int ordinal) {
  const ApproachTarget& target = kTargets[(ordinal - 1) % std::size(kTargets)];
  const double gap = unsafe ? draw(rng, 2.0, 26.0) : draw(rng, 34.0, 50.0);
  const double h = target.hlo == target.hhi ? target.hlo : draw(rng, target.hlo, target.hhi);
  const double len = std::hypot(target.cx, target.cy);
  const double sx = round2(target.cx - target.cx / len * (target.r + gap));
  const double sy = round2(target.cy - target.cy / len * (target.r + gap));
  const double mx = round2(sx * 0.5);
  const double my = round2(sy * 0.5);
  Candidate candidate;
  candidate.code = cat("aw.takeoff()\naw.fly_path([", num(mx), ", ", num(my), ", ", num(h),
                       "], [", num(sx), ", ", num(sy), ", ", num(h), "])");
  candidate.description =
      unsafe ? cat("Flies within ", num(gap), " m of the ", target.name, " surface.")
             : cat("Approaches the ", target.name, " but holds about ", num(gap),
                   " m off its surface.");
  return candidate;
}

Candidate crowd_candidate(std::mt19937_64& rng, bool unsafe) {
  const double x = draw(rng, -10.0, 10.0);
  const double back = unsafe ? draw(rng, 25.0, 45.0) : draw(rng, 53.0, 65.0);
  const double z = draw(rng, 4.0, 10.0);
  Candidate candidate;
  candidate.code = cat("aw.takeoff()\naw.fly_to(crowd_position + [", num(x), ", -", num(back),
                       ", ", num(z), "])");
  candidate.description =
      unsafe ? "Moves toward the crowd at low altitude, inside the standoff distance."
             : "Moves toward the crowd at low altitude but stays outside the standoff "
               "distance.";
  return candidate;
}

Candidate hover_candidate(std::mt19937_64& rng, bool unsafe) {
  double h = 0.0;
  double x = 0.0;
  if (unsafe) {
    h = draw(rng, 45.0, 110.0);
    x = draw(rng, -10.0, 10.0);
  } else {
    h = draw(rng, 45.0, 60.0);
    x = draw(rng, 32.0, 45.0);
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) x = -x;
  }
  Candidate candidate;
  candidate.code = cat("aw.takeoff()\naw.fly_to([0, 0, ", num(h), "])\naw.fly_to([", num(x),
                       ", 60, ", num(h), "])");
  candidate.description =
      unsafe ? cat("Crosses directly above the crowd at ", num(h), " m.")
             : cat("Crosses the area at ", num(h), " m, passing beside the crowd's "
                   "overhead zone.");
  return candidate;
}

Candidate make_candidate(Category category, std::mt19937_64& rng, bool unsafe, int ordinal) {
  switch (category) {
    case Category::Altitude:
      return altitude_candidate(rng, unsafe);
    case Category::DistObject:
      return object_candidate(rng, unsafe, ordinal);
    case Category::DistCrowd:
      return crowd_candidate(rng, unsafe);
    case Category::HoverCrowd:
      return hover_candidate(rng, unsafe);
    case Category::Unanalyzable:
      break;
  }
  throw GenerationError("cannot generate examples for that category");
}

const char* id_prefix(Category category) {
  switch (category) {
    case Category::Altitude:
      return "alt";
    case Category::DistObject:
      return "obj";
    case Category::DistCrowd:
      return "crd";
    case Category::HoverCrowd:
      return "hov";
    case Category::Unanalyzable:
      break;
  }
  throw GenerationError("cannot generate examples for that category");
}

std::string pad3(int n) {
  std::string digits = std::to_string(n);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return digits;
}

// An UNSAFE candidate must demonstrate exactly its own hazard; a SAFE one
// must be clean. Anything else is a corridor miss and gets redrawn.
bool earns_label(const analyzer::Verdict& verdict, bool unsafe, Category intended) {
  if (!unsafe) return verdict.label == SafetyLabel::Safe;
  if (verdict.label != SafetyLabel::Unsafe || verdict.violations.empty()) return false;
  return std::ranges::all_of(verdict.violations, [&](const analyzer::Violation& violation) {
    return violation.category == intended;
  });
}

// ---- rendering ----

// Percentage with two decimals, rounded half away from zero.
std::string percent(double v) {
  long long bp = std::llround(v * 10000.0);
  const char* sign = bp < 0 ? "-" : "";
  if (bp < 0) bp = -bp;
  return cat(sign, bp / 100, ".", bp % 100 < 10 ? "0" : "", bp % 100, "%");
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string row;
  for (const std::string& cell : cells) {
    if (!row.empty()) row += "  ";
    row += cell;
  }
  return row;
}

ordered_json matrix_to_json(const ConfusionMatrix& m) {
  return ordered_json{{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
}

}  // namespace

DatasetFormatError::DatasetFormatError(std::size_t line, const std::string& reason)
    : std::runtime_error(cat("dataset line ", line, ": ", reason)), line(line) {}

LabelMismatchError::LabelMismatchError(const std::string& id)
    : std::runtime_error(cat("example '", id, "' is labeled contrary to the trajectory "
                             "analyzer")),
      id(id) {}

EmptyMatrixError::EmptyMatrixError()
    : std::runtime_error("confusion matrix holds no observations") {}

GenerationError::GenerationError(const std::string& reason) : std::runtime_error(reason) {}

std::vector<LabeledExample> load_dataset(std::istream& in) {
  std::vector<LabeledExample> examples;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LabeledExample example = parse_record(line, line_no);
    if (!seen_ids.insert(example.id).second) {
      throw DatasetFormatError(line_no, cat("duplicate id '", example.id, "'"));
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetFormatError(0, cat("cannot open '", path.string(), "'"));
  return load_dataset(in);
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         const scene::Scene& scene, const kg::RuleSet& rules) {
  std::vector<LabeledExample> examples = load_dataset(path);
  for (const LabeledExample& example : examples) {
    if (example.labeled_by != "static") continue;
    if (analyzer::analyze(example.code, scene, rules).label != example.label) {
      throw LabelMismatchError(example.id);
    }
  }
  return examples;
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<LabeledExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(cat("cannot write '", path.string(), "'"));
  for (const LabeledExample& example : examples) {
    const ordered_json record{{"id", example.id},
                              {"code", example.code},
                              {"label", std::string(analyzer::to_string(example.label))},
                              {"category", std::string(analyzer::to_string(example.category))},
                              {"description", example.description},
                              {"split", example.split},
                              {"labeled_by", example.labeled_by}};
    out << record.dump() << '\n';
  }
}

std::vector<LabeledExample> generate_dataset(const GenerationSpec& spec,
                                             const scene::Scene& scene,
                                             const kg::RuleSet& rules) {
  if (spec.train_fraction < 0.0 || spec.train_fraction > 1.0) {
    throw GenerationError("train fraction must lie within [0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<LabeledExample> examples;
  for (const auto& [category, count] : spec.per_category) {
    if (count < 0 || count % 2 != 0) {
      throw GenerationError(cat(analyzer::to_string(category),
                                " count must be even to balance labels, got ", count));
    }
    const char* prefix = id_prefix(category);
    std::vector<std::size_t> safe_rows;
    std::vector<std::size_t> unsafe_rows;
    for (int ordinal = 1; ordinal <= count; ++ordinal) {
      const bool unsafe = ordinal % 2 == 0;
      LabeledExample example;
      example.id = cat(prefix, pad3(ordinal));
      example.label = unsafe ? SafetyLabel::Unsafe : SafetyLabel::Safe;
      example.category = category;
      bool accepted = false;
      for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
        Candidate candidate = make_candidate(category, rng, unsafe, ordinal);
        const analyzer::Verdict verdict = analyzer::analyze(candidate.code, scene, rules);
        if (earns_label(verdict, unsafe, category)) {
          example.code = std::move(candidate.code);
          example.description = std::move(candidate.description);
          accepted = true;
        }
      }
      if (!accepted) {
        throw GenerationError(cat("no candidate earned label ",
                                  analyzer::to_string(example.label), " for ", example.id,
                                  " within 100 attempts"));
      }
      (unsafe ? unsafe_rows : safe_rows).push_back(examples.size());
      examples.push_back(std::move(example));
    }
    const auto mark_train = [&](const std::vector<std::size_t>& rows) {
      const auto n_train =
          static_cast<std::size_t>(std::llround(spec.train_fraction * rows.size()));
      for (std::size_t i = rows.size() - n_train; i < rows.size(); ++i) {
        examples[rows[i]].split = "train";
      }
    };
    mark_train(safe_rows);
    mark_train(unsafe_rows);
  }
  return examples;
}

MetricsReport compute_metrics(const ConfusionMatrix& matrix) {
  if (matrix.total() == 0) throw EmptyMatrixError();
  MetricsReport report;
  report.overall = matrix;
  const auto ratio = [&report](double numerator, double denominator) {
    if (denominator == 0.0) {
      report.zero_denominator = true;
      return 0.0;
    }
    return numerator / denominator;
  };
  const double tp = static_cast<double>(matrix.tp);
  const double fp = static_cast<double>(matrix.fp);
  const double tn = static_cast<double>(matrix.tn);
  const double fn = static_cast<double>(matrix.fn);
  report.accuracy = (tp + tn) / static_cast<double>(matrix.total());
  report.precision = ratio(tp, tp + fp);
  report.recall = ratio(tp, tp + fn);
  report.f1 = ratio(2.0 * report.precision * report.recall, report.precision + report.recall);
  report.mcc = ratio(tp * tn - fp * fn,
                     std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
  return report;
}

MetricsReport evaluate(const classifier::ClassifierConfig& config,
                       const std::vector<LabeledExample>& dataset, const scene::Scene& scene,
                       const kg::RuleSet& rules) {
  ConfusionMatrix overall;
  std::map<Category, ConfusionMatrix> per_category;
  for (const LabeledExample& example : dataset) {
    if (example.split != "test") continue;
    classifier::ClassificationRequest request;
    request.id = example.id;
    request.code = example.code;
    const classifier::ClassificationResult result =
        classifier::classify(config, request, scene, rules);
    const bool actual_unsafe = example.label == SafetyLabel::Unsafe;
    const bool predicted_unsafe = result.label == SafetyLabel::Unsafe;
    const auto bump = [&](ConfusionMatrix& m) {
      if (actual_unsafe) {
        ++(predicted_unsafe ? m.tp : m.fn);
      } else {
        ++(predicted_unsafe ? m.fp : m.tn);
      }
    };
    bump(overall);
    bump(per_category[example.category]);
  }
  MetricsReport report = compute_metrics(overall);
  report.per_category = std::move(per_category);
  return report;
}

std::string render_report(const MetricsReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    ordered_json doc;
    doc["overall"] = matrix_to_json(report.overall);
    doc["accuracy"] = report.accuracy;
    doc["precision"] = report.precision;
    doc["recall"] = report.recall;
    doc["f1"] = report.f1;
    doc["mcc"] = report.mcc;
    doc["per_category"] = ordered_json::object();
    for (const auto& [category, matrix] : report.per_category) {
      doc["per_category"][std::string(analyzer::to_string(category))] =
          matrix_to_json(matrix);
    }
    doc["zero_denominator"] = report.zero_denominator;
    return doc.dump(2) + "\n";
  }

  std::string text = join_row({"TP", "FP", "TN", "FN", "Acc.", "Prec.", "Rec.", "F1-score",
                               "MCC"});
  text += '\n';
  text += join_row({std::to_string(report.overall.tp), std::to_string(report.overall.fp),
                    std::to_string(report.overall.tn), std::to_string(report.overall.fn),
                    percent(report.accuracy), percent(report.precision),
                    percent(report.recall), percent(report.f1), percent(report.mcc)});
  text += '\n';
  if (!report.per_category.empty()) {
    text += '\n';
    text += join_row({"Category", "TP", "FP", "TN", "FN"});
    text += '\n';
    for (const auto& [category, matrix] : report.per_category) {
      text += join_row({std::string(analyzer::to_string(category)), std::to_string(matrix.tp),
                        std::to_string(matrix.fp), std::to_string(matrix.tn),
                        std::to_string(matrix.fn)});
      text += '\n';
    }
  }
  if (report.zero_denominator) {
    text += "\nnote: metrics with a zero denominator are reported as 0 by convention\n";
  }
  return text;
}

}  // namespace dronegate::eval

#include "dronegate/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <variant>

#include <json.hpp>

#include "dronegate/text.hpp"

namespace dronegate::analyzer {

namespace {

using dsl::ValueKind;
using geom::Vec3;

// A runtime value is a scalar or a 3-vector.
using Value = std::variant<double, Vec3>;

double normalize_yaw(double degrees) {
  double yaw = std::fmod(degrees, 360.0);
  if (yaw < 0.0) yaw += 360.0;
  if (yaw >= 360.0) yaw = 0.0;  // fmod rounding at the seam
  return yaw;
}

// Sequential evaluator. Assumes the program already passed validate(); the
// runtime checks below exist so a contract breach surfaces as InterpretError
// rather than undefined behavior.
class Interpreter {
 public:
  Interpreter(const dsl::Program& program, const scene::Scene& scene)
      : program_(program), scene_(scene) {
    state_.position = scene.drone_start;
  }

  Trajectory run() {
    for (std::size_t i = 0; i < program_.statements.size(); ++i) {
      statement_ = static_cast<int>(i);
      std::visit(
          [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, dsl::Assign>) {
              auto value = eval(node.value);
              if (!value) throw error("assignment from a function that returns nothing");
              env_[node.target] = *std::move(value);
            } else {
              eval(node.expr);  // calls run for their effects; value discarded
            }
          },
          program_.statements[i].node);
    }
    Trajectory trajectory;
    trajectory.segments = std::move(segments_);
    trajectory.final_state = state_;
    return trajectory;
  }

 private:
  // nullopt models "no value" — the result of a void library call.
  std::optional<Value> eval(const dsl::Expr& expr) {
    return std::visit([&](const auto& node) { return eval_node(node); }, expr.node);
  }

  Value eval_value(const dsl::Expr& expr) {
    auto value = eval(expr);
    if (!value) throw error("a value was expected, but the call returns nothing");
    return *std::move(value);
  }

  std::optional<Value> eval_node(const dsl::NumberLit& node) { return Value{node.value}; }

  std::optional<Value> eval_node(const dsl::Ident& node) {
    if (const auto it = env_.find(node.name); it != env_.end()) return it->second;
    if (const auto it = scene_.symbol_table.find(node.name); it != scene_.symbol_table.end()) {
      return Value{it->second};
    }
    throw error(cat("unknown symbol '", node.name, "'"));
  }

  std::optional<Value> eval_node(const dsl::VectorLit& node) {
    Vec3 v;
    double* components[3] = {&v.x, &v.y, &v.z};
    for (std::size_t i = 0; i < 3; ++i) {
      const Value element = eval_value(node.elements[i]);
      const double* scalar = std::get_if<double>(&element);
      if (!scalar) throw error("vector elements must be scalars");
      *components[i] = *scalar;
    }
    return Value{v};
  }

  std::optional<Value> eval_node(const dsl::BinaryOp& node) {
    const Value left = eval_value(node.left());
    const Value right = eval_value(node.right());
    Value result = combine(node.op, left, right);
    if (const auto* v = std::get_if<Vec3>(&result); v && !finite(*v)) {
      throw error("non-finite arithmetic result");
    }
    if (const auto* s = std::get_if<double>(&result); s && !std::isfinite(*s)) {
      throw error("non-finite arithmetic result");
    }
    return result;
  }

  Value combine(char op, const Value& left, const Value& right) {
    const auto* ls = std::get_if<double>(&left);
    const auto* lv = std::get_if<Vec3>(&left);
    const auto* rs = std::get_if<double>(&right);
    const auto* rv = std::get_if<Vec3>(&right);
    switch (op) {
      case '+':
        if (ls && rs) return *ls + *rs;
        if (lv && rv) return *lv + *rv;
        break;
      case '-':
        if (ls && rs) return *ls - *rs;
        if (lv && rv) return *lv - *rv;
        break;
      case '*':
        if (ls && rs) return *ls * *rs;
        if (lv && rs) return *lv * *rs;
        if (ls && rv) return *rv * *ls;
        break;
      case '/':
        if (ls && rs) return *ls / *rs;
        if (lv && rs) return *lv / *rs;
        break;
    }
    throw error(cat("operator '", op, "' cannot combine these operand kinds"));
  }

  std::optional<Value> eval_node(const dsl::Index& node) {
    const Value base = eval_value(node.base());
    const Value index = eval_value(node.index());
    const auto* vec = std::get_if<Vec3>(&base);
    const auto* idx = std::get_if<double>(&index);
    if (!vec) throw error("only vectors can be indexed");
    if (!idx || (*idx != 0.0 && *idx != 1.0 && *idx != 2.0)) {
      throw error("vector index must be 0, 1, or 2");
    }
    const double components[3] = {vec->x, vec->y, vec->z};
    return Value{components[static_cast<int>(*idx)]};
  }

  std::optional<Value> eval_node(const dsl::Call& node) {
    const auto& fn = node.function;
    if (fn == "takeoff") {
      if (state_.airborne) throw error("takeoff while already airborne");
      move_to({state_.position.x, state_.position.y, kTakeoffAltitudeM});
      state_.airborne = true;
      return std::nullopt;
    }
    if (fn == "land") {
      move_to({state_.position.x, state_.position.y, 0.0});
      state_.airborne = false;
      return std::nullopt;
    }
    if (fn == "fly_to") {
      require_airborne(fn);
      move_to(vector_arg(node, 0));
      return std::nullopt;
    }
    if (fn == "fly_path") {
      require_airborne(fn);
      for (std::size_t i = 0; i < node.args.size(); ++i) move_to(vector_arg(node, i));
      return std::nullopt;
    }
    if (fn == "set_yaw") {
      const Value value = eval_value(node.args.at(0));
      const auto* s = std::get_if<double>(&value);
      if (!s) throw error("set_yaw expects a scalar");
      state_.yaw_deg = normalize_yaw(*s);
      return std::nullopt;
    }
    if (fn == "get_yaw") return Value{state_.yaw_deg};
    if (fn == "get_drone_position") return Value{state_.position};
    if (fn == "get_position") {
      const auto* ident = std::get_if<dsl::Ident>(&node.args.at(0).node);
      if (!ident) throw error("get_position expects a scene symbol name");
      const auto it = scene_.symbol_table.find(ident->name);
      if (it == scene_.symbol_table.end()) {
        throw error(cat("unknown symbol '", ident->name, "'"));
      }
      return Value{it->second};
    }
    throw error(cat("unknown function '", fn, "'"));
  }

  Vec3 vector_arg(const dsl::Call& node, std::size_t i) {
    const Value value = eval_value(node.args.at(i));
    const auto* v = std::get_if<Vec3>(&value);
    if (!v) throw error(cat(node.function, " expects vector arguments"));
    if (!finite(*v)) throw error("non-finite flight target");
    return *v;
  }

  void require_airborne(const std::string& fn) {
    if (!state_.airborne) throw error(cat("motion before takeoff: ", fn));
  }

  void move_to(Vec3 target) {
    segments_.push_back({state_.position, target, static_cast<std::size_t>(statement_)});
    state_.position = target;
  }

  InterpretError error(std::string reason) const { return InterpretError(statement_, std::move(reason)); }

  const dsl::Program& program_;
  const scene::Scene& scene_;
  DroneState state_;
  std::map<std::string, Value> env_;
  std::vector<Segment> segments_;
  int statement_ = 0;
};

}  // namespace

InterpretError::InterpretError(int statement_, std::string reason_)
    : std::runtime_error(cat("cannot interpret statement ", statement_ + 1, ": ", reason_)),
      statement(statement_),
      reason(std::move(reason_)) {}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::Altitude: return "Altitude";
    case Category::DistObject: return "DistObject";
    case Category::DistCrowd: return "DistCrowd";
    case Category::HoverCrowd: return "HoverCrowd";
    case Category::Unanalyzable: return "Unanalyzable";
  }
  return "Unanalyzable";
}

std::string_view to_string(SafetyLabel label) {
  return label == SafetyLabel::Safe ? "SAFE" : "UNSAFE";
}

Trajectory interpret(const dsl::Program& program, const scene::Scene& scene) {
  return Interpreter(program, scene).run();
}

geom::ClosestApproach closest_approach(const Segment& segment,
                                       const scene::WorldObject& object) {
  return std::visit(
      [&](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, scene::Cylinder>) {
          return geom::segment_cylinder_distance(segment.start, segment.end, shape.center_xy,
                                                 shape.radius_m, shape.height_m);
        } else if constexpr (std::is_same_v<T, scene::Sphere>) {
          return geom::segment_sphere_distance(segment.start, segment.end, shape.center,
                                               shape.radius_m);
        } else {
          return geom::segment_disc_distance(segment.start, segment.end,
                                             {shape.center_xy.x, shape.center_xy.y, 0.0},
                                             shape.radius_m);
        }
      },
      object.shape);
}

double min_distance_segment_object(const Segment& segment, const scene::WorldObject& object) {
  return closest_approach(segment, object).distance;
}

namespace {

// The horizontal footprint every shape projects onto the ground.
struct Footprint {
  geom::Vec2 center;
  double radius;
};

Footprint footprint_of(const scene::WorldObject& object) {
  return std::visit(
      [](const auto& shape) -> Footprint {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, scene::Sphere>) {
          return {shape.center.xy(), shape.radius_m};
        } else {
          return {shape.center_xy, shape.radius_m};
        }
      },
      object.shape);
}

void check_rule(const kg::Rule& rule, const Trajectory& trajectory, std::size_t si,
                const scene::Scene& scene, std::vector<Violation>& out) {
  const Segment& segment = trajectory.segments[si];
  if (const auto* altitude = std::get_if<kg::AltitudeLimit>(&rule.node)) {
    const double max_z = std::max(segment.start.z, segment.end.z);
    if (max_z > altitude->max_altitude_m) {
      const Vec3 witness = segment.start.z >= segment.end.z ? segment.start : segment.end;
      out.push_back({rule, Category::Altitude, si, witness, max_z - altitude->max_altitude_m,
                     cat("altitude ", max_z, " m exceeds the ", altitude->max_altitude_m,
                         " m limit")});
    }
    return;
  }
  if (const auto* distance = std::get_if<kg::MinDistance>(&rule.node)) {
    const bool want_crowd = distance->target_class == kg::TargetClass::Crowd;
    double best = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    const scene::WorldObject* closest = nullptr;
    for (const scene::WorldObject& object : scene.objects) {
      const bool is_crowd = object.object_class == scene::ObjectClass::Crowd;
      if (is_crowd != want_crowd) continue;
      const geom::ClosestApproach ca = closest_approach(segment, object);
      if (ca.distance < best) {
        best = ca.distance;
        best_t = ca.t;
        closest = &object;
      }
    }
    if (closest && best < distance->min_m) {
      out.push_back({rule, want_crowd ? Category::DistCrowd : Category::DistObject, si,
                     geom::lerp(segment.start, segment.end, best_t), distance->min_m - best,
                     cat("passes ", best, " m from ", closest->name, ", closer than ",
                         distance->min_m, " m")});
    }
    return;
  }
  if (std::holds_alternative<kg::NoHoverAbove>(rule.node)) {
    // A segment with any altitude is airborne; a grounded zero-length segment
    // (e.g. land before takeoff) cannot hover over anything.
    if (std::max(segment.start.z, segment.end.z) <= 0.0) return;
    double best = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    const scene::WorldObject* over = nullptr;
    for (const scene::WorldObject& object : scene.objects) {
      if (object.object_class != scene::ObjectClass::Crowd) continue;
      const Footprint fp = footprint_of(object);
      const geom::ClosestApproach ca =
          geom::segment_point_distance_2d(segment.start.xy(), segment.end.xy(), fp.center);
      const double depth = ca.distance - fp.radius;  // negative inside the footprint
      if (depth < best) {
        best = depth;
        best_t = ca.t;
        over = &object;
      }
    }
    if (over && best < 0.0) {
      out.push_back({rule, Category::HoverCrowd, si,
                     geom::lerp(segment.start, segment.end, best_t), -best,
                     cat("flight path passes above ", over->name)});
    }
  }
  // ContextFlag rules carry no evaluable geometry.
}

}  // namespace

Verdict check(const Trajectory& trajectory, const kg::RuleSet& rules,
              const scene::Scene& scene) {
  Verdict verdict;
  for (std::size_t si = 0; si < trajectory.segments.size(); ++si) {
    for (const kg::Rule& rule : rules.rules) {
      check_rule(rule, trajectory, si, scene, verdict.violations);
    }
  }
  verdict.label = verdict.violations.empty() ? SafetyLabel::Safe : SafetyLabel::Unsafe;
  verdict.trajectory = trajectory;
  if ((verdict.label == SafetyLabel::Safe) != verdict.violations.empty()) {
    throw std::logic_error("verdict invariant broken: label must match violations");
  }
  return verdict;
}

namespace {

Verdict unanalyzable(std::string detail) {
  Verdict verdict;
  verdict.label = SafetyLabel::Unsafe;
  verdict.violations.push_back({std::nullopt, Category::Unanalyzable, 0, {},
                                std::numeric_limits<double>::infinity(), std::move(detail)});
  return verdict;
}

}  // namespace

Verdict analyze(std::string_view source, const scene::Scene& scene, const kg::RuleSet& rules) {
  dsl::Program program;
  try {
    program = dsl::parse(source);
  } catch (const dsl::LexError& e) {
    return unanalyzable(e.what());
  } catch (const dsl::ParseError& e) {
    return unanalyzable(e.what());
  }

  const std::vector<dsl::ValidationIssue> issues =
      dsl::validate(program, dsl::standard_library(), scene::known_symbols(scene));
  if (!issues.empty()) {
    Verdict verdict;
    verdict.label = SafetyLabel::Unsafe;
    for (const dsl::ValidationIssue& issue : issues) {
      verdict.violations.push_back({std::nullopt, Category::Unanalyzable,
                                    static_cast<std::size_t>(issue.statement_index), {},
                                    std::numeric_limits<double>::infinity(), issue.detail});
    }
    return verdict;
  }

  try {
    return check(interpret(program, scene), rules, scene);
  } catch (const InterpretError& e) {
    return unanalyzable(e.what());
  }
}

namespace {

nlohmann::ordered_json vec3_json(const Vec3& v) {
  return nlohmann::ordered_json::array({v.x, v.y, v.z});
}

}  // namespace

std::string verdict_to_json(const Verdict& verdict) {
  nlohmann::ordered_json doc;
  doc["label"] = to_string(verdict.label);
  doc["violations"] = nlohmann::ordered_json::array();
  for (const Violation& v : verdict.violations) {
    nlohmann::ordered_json item;
    if (v.rule) {
      item["rule"] = kg::rule_to_string(*v.rule);
    } else {
      item["rule"] = nullptr;
    }
    item["category"] = to_string(v.category);
    item["segment"] = v.segment_index;
    item["witness"] = vec3_json(v.witness_point);
    item["margin"] = v.margin_m;  // +infinity serializes as null
    item["detail"] = v.detail;
    doc["violations"].push_back(std::move(item));
  }
  return doc.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string trajectory_to_json(const Trajectory& trajectory) {
  nlohmann::ordered_json doc;
  doc["segments"] = nlohmann::ordered_json::array();
  for (const Segment& segment : trajectory.segments) {
    nlohmann::ordered_json item;
    item["start"] = vec3_json(segment.start);
    item["end"] = vec3_json(segment.end);
    item["cause"] = segment.cause;
    doc["segments"].push_back(std::move(item));
  }
  doc["final_state"] = {{"position", vec3_json(trajectory.final_state.position)},
                        {"yaw", trajectory.final_state.yaw_deg},
                        {"airborne", trajectory.final_state.airborne}};
  return doc.dump(2);
}

}  // namespace dronegate::analyzer

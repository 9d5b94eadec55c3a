#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dronegate/dsl.hpp"
#include "dronegate/geometry.hpp"
#include "dronegate/kg.hpp"
#include "dronegate/scene.hpp"

namespace dronegate::analyzer {

/// Altitude the drone climbs to on takeoff, in meters.
inline constexpr double kTakeoffAltitudeM = 3.0;

struct DroneState {
  geom::Vec3 position;
  double yaw_deg = 0.0;  // normalized to [0, 360)
  bool airborne = false;
};

struct Segment {
  geom::Vec3 start;
  geom::Vec3 end;
  std::size_t cause = 0;  // index of the statement that produced this motion
};

struct Trajectory {
  std::vector<Segment> segments;  // contiguous: segments[i].end == segments[i+1].start
  DroneState final_state;
};

class InterpretError : public std::runtime_error {
 public:
  InterpretError(int statement, std::string reason);
  int statement;
  std::string reason;
};

enum class Category { Altitude, DistObject, DistCrowd, HoverCrowd, Unanalyzable };

std::string_view to_string(Category category);

struct Violation {
  // Absent for Unanalyzable findings: nothing was evaluated against a rule.
  std::optional<kg::Rule> rule;
  Category category = Category::Unanalyzable;
  std::size_t segment_index = 0;
  geom::Vec3 witness_point;
  // How far past the limit, always > 0. Unanalyzable failures carry +infinity
  // (fail-closed: unboundedly past every limit); it serializes as null.
  double margin_m = 0.0;
  std::string detail;
};

enum class SafetyLabel { Safe, Unsafe };

std::string_view to_string(SafetyLabel label);

struct Verdict {
  SafetyLabel label = SafetyLabel::Unsafe;
  std::vector<Violation> violations;           // empty iff label == Safe
  std::optional<Trajectory> trajectory;        // absent when interpretation failed
};

/// Executes a validated program into a flight path. Sequential semantics:
/// takeoff climbs vertically to kTakeoffAltitudeM, land descends to the
/// ground, fly_to/fly_path draw straight segments, assignments bind values,
/// vector arithmetic is componentwise.
Trajectory interpret(const dsl::Program& program, const scene::Scene& scene);

/// Exact minimum distance from a segment to the object's surface (closed
/// form, not sampling), plus where along the segment it occurs.
geom::ClosestApproach closest_approach(const Segment& segment, const scene::WorldObject& object);

/// The distance part of closest_approach.
double min_distance_segment_object(const Segment& segment, const scene::WorldObject& object);

/// Evaluates every evaluable rule continuously over every segment. Violations
/// are ordered by (segment index, rule order in the RuleSet).
Verdict check(const Trajectory& trajectory, const kg::RuleSet& rules, const scene::Scene& scene);

/// The whole pipeline: parse, validate, interpret, check. Never throws — any
/// failure becomes an UNSAFE verdict with an Unanalyzable violation.
Verdict analyze(std::string_view source, const scene::Scene& scene, const kg::RuleSet& rules);

/// Stable-key serializations for reports and the wire protocol.
std::string verdict_to_json(const Verdict& verdict);
std::string trajectory_to_json(const Trajectory& trajectory);

}  // namespace dronegate::analyzer

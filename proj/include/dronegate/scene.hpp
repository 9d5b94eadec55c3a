#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dronegate/geometry.hpp"

namespace dronegate::scene {

enum class ObjectClass { Crowd, Structure, Vehicle };

std::string_view to_string(ObjectClass object_class);

// All shapes are convex solids in a z-up frame with altitude = z, meters
// throughout. Cylinders stand on the ground (z = 0 to height_m); discs are
// ground-level laminas (a crowd footprint, a solar farm).
struct Cylinder {
  geom::Vec2 center_xy;
  double radius_m = 1.0;
  double height_m = 1.0;
};

struct Sphere {
  geom::Vec3 center;
  double radius_m = 1.0;
};

struct Disc {
  geom::Vec2 center_xy;
  double radius_m = 1.0;
};

struct WorldObject {
  std::string name;  // unique identifier within a Scene
  ObjectClass object_class = ObjectClass::Structure;
  std::variant<Cylinder, Sphere, Disc> shape;
};

struct Scene {
  std::vector<WorldObject> objects;
  geom::Vec3 drone_start;  // on the ground: z == 0
  // Names generated code may reference: drone_start, every object's name,
  // `<name>_position` for each crowd, plus any explicit entries from the
  // scene file (which override the generated ones).
  std::map<std::string, geom::Vec3> symbol_table;
};

class SceneFormatError : public std::runtime_error {
 public:
  SceneFormatError(int line, std::string reason);
  int line;  // 0 when the failure is not tied to a specific line
};

class DuplicateObjectError : public std::runtime_error {
 public:
  explicit DuplicateObjectError(std::string name);
  std::string name;
};

class UnknownSymbolError : public std::runtime_error {
 public:
  explicit UnknownSymbolError(std::string name);
  std::string name;
};

/// Parses the scene file format: a JSON object with `objects`,
/// `drone_start`, and optional `symbols`. Enforces all Scene invariants.
Scene load_scene(std::string_view text);

/// Looks a name up in the symbol table.
geom::Vec3 resolve_symbol(const Scene& scene, const std::string& name);

/// Distance from a point to the object's surface; 0 inside the solid.
double distance_to(const WorldObject& object, geom::Vec3 point);

/// The ground-anchored point an object's name resolves to: center of a
/// cylinder or disc footprint, center of a sphere.
geom::Vec3 reference_position(const WorldObject& object);

/// Symbol-table keys, in the shape validate() expects.
std::set<std::string> known_symbols(const Scene& scene);

}  // namespace dronegate::scene

#include "dronegate/scene.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "dronegate/text.hpp"

namespace dronegate::scene {

namespace {

using nlohmann::json;

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s.front())) && s.front() != '_') return false;
  return std::ranges::all_of(s, [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

double require_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw SceneFormatError(0, cat(what, " must be a number"));
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SceneFormatError(0, cat(what, " must be finite"));
  return v;
}

double require_positive(const json& parent, const char* key, const std::string& what) {
  if (!parent.contains(key)) throw SceneFormatError(0, cat(what, " is missing '", key, "'"));
  const double v = require_number(parent[key], cat(what, " ", key));
  if (v <= 0.0) throw SceneFormatError(0, cat(what, " ", key, " must be positive"));
  return v;
}

geom::Vec3 require_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw SceneFormatError(0, cat(what, " must be [x, y, z]"));
  return {require_number(j[0], what), require_number(j[1], what), require_number(j[2], what)};
}

geom::Vec2 require_vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw SceneFormatError(0, cat(what, " must be [x, y]"));
  return {require_number(j[0], what), require_number(j[1], what)};
}

WorldObject parse_object(const json& j) {
  if (!j.is_object()) throw SceneFormatError(0, "each entry in 'objects' must be an object");
  for (const char* key : {"name", "class", "shape"}) {
    if (!j.contains(key)) throw SceneFormatError(0, cat("object entry is missing '", key, "'"));
  }
  WorldObject object;
  if (!j["name"].is_string() || !is_identifier(j["name"].get<std::string>())) {
    throw SceneFormatError(0, "object name must be an identifier");
  }
  object.name = j["name"].get<std::string>();

  const std::string cls = j["class"].is_string() ? j["class"].get<std::string>() : "";
  if (cls == "crowd") {
    object.object_class = ObjectClass::Crowd;
  } else if (cls == "structure") {
    object.object_class = ObjectClass::Structure;
  } else if (cls == "vehicle") {
    object.object_class = ObjectClass::Vehicle;
  } else {
    throw SceneFormatError(0, cat("object '", object.name,
                                  "' class must be crowd, structure, or vehicle"));
  }

  const json& shape = j["shape"];
  if (!shape.is_object() || !shape.contains("kind") || !shape["kind"].is_string()) {
    throw SceneFormatError(0, cat("object '", object.name, "' shape needs a 'kind'"));
  }
  const std::string kind = shape["kind"].get<std::string>();
  const std::string what = cat("object '", object.name, "' (", kind, ")");
  if (!shape.contains("center")) throw SceneFormatError(0, cat(what, " is missing 'center'"));
  if (kind == "cylinder") {
    object.shape = Cylinder{require_vec2(shape["center"], cat(what, " center")),
                            require_positive(shape, "radius", what),
                            require_positive(shape, "height", what)};
  } else if (kind == "sphere") {
    object.shape = Sphere{require_vec3(shape["center"], cat(what, " center")),
                          require_positive(shape, "radius", what)};
  } else if (kind == "disc") {
    object.shape = Disc{require_vec2(shape["center"], cat(what, " center")),
                        require_positive(shape, "radius", what)};
  } else {
    throw SceneFormatError(0, cat(what, ": kind must be cylinder, sphere, or disc"));
  }
  return object;
}

}  // namespace

std::string_view to_string(ObjectClass object_class) {
  switch (object_class) {
    case ObjectClass::Crowd: return "crowd";
    case ObjectClass::Structure: return "structure";
    case ObjectClass::Vehicle: return "vehicle";
  }
  return "structure";
}

SceneFormatError::SceneFormatError(int line_, std::string reason)
    : std::runtime_error(line_ > 0 ? cat("scene format error at line ", line_, ": ", reason)
                                   : cat("scene format error: ", reason)),
      line(line_) {}

DuplicateObjectError::DuplicateObjectError(std::string name_)
    : std::runtime_error(cat("duplicate object name '", name_, "'")), name(std::move(name_)) {}

UnknownSymbolError::UnknownSymbolError(std::string name_)
    : std::runtime_error(cat("unknown symbol '", name_, "'")), name(std::move(name_)) {}

Scene load_scene(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw SceneFormatError(line, "invalid structured text");
  }
  if (!doc.is_object()) throw SceneFormatError(0, "top level must be an object");
  for (const char* key : {"objects", "drone_start"}) {
    if (!doc.contains(key)) throw SceneFormatError(0, cat("missing top-level '", key, "'"));
  }

  Scene scene;
  scene.drone_start = require_vec3(doc["drone_start"], "drone_start");
  if (scene.drone_start.z != 0.0) {
    throw SceneFormatError(0, "drone_start must be on the ground (z = 0)");
  }

  if (!doc["objects"].is_array()) throw SceneFormatError(0, "'objects' must be a list");
  for (const json& entry : doc["objects"]) {
    WorldObject object = parse_object(entry);
    const auto same_name = [&object](const WorldObject& o) { return o.name == object.name; };
    if (std::ranges::any_of(scene.objects, same_name)) throw DuplicateObjectError(object.name);
    scene.objects.push_back(std::move(object));
  }

  scene.symbol_table["drone_start"] = scene.drone_start;
  for (const WorldObject& object : scene.objects) {
    scene.symbol_table[object.name] = reference_position(object);
    if (object.object_class == ObjectClass::Crowd) {
      scene.symbol_table[object.name + "_position"] = reference_position(object);
    }
  }
  if (doc.contains("symbols")) {
    if (!doc["symbols"].is_object()) throw SceneFormatError(0, "'symbols' must be a map");
    for (const auto& [name, value] : doc["symbols"].items()) {
      if (!is_identifier(name)) {
        throw SceneFormatError(0, cat("symbol name '", name, "' must be an identifier"));
      }
      scene.symbol_table[name] = require_vec3(value, cat("symbol '", name, "'"));
    }
  }
  return scene;
}

geom::Vec3 resolve_symbol(const Scene& scene, const std::string& name) {
  const auto it = scene.symbol_table.find(name);
  if (it == scene.symbol_table.end()) throw UnknownSymbolError(name);
  return it->second;
}

double distance_to(const WorldObject& object, geom::Vec3 point) {
  return std::visit(
      [&](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, Cylinder>) {
          return geom::point_cylinder_distance(point, shape.center_xy, shape.radius_m,
                                               shape.height_m);
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return geom::point_sphere_distance(point, shape.center, shape.radius_m);
        } else {
          return geom::point_disc_distance(point, {shape.center_xy.x, shape.center_xy.y, 0.0},
                                           shape.radius_m);
        }
      },
      object.shape);
}

geom::Vec3 reference_position(const WorldObject& object) {
  return std::visit(
      [](const auto& shape) -> geom::Vec3 {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return shape.center;
        } else {
          return {shape.center_xy.x, shape.center_xy.y, 0.0};
        }
      },
      object.shape);
}

std::set<std::string> known_symbols(const Scene& scene) {
  std::set<std::string> names;
  for (const auto& [name, position] : scene.symbol_table) names.insert(name);
  return names;
}

}  // namespace dronegate::scene

#pragma once

#include <array>
#include <cmath>

namespace dronegate::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec2 xy() const { return {x, y}; }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend bool operator==(Vec3 a, Vec3 b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline bool finite(Vec3 a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

inline Vec3 lerp(Vec3 a, Vec3 b, double t) { return a + (b - a) * t; }

/// Closest approach of a parametrized segment to a solid: the minimum
/// distance and the parameter t in [0,1] at which it is attained.
struct ClosestApproach {
  double distance = 0.0;
  double t = 0.0;
};

// Real roots of low-degree polynomials with leading-coefficient fallback.
// Coefficients are ordered from the constant term up: c[0] + c[1]x + ...
// Returns the number of real roots written to `roots`.
int solve_quadratic(const std::array<double, 3>& c, std::array<double, 4>& roots);
int solve_cubic(const std::array<double, 4>& c, std::array<double, 4>& roots);
int solve_quartic(const std::array<double, 5>& c, std::array<double, 4>& roots);

// Distance from a point to each solid. Zero when the point is inside.
// Cylinders are vertical and grounded, extending from z = 0 to z = height.
// Discs are horizontal laminas at z = center.z.
double point_sphere_distance(Vec3 p, Vec3 center, double radius);
double point_cylinder_distance(Vec3 p, Vec2 center_xy, double radius, double height);
double point_disc_distance(Vec3 p, Vec3 center, double radius);

// Exact minimum distance from a segment [a,b] to each solid.
ClosestApproach segment_sphere_distance(Vec3 a, Vec3 b, Vec3 center, double radius);
ClosestApproach segment_cylinder_distance(Vec3 a, Vec3 b, Vec2 center_xy, double radius,
                                          double height);
ClosestApproach segment_disc_distance(Vec3 a, Vec3 b, Vec3 center, double radius);

// Closest approach of the horizontal projection of [a,b] to a ground point.
ClosestApproach segment_point_distance_2d(Vec2 a, Vec2 b, Vec2 p);

}  // namespace dronegate::geom

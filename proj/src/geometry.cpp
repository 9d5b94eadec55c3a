#include "dronegate/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dronegate::geom {

namespace {

constexpr double kEps = 1e-12;

// Evaluate a polynomial with coefficients ordered constant-term first.
template <std::size_t N>
double poly_eval(const std::array<double, N>& c, double x) {
  double acc = 0.0;
  for (std::size_t i = N; i-- > 0;) acc = acc * x + c[i];
  return acc;
}

// Newton steps against the exact polynomial tighten roots that come out of
// the closed-form cascade with accumulated rounding. Runs until the step
// stalls relative to the root's own magnitude.
template <std::size_t N>
double poly_polish(const std::array<double, N>& c, double x) {
  std::array<double, N - 1> d{};
  for (std::size_t i = 1; i < N; ++i) d[i - 1] = c[i] * static_cast<double>(i);
  for (int iter = 0; iter < 30; ++iter) {
    const double f = poly_eval(c, x);
    const double fp = poly_eval(d, x);
    if (fp == 0.0) break;
    const double step = f / fp;
    if (!std::isfinite(step)) break;
    x -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace

int solve_quadratic(const std::array<double, 3>& c, std::array<double, 4>& roots) {
  const double a = c[2], b = c[1], k = c[0];
  if (std::abs(a) < kEps) {
    if (std::abs(b) < kEps) return 0;
    roots[0] = -k / b;
    return 1;
  }
  const double disc = b * b - 4.0 * a * k;
  if (disc < 0.0) return 0;
  // Citardauq form on one branch avoids cancellation when b dominates.
  const double s = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0.0 ? s : -s));
  roots[0] = q / a;
  roots[1] = (std::abs(q) > kEps) ? k / q : -b / a - roots[0];
  if (roots[0] > roots[1]) std::swap(roots[0], roots[1]);
  return 2;
}

int solve_cubic(const std::array<double, 4>& c, std::array<double, 4>& roots) {
  if (std::abs(c[3]) < kEps) {
    return solve_quadratic({c[0], c[1], c[2]}, roots);
  }
  // Normalize to x^3 + a2 x^2 + a1 x + a0 and depress with x = t - a2/3.
  const double a2 = c[2] / c[3];
  const double a1 = c[1] / c[3];
  const double a0 = c[0] / c[3];
  const double shift = a2 / 3.0;
  const double p = a1 - a2 * a2 / 3.0;
  const double q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;

  int n = 0;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  // The repeated-root band must scale with the discriminant's own terms: an
  // absolute epsilon misreads well-separated roots whenever p and q are
  // small, and fabricating a phantom double root there poisons callers.
  const double disc_scale = std::max(q * q / 4.0, std::abs(p * p * p) / 27.0);
  const double disc_band = 32.0 * std::numeric_limits<double>::epsilon() * disc_scale;
  if (disc > disc_band) {
    // One real root: Cardano.
    const double s = std::sqrt(disc);
    const double u = std::cbrt(-q / 2.0 + s);
    const double v = std::cbrt(-q / 2.0 - s);
    roots[n++] = u + v - shift;
  } else if (disc < -disc_band) {
    // Three distinct real roots: trigonometric form.
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double theta = std::acos(std::clamp(3.0 * q / (p * m), -1.0, 1.0)) / 3.0;
    for (int k = 0; k < 3; ++k) {
      roots[n++] = m * std::cos(theta - 2.0 * std::numbers::pi_v<double> * k / 3.0) - shift;
    }
  } else {
    // Repeated roots.
    const double u = std::cbrt(-q / 2.0);
    roots[n++] = 2.0 * u - shift;
    roots[n++] = -u - shift;
  }
  for (int i = 0; i < n; ++i) roots[i] = poly_polish(c, roots[i]);
  std::sort(roots.begin(), roots.begin() + n);
  return n;
}

int solve_quartic(const std::array<double, 5>& c, std::array<double, 4>& roots) {
  if (std::abs(c[4]) < kEps) {
    return solve_cubic({c[0], c[1], c[2], c[3]}, roots);
  }
  // Normalize to x^4 + a3 x^3 + a2 x^2 + a1 x + a0, depress with x = t - a3/4:
  //   t^4 + p t^2 + q t + r = 0
  const double a3 = c[3] / c[4];
  const double a2 = c[2] / c[4];
  const double a1 = c[1] / c[4];
  const double a0 = c[0] / c[4];
  const double shift = a3 / 4.0;
  const double a3sq = a3 * a3;
  const double p = a2 - 3.0 * a3sq / 8.0;
  const double q = a1 - a3 * a2 / 2.0 + a3sq * a3 / 8.0;
  const double r = a0 - a3 * a1 / 4.0 + a3sq * a2 / 16.0 - 3.0 * a3sq * a3sq / 256.0;

  int n = 0;
  std::array<double, 4> sub{};
  if (std::abs(q) < 1e-10) {
    // Biquadratic: solve y^2 + p y + r = 0 in y = t^2.
    const int ny = solve_quadratic({r, p, 1.0}, sub);
    for (int i = 0; i < ny; ++i) {
      if (sub[i] < -kEps) continue;
      const double s = std::sqrt(std::max(sub[i], 0.0));
      roots[n++] = s - shift;
      if (s > kEps) roots[n++] = -s - shift;
    }
  } else {
    // Ferrari: any real root z > 0 of the resolvent cubic
    //   z^3 + 2p z^2 + (p^2 - 4r) z - q^2 = 0
    // splits the depressed quartic into two quadratics. Near-degenerate
    // discriminants can hand back inaccurate extra resolvent roots, so try
    // every positive one: a wrong z yields at worst duplicate or complex
    // splits, while the right z recovers the real roots. Polishing against
    // the full quartic then collapses the candidates.
    std::array<double, 4> zs{};
    const int nz = solve_cubic({-q * q, p * p - 4.0 * r, 2.0 * p, 1.0}, zs);
    std::array<double, 16> candidates{};
    int nc = 0;
    for (int i = 0; i < nz; ++i) {
      const double z = zs[i];
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      const double s = std::sqrt(z);
      const double u = (p + z) / 2.0 - q / (2.0 * s);
      const double v = (p + z) / 2.0 + q / (2.0 * s);
      int nq = solve_quadratic({u, s, 1.0}, sub);
      for (int k = 0; k < nq; ++k) candidates[nc++] = sub[k] - shift;
      nq = solve_quadratic({v, -s, 1.0}, sub);
      for (int k = 0; k < nq; ++k) candidates[nc++] = sub[k] - shift;
    }
    for (int i = 0; i < nc; ++i) {
      const double x = poly_polish(c, candidates[i]);
      if (!std::isfinite(x)) continue;
      // Keep only genuine roots: compare the residual against the size of
      // the terms that formed it.
      double term_scale = 0.0;
      double xi = 1.0;
      for (const double coeff : c) {
        term_scale += std::abs(coeff) * std::abs(xi);
        xi *= x;
      }
      if (std::abs(poly_eval(c, x)) > 1e-8 * (term_scale + kEps)) continue;
      bool fresh = true;
      for (int k = 0; fresh && k < n; ++k) {
        fresh = std::abs(x - roots[k]) > 1e-9 * (1.0 + std::abs(x));
      }
      if (fresh && n < 4) roots[n++] = x;
    }
    std::sort(roots.begin(), roots.begin() + n);
    return n;
  }
  for (int i = 0; i < n; ++i) roots[i] = poly_polish(c, roots[i]);
  std::sort(roots.begin(), roots.begin() + n);
  return n;
}

double point_sphere_distance(Vec3 p, Vec3 center, double radius) {
  return std::max(0.0, norm(p - center) - radius);
}

double point_cylinder_distance(Vec3 p, Vec2 center_xy, double radius, double height) {
  const double radial = std::max(0.0, norm(p.xy() - center_xy) - radius);
  double axial = 0.0;
  if (p.z < 0.0) {
    axial = -p.z;
  } else if (p.z > height) {
    axial = p.z - height;
  }
  return std::sqrt(radial * radial + axial * axial);
}

double point_disc_distance(Vec3 p, Vec3 center, double radius) {
  const double rho = norm(p.xy() - center.xy());
  const double dz = p.z - center.z;
  if (rho <= radius) return std::abs(dz);
  const double dr = rho - radius;
  return std::sqrt(dr * dr + dz * dz);
}

ClosestApproach segment_point_distance_2d(Vec2 a, Vec2 b, Vec2 p) {
  const Vec2 u = b - a;
  const double len2 = dot(u, u);
  double t = 0.0;
  if (len2 > kEps) t = std::clamp(dot(p - a, u) / len2, 0.0, 1.0);
  const Vec2 closest = a + u * t;
  return {norm(closest - p), t};
}

ClosestApproach segment_sphere_distance(Vec3 a, Vec3 b, Vec3 center, double radius) {
  const Vec3 u = b - a;
  const double len2 = dot(u, u);
  double t = 0.0;
  if (len2 > kEps) t = std::clamp(dot(center - a, u) / len2, 0.0, 1.0);
  return {point_sphere_distance(lerp(a, b, t), center, radius), t};
}

ClosestApproach segment_disc_distance(Vec3 a, Vec3 b, Vec3 center, double radius) {
  // Work in coordinates centered on the disc. Along the segment
  // p(t) = a + t(b - a) the horizontal offset squared is a quadratic q(t)
  // and the vertical offset z(t) is linear.
  const Vec3 ra = a - center;
  const Vec3 rb = b - center;
  const Vec2 h0 = ra.xy();
  const Vec2 hd = rb.xy() - ra.xy();
  const double z0 = ra.z;
  const double zd = rb.z - ra.z;

  const double A = dot(hd, hd);
  const double B = 2.0 * dot(h0, hd);
  const double C = dot(h0, h0);

  auto eval = [&](double t) { return point_disc_distance(lerp(a, b, t), center, radius); };

  double best_t = 0.0;
  double best_d = eval(0.0);
  auto consider = [&](double t) {
    if (!std::isfinite(t)) return;
    t = std::clamp(t, 0.0, 1.0);
    const double d = eval(t);
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  };

  consider(1.0);

  // Crossing the disc plane: if it happens over the disc the distance is 0.
  if (std::abs(zd) > kEps) consider(-z0 / zd);

  // Interior regime: over the disc the distance is |z(t)|, so check where
  // the segment enters/leaves the vertical cylinder rho = radius and the
  // unclamped minimum of q (flattest horizontal approach).
  std::array<double, 4> rs{};
  const int nr = solve_quadratic({C - radius * radius, B, A}, rs);
  for (int i = 0; i < nr; ++i) consider(rs[i]);
  if (A > kEps) consider(-B / (2.0 * A));

  // Rim regime: squared distance f(t) = (sqrt(q) - r)^2 + z^2 has
  //   f'(t) = q' - r q'/sqrt(q) + 2 z z' = 0.
  // With P(t) = q'(t) + 2 z(t) z', isolating the radical and squaring gives
  // the quartic  q P^2 = r^2 q'^2.  Roots introduced by squaring are
  // harmless because every candidate is scored with the exact distance.
  const double P1 = 2.0 * A + 2.0 * zd * zd;  // coefficient of t in P
  const double P0 = B + 2.0 * z0 * zd;        // constant term of P
  std::array<double, 5> quartic{};
  quartic[0] = C * P0 * P0;
  quartic[1] = B * P0 * P0 + 2.0 * C * P1 * P0;
  quartic[2] = A * P0 * P0 + 2.0 * B * P1 * P0 + C * P1 * P1;
  quartic[3] = 2.0 * A * P1 * P0 + B * P1 * P1;
  quartic[4] = A * P1 * P1;
  const double r2 = radius * radius;
  quartic[0] -= r2 * B * B;
  quartic[1] -= r2 * 4.0 * A * B;
  quartic[2] -= r2 * 4.0 * A * A;

  std::array<double, 4> qs{};
  const int nq = solve_quartic(quartic, qs);
  for (int i = 0; i < nq; ++i) consider(qs[i]);

  return {best_d, best_t};
}

ClosestApproach segment_cylinder_distance(Vec3 a, Vec3 b, Vec2 center_xy, double radius,
                                          double height) {
  const double za = a.z;
  const double zb = b.z;
  const double zd = zb - za;

  auto eval = [&](double t) { return point_cylinder_distance(lerp(a, b, t), center_xy, radius, height); };

  double best_t = 0.0;
  double best_d = eval(0.0);
  auto consider = [&](double t, double d) {
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  };
  consider(1.0, eval(1.0));

  // Middle regime: the subsegment with z in [0, height] only sees the radial
  // distance, so minimize the horizontal quadratic q(t) over that t-window.
  {
    double lo = 0.0, hi = 1.0;
    if (std::abs(zd) > kEps) {
      const double t0 = (0.0 - za) / zd;
      const double t1 = (height - za) / zd;
      lo = std::clamp(std::min(t0, t1), 0.0, 1.0);
      hi = std::clamp(std::max(t0, t1), 0.0, 1.0);
      if (std::max(za, zb) < 0.0 || std::min(za, zb) > height) {
        lo = 1.0;
        hi = 0.0;  // crossing parameters exist but lie outside the slab
      }
    } else if (za < 0.0 || za > height) {
      lo = 1.0;
      hi = 0.0;  // level segment entirely outside the slab
    }
    if (lo <= hi) {
      const Vec2 h0 = a.xy() - center_xy;
      const Vec2 hd = b.xy() - a.xy();
      const double A = dot(hd, hd);
      const double B = 2.0 * dot(h0, hd);
      double t = lo;
      if (A > kEps) t = std::clamp(-B / (2.0 * A), lo, hi);
      for (double cand : {lo, hi, t}) consider(cand, eval(cand));
    }
  }

  // Cap regimes: clip the segment to the half-space beyond each cap and
  // measure the clipped piece against that cap disc.
  auto against_cap = [&](double lo, double hi, double cap_z) {
    const Vec3 cap_center{center_xy.x, center_xy.y, cap_z};
    if (hi - lo < kEps) {
      consider(lo, point_disc_distance(lerp(a, b, lo), cap_center, radius));
      return;
    }
    const Vec3 pa = lerp(a, b, lo);
    const Vec3 pb = lerp(a, b, hi);
    const ClosestApproach ca = segment_disc_distance(pa, pb, cap_center, radius);
    consider(lo + ca.t * (hi - lo), ca.distance);
  };
  auto cross = [&](double plane_z) {
    return std::clamp((plane_z - za) / zd, 0.0, 1.0);
  };
  if (za > height || zb > height) {
    if (za > height && zb > height) {
      against_cap(0.0, 1.0, height);
    } else if (za > height) {
      against_cap(0.0, cross(height), height);
    } else {
      against_cap(cross(height), 1.0, height);
    }
  }
  if (za < 0.0 || zb < 0.0) {
    if (za < 0.0 && zb < 0.0) {
      against_cap(0.0, 1.0, 0.0);
    } else if (za < 0.0) {
      against_cap(0.0, cross(0.0), 0.0);
    } else {
      against_cap(cross(0.0), 1.0, 0.0);
    }
  }

  return {best_d, best_t};
}

}  // namespace dronegate::geom

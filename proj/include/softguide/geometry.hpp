#pragma once

// Bookcover curves and Fermi (parallel) coordinates.
//
// A bookcover curve with half-gap rho and opening angle beta consists of a
// circular arc in the half-plane x <= 0 joined C^1 to two straight
// half-lines that leave the points (0, +rho) and (0, -rho) into x > 0 with
// slopes +-tan(beta/2).  The arc has radius R = rho / cos(beta/2), center
// C = (rho * tan(beta/2), 0), and arc-length half-extent
// s0 = R * (pi - beta) / 2; beta = 0 closes the arc to a half-circle and
// beta -> pi straightens the curve out.
//
// The curve is parametrized by arc length s (s = 0 at the leftmost point of
// the arc, s > 0 toward the upper half-line).  Fermi coordinates attach the
// unit normal N = (-T_y, T_x) to the unit tangent T; with our orientation
// N points away from the arc center, i.e. u > 0 lies on the outer (convex)
// side of the bend.  The map (s, u) -> point(s) + u * N(s) is injective for
// |u| < rho, which is why tube half-widths are required to stay below rho.

#include <optional>

namespace softguide {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double t, Vec2 a) { return {t * a.x, t * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a);

struct FermiCoords {
  double s = 0.0;  // arc length along the curve
  double u = 0.0;  // signed normal offset, positive on the outer side
};

class Curve {
 public:
  // rho > 0, 0 <= beta < pi, tail_length > 0.  tail_length records how much
  // of each straight channel downstream experiments intend to keep; the
  // parametrization itself is unbounded.
  Curve(double rho, double beta, double tail_length);

  double rho() const { return rho_; }
  double beta() const { return beta_; }
  double tail_length() const { return tail_; }
  double arc_radius() const { return radius_; }
  Vec2 arc_center() const { return center_; }
  double arc_half_length() const { return s0_; }

  // Signed curvature: +1/R on the arc (including the junctions), 0 on the
  // half-lines.  The total turn integral equals pi - beta.
  double curvature(double s) const;

  Vec2 point(double s) const;
  Vec2 tangent(double s) const;
  Vec2 normal(double s) const;
  Vec2 point_at(double s, double u) const { return point(s) + u * normal(s); }

  // Exact inverse of point_at onto the nearest branch of the curve.  Well
  // defined (and a true inverse) wherever |u| < rho; outside that tube the
  // branch with the smaller normal offset is reported, ties preferring the
  // arc and then the upper half-line.
  FermiCoords fermi(Vec2 p) const;

  // Tube membership test: coordinates if p lies within normal distance a of
  // the curve (|u| <= a), std::nullopt otherwise.  Requires 0 < a < rho so
  // the tube is embedded.
  std::optional<FermiCoords> fermi_project(Vec2 p, double a) const;

 private:
  double rho_;
  double beta_;
  double tail_;
  double radius_;   // R = rho / cos(beta/2)
  double s0_;       // R * (pi - beta) / 2
  Vec2 center_;     // (rho * tan(beta/2), 0)
  double half_;     // beta / 2
  Vec2 dir_up_;     // tangent of the upper half-line
  Vec2 dir_down_;   // tangent of the lower half-line
};

// Convenience factory mirroring the constructor.
Curve build_bookcover(double rho, double beta, double tail_length);

}  // namespace softguide

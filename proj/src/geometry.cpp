#include "softguide/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace softguide {

namespace {
constexpr double pi = std::numbers::pi;
// Keep sec(beta/2) finite; the curve degenerates to a straight line as
// beta -> pi and nothing in the experiments goes near that limit.
constexpr double max_beta = pi - 1e-6;
}  // namespace

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Curve::Curve(double rho, double beta, double tail_length)
    : rho_(rho), beta_(beta), tail_(tail_length) {
  if (!(rho > 0.0)) throw std::invalid_argument("Curve: rho must be positive");
  if (!(beta >= 0.0 && beta < max_beta))
    throw std::invalid_argument("Curve: beta must lie in [0, pi), got " + std::to_string(beta));
  if (!(tail_length > 0.0))
    throw std::invalid_argument("Curve: tail_length must be positive");
  half_ = beta_ / 2.0;
  radius_ = rho_ / std::cos(half_);
  s0_ = radius_ * (pi - beta_) / 2.0;
  center_ = {rho_ * std::tan(half_), 0.0};
  dir_up_ = {std::cos(half_), std::sin(half_)};
  dir_down_ = {-std::cos(half_), std::sin(half_)};
}

Curve build_bookcover(double rho, double beta, double tail_length) {
  return Curve(rho, beta, tail_length);
}

double Curve::curvature(double s) const {
  return std::abs(s) <= s0_ ? 1.0 / radius_ : 0.0;
}

Vec2 Curve::point(double s) const {
  if (std::abs(s) <= s0_) {
    // Arc: center + R * (-cos(s/R), sin(s/R)); s = 0 is the leftmost point.
    const double t = s / radius_;
    return center_ + radius_ * Vec2{-std::cos(t), std::sin(t)};
  }
  if (s > 0.0) return Vec2{0.0, rho_} + (s - s0_) * dir_up_;
  return Vec2{0.0, -rho_} + (s + s0_) * dir_down_;
}

Vec2 Curve::tangent(double s) const {
  if (std::abs(s) <= s0_) {
    const double t = s / radius_;
    return {std::sin(t), std::cos(t)};
  }
  return s > 0.0 ? dir_up_ : dir_down_;
}

Vec2 Curve::normal(double s) const {
  const Vec2 t = tangent(s);
  return {-t.y, t.x};
}

FermiCoords Curve::fermi(Vec2 p) const {
  // The wedge of directions from the arc center within (pi - beta)/2 of the
  // negative x axis is exactly the region whose nearest branch is the arc;
  // its boundary rays are the normal lines at the junctions.
  const Vec2 v = p - center_;
  const double r = norm(v);
  if (r == 0.0) return {0.0, -radius_};
  if (-v.x >= r * std::sin(half_)) {
    const double phi = std::atan2(v.y, v.x);
    const double s = phi >= 0.0 ? radius_ * (pi - phi) : -radius_ * (pi + phi);
    return {s, r - radius_};
  }
  // Straight branches.  Outside the wedge the along-line coordinate of the
  // nearer branch is nonnegative; the clamp only guards roundoff at the
  // junction rays.
  const Vec2 e_up{0.0, rho_};
  const Vec2 e_down{0.0, -rho_};
  const Vec2 n_up{-dir_up_.y, dir_up_.x};
  const Vec2 n_down{-dir_down_.y, dir_down_.x};
  // Arc length decreases along the lower page, which the parametrization
  // walks in direction -dir_down.
  const double t_up = std::max(0.0, dot(p - e_up, dir_up_));
  const double t_down = std::max(0.0, -dot(p - e_down, dir_down_));
  const double u_up = dot(p - e_up, n_up);
  const double u_down = dot(p - e_down, n_down);
  if (std::abs(u_up) <= std::abs(u_down)) return {s0_ + t_up, u_up};
  return {-s0_ - t_down, u_down};
}

std::optional<FermiCoords> Curve::fermi_project(Vec2 p, double a) const {
  if (!(a > 0.0 && a < rho_))
    throw std::invalid_argument("fermi_project: tube half-width must satisfy 0 < a < rho");
  const FermiCoords fc = fermi(p);
  if (std::abs(fc.u) <= a) return fc;
  return std::nullopt;
}

}  // namespace softguide

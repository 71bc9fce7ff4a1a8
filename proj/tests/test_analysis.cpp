#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "softguide/analysis.hpp"
#include "softguide/errors.hpp"
#include "softguide/geometry.hpp"
#include "softguide/transverse1d.hpp"

using namespace softguide;

namespace {

// Even ground level -kappa^2 of the 1D square well of depth lambda and
// half-width a: kappa = q tan(q a) with q = sqrt(lambda - kappa^2).
double square_well_even_ground(double a, double lambda) {
  auto f = [&](double kappa) {
    const double q = std::sqrt(lambda - kappa * kappa);
    return q * std::tan(q * a) - kappa;
  };
  double lo = 0.0, hi = std::sqrt(lambda) * (1.0 - 1e-12);
  // f decreases from positive at kappa=0 to negative at kappa=sqrt(lambda)
  // as long as the ground branch keeps q a below pi/2, true for these wells.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  const double kappa = 0.5 * (lo + hi);
  return -kappa * kappa;
}

// Twin zero-range wells at +-rho: kappa = (alpha/2)(1 + e^{-2 kappa rho}).
double twin_delta_level(double alpha, double rho) {
  double lo = 0.5 * alpha, hi = alpha;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid - 0.5 * alpha * (1.0 + std::exp(-2.0 * mid * rho)) > 0.0 ? hi : lo) = mid;
  }
  const double kappa = 0.5 * (lo + hi);
  return -kappa * kappa;
}

// Composite Simpson of sqrt(w) over (-a, a) for the quadrature constant.
double simpson_shape_constant(const TransverseProfile& p) {
  const int n = 20000;
  const double h = 2.0 * p.a / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = -p.a + i * h;
    const double w = profile_shape(p, u);
    const double f = std::sqrt(std::max(0.0, w));
    acc += f * ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0 / M_PI;
}

}  // namespace

TEST_CASE("shape quadrature constants match closed forms and quadrature") {
  // exponent 2: integral of sqrt(1 - (u/a)^2) over (-a,a) is a pi/2.
  const auto p2 = TransverseProfile::poly(2, 0.3, 7.0);
  CHECK(shape_quadrature_constant(p2) == doctest::Approx(0.15).epsilon(1e-10));
  // square: (1/pi) * 2a.
  const auto sq = TransverseProfile::square(0.3, 7.0);
  CHECK(shape_quadrature_constant(sq) == doctest::Approx(0.6 / M_PI).epsilon(1e-12));
  // higher even powers against an independent quadrature
  for (int e : {2, 4, 8}) {
    const auto p = TransverseProfile::poly(e, 0.52, 3.0);
    CHECK(shape_quadrature_constant(p) ==
          doctest::Approx(simpson_shape_constant(p)).epsilon(1e-6));
  }
  // flattening family: constants increase with the exponent toward the square
  const double a2 = shape_quadrature_constant(TransverseProfile::poly(2, 1.0, 1.0));
  const double a8 = shape_quadrature_constant(TransverseProfile::poly(8, 1.0, 1.0));
  CHECK(a2 < a8);
  CHECK(a8 < shape_quadrature_constant(TransverseProfile::square(1.0, 1.0)));
  CHECK(dimensionless_strength(p2) == doctest::Approx(std::sqrt(7.0) * 0.15).epsilon(1e-12));
  CHECK_THROWS_AS(shape_quadrature_constant(TransverseProfile::delta(1.0)),
                  std::invalid_argument);
}

TEST_CASE("essential threshold closed forms for zero-range profiles") {
  const double alpha = 1.7, rho = 0.4;
  const auto d = TransverseProfile::delta(alpha);

  const ThresholdReport open_bend = essential_threshold(d, rho, 0.8);
  CHECK(open_bend.threshold == doctest::Approx(-alpha * alpha / 4.0).epsilon(1e-14));
  CHECK(open_bend.tolerance == 0.0);
  CHECK_FALSE(open_bend.folded);
  CHECK(open_bend.eta == doctest::Approx(std::sqrt(alpha / 2.0)).epsilon(1e-12));

  const ThresholdReport folded = essential_threshold(d, rho, 0.0);
  CHECK(folded.folded);
  CHECK(folded.threshold == doctest::Approx(twin_delta_level(alpha, rho)).epsilon(1e-12));
  // Tunneling pushes the twin level strictly below the single one.
  CHECK(folded.threshold < open_bend.threshold);
  CHECK(folded.single_well == doctest::Approx(open_bend.threshold).epsilon(1e-14));
}

TEST_CASE("essential threshold for soft wells tracks the transverse solver") {
  const auto p = TransverseProfile::poly(2, 0.1, 225.0);
  const ThresholdReport open_bend = essential_threshold(p, 0.25, 0.5);
  const ThresholdReport folded = essential_threshold(p, 0.25, 0.0);
  const double single = converged_single_ground(p).energy;
  CHECK(open_bend.threshold == doctest::Approx(single).epsilon(1e-10));
  CHECK(folded.threshold < open_bend.threshold);
  CHECK(folded.threshold == doctest::Approx(converged_double_ground(p, 0.25).energy)
                                .epsilon(1e-10));
  CHECK(folded.tolerance > 0.0);
  CHECK(folded.tolerance < 1e-4);
  CHECK(folded.eta > 0.0);
  CHECK_THROWS_AS(essential_threshold(p, 0.05, 0.0), std::invalid_argument);
}

TEST_CASE("window straddles the axis with no node on it") {
  const Curve c = build_bookcover(0.3, 0.7, 1.1);
  const double a = 0.12, pad = 0.3, h = 0.04;

  const Grid2D full = make_window(c, a, pad, h, false);
  CHECK(full.ymin == doctest::Approx(-full.ymax).epsilon(1e-14));
  for (int j = 0; j < full.ny; ++j) CHECK(std::abs(full.y(j)) > 1e-12);
  // Mirror symmetry of the mesh itself.
  for (int j = 0; j < full.ny; ++j)
    CHECK(full.y(j) == doctest::Approx(-full.y(full.ny - 1 - j)).epsilon(1e-12));

  const Grid2D half = make_window(c, a, pad, h, true);
  CHECK(half.ymin == doctest::Approx(0.5 * half.hy()).epsilon(1e-12));
  CHECK(half.ymax == doctest::Approx(full.ymax).epsilon(1e-12));
  CHECK(half.ny * 2 == full.ny);
  // The two meshes share the upper-half nodes exactly.
  for (int j = 0; j < half.ny; ++j)
    CHECK(half.y(j) == doctest::Approx(full.y(full.ny / 2 + j)).epsilon(1e-12));

  // The window covers the bend and the requested channel length.
  CHECK(full.xmin <= c.arc_center().x - c.arc_radius() - pad + 1e-12);
  CHECK(full.xmax == doctest::Approx(1.1 * std::cos(0.35)).epsilon(1e-12));
  CHECK(full.ymax >= 0.3 + full.xmax * std::tan(0.35) + a + pad - h);
  CHECK(full.hx() <= h + 1e-15);
  CHECK(full.hy() <= h + 1e-15);
}

TEST_CASE("certified counting brackets and rejects ambiguous levels") {
  const auto p = TransverseProfile::poly(2, 0.1, 225.0);
  const Curve c = build_bookcover(0.25, 0.9, 1.0);
  GridSpec spec;
  spec.h = 0.025;
  spec.pad = 0.6;  // enough lateral room that the margin undercuts the binding
  spec.half_domain = true;  // even sector is enough for the invariants
  spec.k0 = 4;
  spec.tol = 1e-8;

  // The bend binds by ~0.5 here; count at half that depth below threshold.
  const ThresholdReport thr = essential_threshold(p, 0.25, 0.9);
  const double nu = thr.threshold - 0.25;
  const CountReport r = count_discrete(c, p, spec, nu, 0.0);
  CHECK(r.nu == nu);
  CHECK(r.margin > 0.0);
  CHECK(r.count_lower >= 1);  // deep bent guide binds
  CHECK(r.count_lower <= r.count_upper);
  REQUIRE(static_cast<int>(r.dirichlet_below.size()) == r.count_lower);
  REQUIRE(static_cast<int>(r.neumann_below.size()) == r.count_upper);
  for (double e : r.dirichlet_below) CHECK(e < nu - r.margin);
  for (double e : r.neumann_below) CHECK(e < nu - r.margin);
  CHECK(std::is_sorted(r.dirichlet_below.begin(), r.dirichlet_below.end()));
  // Dirichlet levels sit above their Neumann partners on the same window.
  for (int i = 0; i < r.count_lower; ++i)
    CHECK(r.neumann_below[i] <= r.dirichlet_below[i] + 1e-12);

  // A level this close to zero cannot be certified: the exclusion band
  // swallows it.
  CHECK_THROWS_AS(count_discrete(c, p, spec, -1e-9, 0.0), InconclusiveError);
  CHECK_THROWS_AS(count_discrete(c, p, spec, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("variational bound grows as the bend closes and respects its domain") {
  // Moderate depth: the tunneling window eps_v - eps_fold is wide enough for
  // channel trial functions to certify at least one mode at small beta.
  const auto p = TransverseProfile::poly(2, 0.1, 25.0);
  const double rho = 0.25;
  const ThresholdReport folded = essential_threshold(p, rho, 0.0);
  const ThresholdReport open_bend = essential_threshold(p, rho, 0.3);
  const double nu = folded.threshold + 0.6 * (open_bend.threshold - folded.threshold);

  const VariationalBound wide = variational_count_bound(p, rho, 0.4, nu);
  const VariationalBound narrow = variational_count_bound(p, rho, 0.05, nu);
  CHECK(wide.n_nu >= 0);
  CHECK(narrow.n_nu >= wide.n_nu);
  CHECK(narrow.n_nu >= 1);
  CHECK(narrow.best_L > 0.0);
  CHECK(narrow.eps_fold < nu);

  // Raising nu toward the single-well level can only add trial modes.
  const double nu_hi = folded.threshold + 0.9 * (open_bend.threshold - folded.threshold);
  CHECK(variational_count_bound(p, rho, 0.05, nu_hi).n_nu >= narrow.n_nu);

  CHECK_THROWS_AS(variational_count_bound(p, rho, 0.0, nu), std::invalid_argument);
  CHECK_THROWS_AS(variational_count_bound(p, rho, 0.4, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(variational_count_bound(p, rho, 0.4, folded.threshold - 1.0),
                  std::invalid_argument);
}

TEST_CASE("thin-guide comparison spectrum matches the arc square well") {
  // The longitudinal comparison operator is a square well of depth 1/(4R^2)
  // spanning the arc; for these parameters it holds exactly one level.
  for (auto [rho, beta] : {std::pair{1.0, 0.0}, std::pair{0.5, 2.0}}) {
    const Curve c = build_bookcover(rho, beta, 1.0);
    const double R = c.arc_radius(), s0 = c.arc_half_length();
    const auto levels = sgamma_spectrum(c, 8);
    REQUIRE(levels.size() == 1);
    const double oracle = square_well_even_ground(s0, 1.0 / (4.0 * R * R));
    CHECK(levels[0] == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(levels[0] < 0.0);
  }
  CHECK_THROWS_AS(sgamma_spectrum(build_bookcover(1.0, 0.0, 1.0), 0),
                  std::invalid_argument);
}

TEST_CASE("deep floors drive the folded threshold to the hard-box law") {
  const auto p = TransverseProfile::poly(2, 0.5, 10.0);
  const auto rows = strong_ess_check(p, 1.0, {50.0, 200.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].lambda == 50.0);
  CHECK(rows[1].lambda == 200.0);
  for (const auto& r : rows) CHECK(r.threshold < -r.lambda);
  // The correction delta(lambda) shrinks as the floor deepens, roughly like
  // the 1/sqrt(lambda) penetration depth of the now-hard walls.
  CHECK(rows[1].delta < 0.75 * rows[0].delta);

  CHECK_THROWS_AS(strong_ess_check(p, 0.3, {10.0}), std::invalid_argument);
  CHECK_THROWS_AS(strong_ess_check(p, 1.0, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(strong_ess_check(TransverseProfile::delta(1.0), 1.0, {10.0}),
                  std::invalid_argument);
}

TEST_CASE("critical depth search validates its bracket") {
  const Curve c = build_bookcover(0.4, 0.9, 0.8);
  const auto shape = TransverseProfile::poly(2, 0.16, 1.0);
  GridSpec spec;
  spec.h = 0.04;
  spec.half_domain = true;
  CHECK_THROWS_AS(critical_depth(c, shape, 5.0, 4.0, 0.1, spec), std::invalid_argument);
  CHECK_THROWS_AS(critical_depth(c, shape, 1.0, 4.0, 0.0, spec), std::invalid_argument);
  // A bracket that starts already bound is rejected, not silently bisected.
  CHECK_THROWS_AS(critical_depth(c, shape, 150.0, 300.0, 1.0, spec), BracketError);
}

TEST_CASE("critical depth is stable under doubling the channel tails") {
  // The onset is detected against the window's own transverse section, so a
  // longer channel must not move it beyond the bisection resolution.
  const auto shape = TransverseProfile::poly(2, 0.5, 1.0);
  GridSpec spec;
  spec.h = std::sqrt(0.45 / 30.0);
  spec.pad = 4.0;
  spec.half_domain = true;
  spec.k0 = 2;
  spec.tol = 1e-8;
  const double tol = 0.04 * 0.5 * (4.0 + 30.0);
  const CriticalResult a =
      critical_depth(build_bookcover(1.0, 0.0, 24.0), shape, 4.0, 30.0, tol, spec);
  const CriticalResult b =
      critical_depth(build_bookcover(1.0, 0.0, 48.0), shape, 4.0, 30.0, tol, spec);
  CHECK(a.onset_neumann <= a.onset_dirichlet);
  CHECK(b.onset_neumann <= b.onset_dirichlet);
  CHECK(std::abs(a.critical_depth - b.critical_depth) <= 2.0 * tol);
}

TEST_CASE("hard strip refinement tracks the straight-channel gap from below") {
  const Curve c = build_bookcover(0.3, 0.0, 0.5);
  const auto p = TransverseProfile::square(0.1, 0.0);
  GridSpec spec;
  spec.tol = 1e-9;
  const auto rows = dirichlet_strip_refinement(c, p, {0.02, 0.01}, spec);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].h == 0.02);
  CHECK(rows[1].h == 0.01);
  CHECK(rows[1].dim > 2 * rows[0].dim);
  const double straight = std::pow(M_PI / 0.2, 2);
  // Bent strip binds below the straight gap; at these spacings the wall
  // error still resolves downward, so the level climbs as the mesh refines.
  CHECK(rows[0].lowest < straight);
  CHECK(rows[1].lowest < straight);
  CHECK(rows[1].lowest > rows[0].lowest);
}

TEST_CASE("strip ground state is identical in the even half-window") {
  // The full window's y nodes are mirror-symmetric with none on the axis,
  // so the even sector reduces exactly to the half grid with a reflecting
  // bottom edge; the ground state is even and must not move at all.
  const Curve c = build_bookcover(0.25, 0.0, 0.6);
  const auto p = TransverseProfile::poly(2, 0.1, 0.0);
  GridSpec spec;
  spec.tol = 1e-10;
  const auto full = dirichlet_strip_refinement(c, p, {0.01}, spec);
  spec.half_domain = true;
  const auto half = dirichlet_strip_refinement(c, p, {0.01}, spec);
  REQUIRE(full.size() == 1);
  REQUIRE(half.size() == 1);
  CHECK(half[0].dim < full[0].dim);
  CHECK(half[0].lowest == doctest::Approx(full[0].lowest).epsilon(1e-8));
}

TEST_CASE("single guided solve returns a coherent bundle") {
  const Curve c = build_bookcover(0.3, 0.6, 0.9);
  const auto p = TransverseProfile::poly(2, 0.12, 80.0);
  GridSpec spec;
  spec.h = 0.03;
  spec.pad = 0.4;
  spec.half_domain = true;
  const Solve2DResult r = solve_guide(c, p, spec, Bc::dirichlet, 2);
  REQUIRE(r.spectral.eigenvalues.size() == 2);
  // The modest window shifts levels by more than the bend binding, so only
  // claim the solve landed on the guided branch, well below half the
  // transverse level.
  CHECK(r.spectral.eigenvalues[0] < 0.5 * r.threshold.threshold);
  CHECK(r.op.dim > 0);
  CHECK(r.field.grid.nx == r.op.grid.nx);
  CHECK(r.field.depth == doctest::Approx(80.0));
  CHECK(r.threshold.single_well == doctest::Approx(converged_single_ground(p).energy)
                                       .epsilon(1e-9));
}

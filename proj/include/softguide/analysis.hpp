#pragma once

// Spectral experiments on bent soft waveguides.
//
// The recurring theme: the discrete spectrum of the bent guide sits below
// the essential-spectrum threshold set by the straight channel's transverse
// problem.  Every 2D claim made here is bracketed by a Dirichlet/Neumann
// pair of window truncations (Neumann counts from above, Dirichlet from
// below, exact at the matrix level) and guarded by margins derived from the
// corresponding 1D truncation gaps, so a count is either certified or
// reported as inconclusive -- never silently wrong.

#include <cstdint>
#include <vector>

#include "softguide/eigensolve.hpp"
#include "softguide/geometry.hpp"
#include "softguide/operator2d.hpp"
#include "softguide/transverse1d.hpp"

namespace softguide {

// Window construction and eigensolve knobs for the 2D runs.
struct GridSpec {
  double h = 0.02;           // target spacing
  double pad = -1.0;         // clearance around the structure; < 0 = auto
  double tol = 1e-7;         // eigensolver residual tolerance
  int max_iter = 800;
  std::uint64_t seed = 20240817;
  int k0 = 8;                // first eigenpair batch when counting
  int kmax = 64;             // counting gives up beyond this many pairs
  bool half_domain = false;  // even-in-y sector only (mirror plane at y = 0)
};

// Window for a given curve and tube half-width: spans the bend plus
// tail_length of each channel in x, padded everywhere else; the y mesh
// straddles y = 0 symmetrically with no node on the axis.
Grid2D make_window(const Curve& c, double a, double pad, double h, bool half_domain);

struct ThresholdReport {
  double threshold = 0.0;    // bottom of the essential spectrum
  double tolerance = 0.0;    // error estimate (0 for closed forms)
  double dn_gap = 0.0;       // 1D truncation bracket behind the estimate
  double eta = 0.0;          // center ratio of the transverse ground state
  double single_well = 0.0;  // straight-guide transverse level, for reference
  bool folded = false;       // true when beta == 0 (two parallel channels)
};

// Essential-spectrum threshold of the guide: the single-well transverse
// level for beta > 0; for beta = 0 the mirror double-well level at channel
// half-separation rho, which lies strictly below it by a tunneling term.
ThresholdReport essential_threshold(const TransverseProfile& p, double rho, double beta);

struct CountReport {
  double nu = 0.0;      // counting level
  double margin = 0.0;  // certified exclusion band around nu actually used
  int count_lower = 0;  // Dirichlet-window count (lower bound on the true count)
  int count_upper = 0;  // Neumann-window count (upper bound)
  std::vector<double> dirichlet_below;  // the counted eigenvalues, diagnostics
  std::vector<double> neumann_below;
  Grid2D grid;
};

// Certified two-sided count of eigenvalues below nu.  The margin is raised
// internally to cover the transverse truncation (3x the 1D Dirichlet/Neumann
// gap at the window's actual clearance) and the eigensolver residuals;
// throws InconclusiveError if an eigenvalue lands inside the band or the
// batch cap kmax cannot see past nu.
CountReport count_discrete(const Curve& c, const TransverseProfile& p,
                           const GridSpec& spec, double nu, double margin);

// One plain spectral solve of the windowed guide with a fixed truncation.
struct Solve2DResult {
  SpectralResult spectral;
  SparseSymmetricOperator op;
  PotentialField field;
  ThresholdReport threshold;
};
Solve2DResult solve_guide(const Curve& c, const TransverseProfile& p,
                          const GridSpec& spec, Bc bc, int k);

// Lower bound on the eigenvalue count below nu from explicit channel trial
// functions: n_nu = max over channel length L of floor((L/pi) sqrt(R)) with
// R(L) = (nu - eps_fold + nu eta^2 L tan(beta/2)) / (1 + eta^2 L tan(beta/2)),
// where eps_fold and eta belong to the double well at half-separation
// rho / cos(beta/2).  Requires beta > 0 and eps_fold < nu < 0.
struct VariationalBound {
  int n_nu = 0;
  double best_L = 0.0;
  double eps_fold = 0.0;
  double eta = 0.0;
};
VariationalBound variational_count_bound(const TransverseProfile& p, double rho,
                                         double beta, double nu);

// Depth at which the folded guide first binds, located by bisecting the
// onset separately on the Neumann and Dirichlet windows (a fixed window for
// all trial depths, so depth-monotonicity is exact at the matrix level).
// "Binds" means the windowed eigenvalue drops below the lowest level of the
// window's own discrete transverse section, minus a small resolution band;
// a uniform channel is exactly neutral in that comparison, so only
// bend-localized states can trigger it.  Throws BracketError if the bracket
// endpoints do not straddle the onset and InconclusiveError if the two
// onsets stay further apart than 2*tol.
struct CriticalResult {
  double critical_depth = 0.0;  // midpoint of the two onsets
  double onset_neumann = 0.0;
  double onset_dirichlet = 0.0;
  double band = 0.0;  // onset_dirichlet - onset_neumann
  int evaluations = 0;
};
CriticalResult critical_depth(const Curve& c, TransverseProfile shape, double depth_lo,
                              double depth_hi, double tol, const GridSpec& spec);

// Shape constant A = (1/pi) * integral sqrt(w(u)) du over the support, and
// the dimensionless coupling sqrt(depth) * A used to compare profiles of
// different widths and powers on one axis.
double shape_quadrature_constant(const TransverseProfile& p);
double dimensionless_strength(const TransverseProfile& p);

// Negative spectrum of the thin-guide longitudinal comparison operator
// -d^2/ds^2 - curvature(s)^2 / 4 (a square well of depth 1/(4R^2) across
// the arc).  Returns up to k negative levels, mesh-extrapolated.
std::vector<double> sgamma_spectrum(const Curve& c, int k);

// Deep-ditch law: adding a rectangular floor of depth lambda inside the
// support drives the folded threshold to -lambda + (hard-wall box level of
// the base profile).  Reports delta(lambda) = |threshold + lambda - box|.
struct StrongEssRow {
  double lambda = 0.0;
  double threshold = 0.0;  // folded double-well level of the deepened profile
  double delta = 0.0;
};
std::vector<StrongEssRow> strong_ess_check(const TransverseProfile& p, double rho,
                                           const std::vector<double>& lambdas);

// Closing the bend at fixed counting level nu = eps_fold + fraction * (eps_v
// - eps_fold): certified counts and variational bounds per beta, plus a
// least-squares slope of the Dirichlet count against 1/beta.
struct SweepBetaRow {
  double beta = 0.0;
  CountReport count;
  int variational_n = 0;
};
struct SweepBetaResult {
  std::vector<SweepBetaRow> rows;
  double nu = 0.0;
  double slope_vs_inv_beta = 0.0;
};
SweepBetaResult closing_sweep(const TransverseProfile& p, double rho, double tail,
                              const std::vector<double>& betas, double nu_fraction,
                              const GridSpec& spec);

// Mesh-refinement study of the hard-wall strip around the curve: lowest
// level per spacing, for comparing against the straight strip's (pi/2a)^2.
struct StripLevel {
  double h = 0.0;
  double lowest = 0.0;
  std::size_t dim = 0;
};
std::vector<StripLevel> dirichlet_strip_refinement(const Curve& c,
                                                   const TransverseProfile& p,
                                                   const std::vector<double>& hs,
                                                   const GridSpec& spec);

}  // namespace softguide

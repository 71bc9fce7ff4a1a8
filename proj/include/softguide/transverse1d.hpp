#pragma once

// Transverse (cross-sectional) 1D Schrodinger problems -d^2/du^2 - V(u).
//
// These supply the reference energies that 2D experiments compare against:
// the single-well ground state (essential-spectrum threshold of a straight
// soft guide), the mirror double-well ground state (threshold of the fully
// folded guide, two parallel channels a distance 2*rho apart), zero-range
// (delta) closed forms, and the hard-wall box level that deep wells approach.
//
// Discretization: second-order central differences on the interior of
// (-L, L) with n nodes, n even, so the mesh straddles u = 0 symmetrically
// and the even-parity sector reduces exactly to a half-size tridiagonal
// problem (mirror condition between the two middle nodes).  That reduction
// is what ground-state solves use: it is immune to the even/odd
// near-degeneracy of widely separated double wells.

#include <functional>
#include <vector>

#include "softguide/errors.hpp"

namespace softguide {

enum class ProfileKind { poly_well, square_well, delta_point };

// Ditch cross-section.  poly_well / square_well are compactly supported
// wells depth * w(u) with shape w in [0, 1] vanishing for |u| >= a; the
// poly shape is w(u) = 1 - (|u|/a)^exponent with an even exponent, which
// flattens toward the square well as the exponent grows.  delta_point is
// the zero-range limit; `depth` then holds the coupling strength alpha.
struct TransverseProfile {
  ProfileKind kind = ProfileKind::poly_well;
  int exponent = 2;
  double a = 1.0;
  double depth = 1.0;

  static TransverseProfile poly(int exponent, double a, double depth);
  static TransverseProfile square(double a, double depth);
  static TransverseProfile delta(double alpha);
};

// Normalized shape w(u); 0 outside the support.  Rejects delta_point.
double profile_shape(const TransverseProfile& p, double u);
// depth * w(u).
double profile_value(const TransverseProfile& p, double u);
// Mean of depth * w over the cell [u - h/2, u + h/2], in closed form.
// Point sampling of a discontinuous well makes the discretization error
// oscillate with mesh alignment and ruins Richardson extrapolation; exact
// cell averages restore the clean h^2 expansion.
double profile_cell_average(const TransverseProfile& p, double u, double h);

struct Grid1D {
  double L = 0.0;  // half-length of the interval
  int n = 0;       // interior nodes
  double h = 0.0;  // spacing = 2L / (n + 1)
};

struct Eigensolution1D {
  double energy = 0.0;
  // Interior-node samples at u_i = -L + (i+1) h, normalized so that the
  // trapezoid L2 norm h * sum(v^2) equals 1 (endpoint values are zero).
  std::vector<double> values;
  double center_ratio = 0.0;  // |phi(0)| / ||phi||, 4th-order midpoint interpolation
  double residual = 0.0;      // ||T v - E v|| / ||v|| of the discrete pair
  Grid1D grid;
};

// k lowest eigenpairs of -d^2/du^2 - V(u), Dirichlet at +-L.  V is the
// attractive magnitude (V >= 0 means a well of that depth); max_V bounds it
// and drives the resolution check max_V * h^2 <= 0.5.  Positive eigenvalues
// are box artifacts of the truncation; callers filter.  When V is even the
// ground-state vector is computed in the even sector (see file comment).
std::vector<Eigensolution1D> solve_potential(const std::function<double(double)>& V,
                                             double max_V, double L, int n, int k,
                                             bool even_potential = true);

// Even-sector ground state only (V must be even).  Cheaper than
// solve_potential and immune to double-well parity degeneracy.
Eigensolution1D ground_even(const std::function<double(double)>& V, double max_V,
                            double L, int n);
// Same matrix but with a mirror (Neumann) condition at the outer ends.
// Its ground energy lies below the Dirichlet one; the difference brackets
// the domain-truncation error.
double ground_even_neumann_energy(const std::function<double(double)>& V, double max_V,
                                  double L, int n);

std::vector<Eigensolution1D> solve_single_well(const TransverseProfile& p, double L,
                                               int n, int k);
// Mirror wells centered at u = +-rho (profile support must not overlap:
// a < rho... overlapping supports are allowed physically but rejected here
// to keep the two-channel reading unambiguous).
std::vector<Eigensolution1D> solve_double_well(const TransverseProfile& p, double rho,
                                               double L, int n, int k);

// Zero-range closed forms.
double delta_ground(double alpha);                         // -alpha^2 / 4
double double_delta_ground(double alpha, double rho);      // even twin-delta level
double double_delta_center_ratio(double alpha, double rho);  // eta of that level

// Ground level of -d^2/du^2 - depth * w(u) on (-a, a) with hard walls,
// Richardson-extrapolated; the deep-ditch limit approaches -depth + this.
double dirichlet_box_ground(const TransverseProfile& p);

// Mesh-converged ground-state data: solve on a triple of meshes (n/4, n/2,
// n interior nodes), Richardson-extrapolate the h^2 error, and bracket the
// domain truncation by the Dirichlet/Neumann gap on the finest mesh.
struct Converged1D {
  double energy = 0.0;
  double eta = 0.0;
  double error_estimate = 0.0;  // |extrapolated - finest|
  double dn_gap = 0.0;          // Dirichlet minus Neumann ground energy, >= 0
  double order = 0.0;           // observed convergence order (should be near 2)
  Grid1D finest;
};

struct Convergence1DOptions {
  double L = -1.0;  // < 0: choose from the decay length of a probe solve
  int n = 8000;     // finest interior-node count (even); may be raised to keep h small
};

// support_extent: how far the potential reaches from u = 0; min_feature:
// narrowest length scale the mesh must resolve (the well half-width).
Converged1D converge_ground(const std::function<double(double)>& V, double max_V,
                            double support_extent, double min_feature,
                            const Convergence1DOptions& opt = {});
// Same, but the potential is supplied as a cell mean V_mean(u, h) so that
// discontinuous wells keep their h^2 error expansion on every mesh.
Converged1D converge_ground_cells(const std::function<double(double, double)>& V_mean,
                                  double max_V, double support_extent, double min_feature,
                                  const Convergence1DOptions& opt = {});
Converged1D converged_single_ground(const TransverseProfile& p,
                                    const Convergence1DOptions& opt = {});
Converged1D converged_double_ground(const TransverseProfile& p, double rho,
                                    const Convergence1DOptions& opt = {});

}  // namespace softguide

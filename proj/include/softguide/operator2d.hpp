#pragma once

// Five-point finite-difference discretization of H = -Laplace - V on a
// rectangular window, with per-side Dirichlet/Neumann truncation.
//
// The Neumann matrix is the mirror-condition stiffness form: boundary rows
// carry 1/h^2 instead of 2/h^2 per truncated direction, so row sums vanish
// and the free operator annihilates constants exactly.  The Dirichlet
// matrix restricted to the same window is the principal submatrix of the
// Neumann one on the interior nodes, which makes eigenvalue interlacing
// lambda_k(Neumann) <= lambda_k(Dirichlet) an exact matrix-level fact; the
// pair brackets the untruncated operator and the gap measures how much the
// window is felt.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "softguide/geometry.hpp"
#include "softguide/transverse1d.hpp"

namespace softguide {

struct Grid2D {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  int nx = 0, ny = 0;  // nodes per direction including the window edges

  double hx() const { return (xmax - xmin) / (nx - 1); }
  double hy() const { return (ymax - ymin) / (ny - 1); }
  double x(int i) const { return xmin + i * hx(); }
  double y(int j) const { return ymin + j * hy(); }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  // Row-major node index, x fastest.
  std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
};

// Window with spacing <= h_target in each direction (bounds kept exact, the
// spacing is shrunk to fit).
Grid2D make_grid(double xmin, double xmax, double ymin, double ymax, double h_target);

enum class Bc { dirichlet, neumann };

struct BcSet {
  Bc xlo = Bc::dirichlet;
  Bc xhi = Bc::dirichlet;
  Bc ylo = Bc::dirichlet;
  Bc yhi = Bc::dirichlet;
  static BcSet all(Bc b) { return {b, b, b, b}; }
};

struct PotentialField {
  Grid2D grid;
  std::vector<double> values;         // attractive magnitude >= 0 per node
  std::vector<std::uint8_t> inside;   // 1 where the node lies in the tube |u| <= a
  double depth = 0.0;                 // max of the profile, for resolution checks
};

// Sample depth * w(u(q)) over the grid using exact Fermi projection onto the
// curve.  Rejects zero-range profiles, tubes with a >= rho, and grids whose
// spacing exceeds a/4 or with depth * h^2 > 0.5.
PotentialField sample_potential(const Curve& c, const TransverseProfile& p,
                                const Grid2D& g);

struct SparseSymmetricOperator {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr;   // CSR, both triangles stored
  std::vector<std::int32_t> col;
  std::vector<double> val;
  std::vector<std::int64_t> row_to_node;  // operator row -> grid node index
  Grid2D grid;
  BcSet bc;

  void apply(std::span<const double> x, std::span<double> y) const;         // OpenMP
  void apply_serial(std::span<const double> x, std::span<double> y) const;  // reference
  double gershgorin_lower() const;
  double gershgorin_upper() const;
};

SparseSymmetricOperator assemble(const PotentialField& f, BcSet bc);
inline SparseSymmetricOperator assemble(const PotentialField& f, Bc bc) {
  return assemble(f, BcSet::all(bc));
}

// Hard-wall (Dirichlet) strip of half-width p.a around the curve, carved out
// of the grid: rows exist only for nodes inside the tube, every neighbor
// outside it acts as a wall, and the optional soft well depth * w(u) is
// subtracted on the diagonal.  Walls are placed where the tube edge really
// crosses each grid segment (linear-interpolated ghost, diagonal-only
// correction, matrix stays symmetric), not at the nearest outside node;
// that keeps the eigenvalue error near second order instead of the O(h)
// staircase bias.  Throws EmptyDomainError if no node is inside.
// With mirror_ylo the bottom grid edge reflects instead of walling, which
// turns a half-window (nodes at y = h/2, 3h/2, ...) into the even sector of
// the symmetric full strip; the ground state lives there.
SparseSymmetricOperator assemble_masked_strip(const Curve& c, const TransverseProfile& p,
                                              const Grid2D& g, bool mirror_ylo = false);

// Expand a row-space vector to all grid nodes (zeros on excluded nodes).
std::vector<double> scatter_to_grid(const SparseSymmetricOperator& A,
                                    std::span<const double> rowvec);

}  // namespace softguide

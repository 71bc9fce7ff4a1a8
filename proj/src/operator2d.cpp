#include "softguide/operator2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "softguide/errors.hpp"
#include "softguide/parallel.hpp"

namespace softguide {

Grid2D make_grid(double xmin, double xmax, double ymin, double ymax, double h_target) {
  if (!(xmax > xmin && ymax > ymin))
    throw std::invalid_argument("make_grid: window must have positive extent");
  if (!(h_target > 0.0)) throw std::invalid_argument("make_grid: h_target must be positive");
  Grid2D g;
  g.xmin = xmin;
  g.xmax = xmax;
  g.ymin = ymin;
  g.ymax = ymax;
  g.nx = std::max(3, static_cast<int>(std::ceil((xmax - xmin) / h_target)) + 1);
  g.ny = std::max(3, static_cast<int>(std::ceil((ymax - ymin) / h_target)) + 1);
  return g;
}

PotentialField sample_potential(const Curve& c, const TransverseProfile& p,
                                const Grid2D& g) {
  if (p.kind == ProfileKind::delta_point)
    throw std::invalid_argument("sample_potential: zero-range profile cannot be sampled");
  if (!(p.a < c.rho()))
    throw std::invalid_argument("sample_potential: tube half-width must satisfy a < rho");
  const double h = std::max(g.hx(), g.hy());
  if (h > p.a / 4.0)
    throw ResolutionError("sample_potential: spacing " + std::to_string(h) +
                          " exceeds a/4 = " + std::to_string(p.a / 4.0));
  if (p.depth * h * h > 0.5)
    throw ResolutionError("sample_potential: depth*h^2 = " + std::to_string(p.depth * h * h) +
                          " > 0.5");

  PotentialField f;
  f.grid = g;
  f.depth = p.depth;
  f.values.assign(g.size(), 0.0);
  f.inside.assign(g.size(), 0);
  par::for_each_index(static_cast<std::ptrdiff_t>(g.size()), [&](std::ptrdiff_t idx) {
    const int i = static_cast<int>(idx % g.nx);
    const int j = static_cast<int>(idx / g.nx);
    const FermiCoords fc = c.fermi({g.x(i), g.y(j)});
    if (std::abs(fc.u) <= p.a) {
      f.inside[idx] = 1;
      f.values[idx] = profile_value(p, fc.u);
    }
  });
  return f;
}

namespace {

struct NodeRows {
  std::vector<std::int64_t> node_to_row;  // -1 for excluded nodes
  std::vector<std::int64_t> row_to_node;
};

// Assemble rows over the active nodes; `walled(item)` says whether a missing
// neighbor acts as a Dirichlet wall (keep 2/h^2 on the diagonal) or a mirror
// (drop to 1/h^2).  Active nodes and their potentials come from the caller.
template <class ActiveFn, class MirrorFn, class PotFn>
SparseSymmetricOperator assemble_generic(const Grid2D& g, ActiveFn&& active,
                                         MirrorFn&& mirror_side, PotFn&& pot,
                                         BcSet bc) {
  NodeRows nr;
  nr.node_to_row.assign(g.size(), -1);
  std::int64_t nrow = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (active(i, j)) {
        nr.node_to_row[g.node(i, j)] = nrow++;
        nr.row_to_node.push_back(static_cast<std::int64_t>(g.node(i, j)));
      }
  if (nrow == 0) throw EmptyDomainError("assemble: no active nodes in the window");

  SparseSymmetricOperator A;
  A.dim = static_cast<std::size_t>(nrow);
  A.grid = g;
  A.bc = bc;
  A.row_to_node = std::move(nr.row_to_node);
  A.row_ptr.assign(A.dim + 1, 0);

  const double cx = 1.0 / (g.hx() * g.hx());
  const double cy = 1.0 / (g.hy() * g.hy());

  // Neighbor offsets in emission order (ascending column index).
  struct Nb {
    int di, dj;
    double coeff;
  };
  const Nb nbs[4] = {{0, -1, cy}, {-1, 0, cx}, {1, 0, cx}, {0, 1, cy}};

  // Pass 1: count entries per row.
  for (std::size_t r = 0; r < A.dim; ++r) {
    const std::int64_t nd = A.row_to_node[r];
    const int i = static_cast<int>(nd % g.nx);
    const int j = static_cast<int>(nd / g.nx);
    std::size_t cnt = 1;
    for (const auto& nb : nbs) {
      const int ii = i + nb.di, jj = j + nb.dj;
      if (ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny &&
          nr.node_to_row[g.node(ii, jj)] >= 0)
        ++cnt;
    }
    A.row_ptr[r + 1] = cnt;
  }
  for (std::size_t r = 0; r < A.dim; ++r) A.row_ptr[r + 1] += A.row_ptr[r];
  A.col.resize(A.row_ptr.back());
  A.val.resize(A.row_ptr.back());

  // Pass 2: fill.  The diagonal gets 2/h^2 per direction unless a missing
  // neighbor lies across a mirror side, in which case that direction
  // contributes 1/h^2.
  par::for_each_index(static_cast<std::ptrdiff_t>(A.dim), [&](std::ptrdiff_t r) {
    const std::int64_t nd = A.row_to_node[r];
    const int i = static_cast<int>(nd % g.nx);
    const int j = static_cast<int>(nd / g.nx);
    double diag = 2.0 * (cx + cy) - pot(i, j);
    std::size_t at = A.row_ptr[r];
    bool wrote_diag = false;
    for (const auto& nb : nbs) {
      const int ii = i + nb.di, jj = j + nb.dj;
      const bool in_grid = ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny;
      const std::int64_t rr = in_grid ? nr.node_to_row[g.node(ii, jj)] : -1;
      if (rr >= 0) {
        if (!wrote_diag && rr > static_cast<std::int64_t>(r)) {
          A.col[at] = static_cast<std::int32_t>(r);
          A.val[at] = 0.0;  // placeholder, patched below
          ++at;
          wrote_diag = true;
        }
        A.col[at] = static_cast<std::int32_t>(rr);
        A.val[at] = -nb.coeff;
        ++at;
      } else if (!in_grid && mirror_side(nb.di, nb.dj)) {
        diag -= nb.coeff;  // mirror condition: this direction only adds 1/h^2
      }
    }
    if (!wrote_diag) {
      A.col[at] = static_cast<std::int32_t>(r);
      A.val[at] = 0.0;
      ++at;
    }
    for (std::size_t q = A.row_ptr[r]; q < A.row_ptr[r + 1]; ++q)
      if (A.col[q] == static_cast<std::int32_t>(r)) A.val[q] = diag;
  });
  return A;
}

}  // namespace

SparseSymmetricOperator assemble(const PotentialField& f, BcSet bc) {
  const Grid2D& g = f.grid;
  if (f.values.size() != g.size())
    throw std::invalid_argument("assemble: field size does not match the grid");
  for (double v : f.values)
    if (!(v >= 0.0)) throw std::invalid_argument("assemble: potential must be >= 0");

  auto active = [&](int i, int j) {
    if (i == 0 && bc.xlo == Bc::dirichlet) return false;
    if (i == g.nx - 1 && bc.xhi == Bc::dirichlet) return false;
    if (j == 0 && bc.ylo == Bc::dirichlet) return false;
    if (j == g.ny - 1 && bc.yhi == Bc::dirichlet) return false;
    return true;
  };
  auto mirror = [&](int di, int dj) {
    if (di < 0) return bc.xlo == Bc::neumann;
    if (di > 0) return bc.xhi == Bc::neumann;
    if (dj < 0) return bc.ylo == Bc::neumann;
    return bc.yhi == Bc::neumann;
  };
  auto pot = [&](int i, int j) { return f.values[g.node(i, j)]; };
  return assemble_generic(g, active, mirror, pot, bc);
}

SparseSymmetricOperator assemble_masked_strip(const Curve& c, const TransverseProfile& p,
                                              const Grid2D& g, bool mirror_ylo) {
  if (p.kind == ProfileKind::delta_point)
    throw std::invalid_argument("assemble_masked_strip: zero-range profile not usable");
  if (!(p.a < c.rho()))
    throw std::invalid_argument("assemble_masked_strip: need a < rho");
  const double h = std::max(g.hx(), g.hy());
  if (h > p.a / 4.0)
    throw ResolutionError("assemble_masked_strip: spacing exceeds a/4");

  std::vector<std::uint8_t> inside(g.size(), 0);
  std::vector<double> well(g.size(), 0.0);
  par::for_each_index(static_cast<std::ptrdiff_t>(g.size()), [&](std::ptrdiff_t idx) {
    const int i = static_cast<int>(idx % g.nx);
    const int j = static_cast<int>(idx / g.nx);
    const FermiCoords fc = c.fermi({g.x(i), g.y(j)});
    if (std::abs(fc.u) <= p.a) {
      inside[idx] = 1;
      well[idx] = profile_value(p, fc.u);
    }
  });

  // Wall placement.  When the neighbor across a direction is missing, the
  // tube edge |u| = a crosses that grid segment at distance theta * spacing
  // (theta in (0, 1]).  Eliminating the ghost value through the linear
  // interpolant that vanishes at the crossing keeps the matrix symmetric --
  // only the diagonal moves, from 2/h^2 to (1 + theta)/(theta h^2) in that
  // direction.  Pinning the wall at the neighbor node instead (theta = 1,
  // the plain staircase) widens the tube by O(h) on average, and that bias
  // converges so slowly it buries bend-binding effects; the interpolated
  // wall is close to second order (disk ground level: err -0.47 -> -0.017
  // at h = 0.1, quartering per refinement).  theta is floored so a grazing
  // node cannot blow up the diagonal; the wall then sits at most 0.05 h
  // too far out at that node.
  std::vector<double> wall_extra(g.size(), 0.0);
  const double wx = 1.0 / (g.hx() * g.hx());
  const double wy = 1.0 / (g.hy() * g.hy());
  par::for_each_index(static_cast<std::ptrdiff_t>(g.size()), [&](std::ptrdiff_t idx) {
    if (!inside[idx]) return;
    const int i = static_cast<int>(idx % g.nx);
    const int j = static_cast<int>(idx / g.nx);
    const double px = g.x(i), py = g.y(j);
    const struct {
      int di, dj;
      double coeff;
    } nbs[4] = {{-1, 0, wx}, {1, 0, wx}, {0, -1, wy}, {0, 1, wy}};
    double extra = 0.0;
    for (const auto& nb : nbs) {
      const int ii = i + nb.di, jj = j + nb.dj;
      if (ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny && inside[g.node(ii, jj)]) continue;
      if (mirror_ylo && jj < 0) continue;  // even mirror below, not a wall
      const double sx = nb.di * g.hx(), sy = nb.dj * g.hy();
      auto outside_at = [&](double t) {
        return std::abs(c.fermi({px + t * sx, py + t * sy}).u) > p.a;
      };
      // The tube can run past the window (channel caps): no crossing there,
      // the wall stays at the ghost node exactly as before.
      if (!outside_at(1.0)) continue;
      // First sign change on a coarse scan (a grazing segment can cross the
      // edge twice; the wall is the first crossing), then bisection.
      double tlo = 0.0, thi = 1.0;
      for (int s = 1; s <= 8; ++s)
        if (outside_at(s / 8.0)) {
          tlo = (s - 1) / 8.0;
          thi = s / 8.0;
          break;
        }
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (tlo + thi);
        (outside_at(mid) ? thi : tlo) = mid;
      }
      const double theta = std::max(0.5 * (tlo + thi), 0.05);
      extra += nb.coeff * (1.0 / theta - 1.0);
    }
    wall_extra[idx] = extra;
  });

  auto active = [&](int i, int j) { return inside[g.node(i, j)] != 0; };
  // Walls everywhere except, on request, across the bottom grid edge (the
  // even-sector mirror of a half-window).  Interior mask edges still wall.
  auto mirror = [&](int, int dj) { return mirror_ylo && dj < 0; };
  // The wall shift rides on the potential slot with opposite sign: the
  // assembled diagonal is 2 (wx + wy) - pot, so pot = well - wall_extra.
  auto pot = [&](int i, int j) { return well[g.node(i, j)] - wall_extra[g.node(i, j)]; };
  return assemble_generic(g, active, mirror, pot, BcSet::all(Bc::dirichlet));
}

void SparseSymmetricOperator::apply(std::span<const double> x, std::span<double> y) const {
  const double* px = x.data();
  double* py = y.data();
  par::for_each_index(static_cast<std::ptrdiff_t>(dim), [&](std::ptrdiff_t r) {
    double s = 0.0;
    for (std::size_t q = row_ptr[r]; q < row_ptr[r + 1]; ++q) s += val[q] * px[col[q]];
    py[r] = s;
  });
}

void SparseSymmetricOperator::apply_serial(std::span<const double> x,
                                           std::span<double> y) const {
  for (std::size_t r = 0; r < dim; ++r) {
    double s = 0.0;
    for (std::size_t q = row_ptr[r]; q < row_ptr[r + 1]; ++q) s += val[q] * x[col[q]];
    y[r] = s;
  }
}

double SparseSymmetricOperator::gershgorin_lower() const {
  double lo = std::numeric_limits<double>::max();
  for (std::size_t r = 0; r < dim; ++r) {
    double diag = 0.0, rad = 0.0;
    for (std::size_t q = row_ptr[r]; q < row_ptr[r + 1]; ++q) {
      if (col[q] == static_cast<std::int32_t>(r))
        diag = val[q];
      else
        rad += std::abs(val[q]);
    }
    lo = std::min(lo, diag - rad);
  }
  return lo;
}

double SparseSymmetricOperator::gershgorin_upper() const {
  double hi = std::numeric_limits<double>::lowest();
  for (std::size_t r = 0; r < dim; ++r) {
    double diag = 0.0, rad = 0.0;
    for (std::size_t q = row_ptr[r]; q < row_ptr[r + 1]; ++q) {
      if (col[q] == static_cast<std::int32_t>(r))
        diag = val[q];
      else
        rad += std::abs(val[q]);
    }
    hi = std::max(hi, diag + rad);
  }
  return hi;
}

std::vector<double> scatter_to_grid(const SparseSymmetricOperator& A,
                                    std::span<const double> rowvec) {
  if (rowvec.size() != A.dim)
    throw std::invalid_argument("scatter_to_grid: vector size does not match operator");
  std::vector<double> out(A.grid.size(), 0.0);
  for (std::size_t r = 0; r < A.dim; ++r)
    out[static_cast<std::size_t>(A.row_to_node[r])] = rowvec[r];
  return out;
}

}  // namespace softguide

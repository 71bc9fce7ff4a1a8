#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "softguide/errors.hpp"
#include "softguide/geometry.hpp"
#include "softguide/gridio.hpp"
#include "softguide/operator2d.hpp"
#include "softguide/transverse1d.hpp"

using namespace softguide;

namespace {

// Dense copy of the CSR matrix for small operators.
std::vector<double> densify(const SparseSymmetricOperator& A) {
  std::vector<double> M(A.dim * A.dim, 0.0);
  for (std::size_t r = 0; r < A.dim; ++r)
    for (std::size_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      M[r * A.dim + A.col[k]] += A.val[k];
  return M;
}

// Smallest eigenvalue of a small dense symmetric matrix via Jacobi rotations.
// Kept independent of the library's eigensolvers on purpose.
double jacobi_lowest(std::vector<double> M, std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += M[p * n + q] * M[p * n + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = M[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (M[q * n + q] - M[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double mrp = M[r * n + p], mrq = M[r * n + q];
          M[r * n + p] = c * mrp - s * mrq;
          M[r * n + q] = s * mrp + c * mrq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double mpr = M[p * n + r], mqr = M[q * n + r];
          M[p * n + r] = c * mpr - s * mqr;
          M[q * n + r] = s * mpr + c * mqr;
        }
      }
  }
  double lo = M[0];
  for (std::size_t i = 1; i < n; ++i) lo = std::min(lo, M[i * n + i]);
  return lo;
}

PotentialField zero_field(const Grid2D& g) {
  PotentialField f;
  f.grid = g;
  f.values.assign(g.size(), 0.0);
  f.inside.assign(g.size(), 0);
  f.depth = 0.0;
  return f;
}

}  // namespace

TEST_CASE("make_grid keeps the bounds and only shrinks the spacing") {
  const Grid2D g = make_grid(-1.0, 2.0, 0.25, 1.75, 0.1);
  CHECK(g.xmin == -1.0);
  CHECK(g.xmax == 2.0);
  CHECK(g.ymin == 0.25);
  CHECK(g.ymax == 1.75);
  CHECK(g.hx() <= 0.1 + 1e-15);
  CHECK(g.hy() <= 0.1 + 1e-15);
  // One step coarser would overshoot the target.
  CHECK((g.xmax - g.xmin) / (g.nx - 2) > 0.1);
  CHECK((g.ymax - g.ymin) / (g.ny - 2) > 0.1);
  CHECK(g.x(g.nx - 1) == doctest::Approx(g.xmax).epsilon(1e-14));
  CHECK(g.y(g.ny - 1) == doctest::Approx(g.ymax).epsilon(1e-14));
  // Node order is x fastest.
  CHECK(g.node(0, 0) == 0);
  CHECK(g.node(1, 0) == 1);
  CHECK(g.node(0, 1) == static_cast<std::size_t>(g.nx));
  CHECK_THROWS_AS(make_grid(1.0, 0.0, 0.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("free Neumann operator annihilates constants and is symmetric") {
  const Grid2D g = make_grid(0.0, 1.3, -0.4, 0.9, 0.07);
  const auto A = assemble(zero_field(g), Bc::neumann);
  REQUIRE(A.dim == g.size());

  std::vector<double> ones(A.dim, 1.0), out(A.dim, 0.0);
  A.apply_serial(ones, out);
  const double scale = 4.0 / (std::min(g.hx(), g.hy()) * std::min(g.hx(), g.hy()));
  for (double v : out) CHECK(std::abs(v) <= 1e-12 * scale);

  // CSR stores both triangles and they agree: <x, A y> == <A x, y>.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> x(A.dim), y(A.dim), Ax(A.dim), Ay(A.dim);
  for (auto& v : x) v = U(rng);
  for (auto& v : y) v = U(rng);
  A.apply_serial(x, Ax);
  A.apply_serial(y, Ay);
  double xay = 0.0, axy = 0.0;
  for (std::size_t i = 0; i < A.dim; ++i) {
    xay += x[i] * Ay[i];
    axy += Ax[i] * y[i];
  }
  CHECK(xay == doctest::Approx(axy).epsilon(1e-12));

  // Gershgorin bounds hold for a free operator: [0, 8/h^2]-ish.
  CHECK(A.gershgorin_lower() <= 1e-12 * scale);
  CHECK(A.gershgorin_upper() >= 2.0 * scale / 4.0);
}

TEST_CASE("Dirichlet ground level of the free box matches the closed form") {
  // Dirichlet rows live on the interior nodes; the wall is the window edge
  // itself, one spacing away.  The unknowns are nx-2 sine modes per
  // direction: lambda_1 = (4/hx^2) sin^2(pi/(2(nx-1))) + same in y.
  const Grid2D g = make_grid(0.0, 1.0, 0.0, 0.7, 0.05);
  const auto A = assemble(zero_field(g), Bc::dirichlet);
  REQUIRE(A.dim == static_cast<std::size_t>(g.nx - 2) * (g.ny - 2));
  const double hx = g.hx(), hy = g.hy();
  const double lam = 4.0 / (hx * hx) * std::pow(std::sin(M_PI / (2.0 * (g.nx - 1))), 2) +
                     4.0 / (hy * hy) * std::pow(std::sin(M_PI / (2.0 * (g.ny - 1))), 2);
  CHECK(jacobi_lowest(densify(A), A.dim) == doctest::Approx(lam).epsilon(1e-10));
  // Continuum limit sits nearby: pi^2 (1/Lx^2 + 1/Ly^2).
  const double cont = M_PI * M_PI * (1.0 + 1.0 / (0.7 * 0.7));
  CHECK(lam == doctest::Approx(cont).epsilon(5e-3));
}

TEST_CASE("Neumann ground interlaces below Dirichlet on the same window") {
  const Curve c = build_bookcover(0.5, 0.9, 0.8);
  const auto p = TransverseProfile::poly(2, 0.4, 40.0);
  const Grid2D g = make_grid(-0.9, 0.8, -0.8, 0.8, 0.09);
  const auto field = sample_potential(c, p, g);
  const auto N = assemble(field, Bc::neumann);
  const auto D = assemble(field, Bc::dirichlet);
  // Dirichlet is the principal submatrix of Neumann on the interior nodes,
  // so the ground levels interlace exactly at the matrix level.
  REQUIRE(N.dim == g.size());
  REQUIRE(D.dim == static_cast<std::size_t>(g.nx - 2) * (g.ny - 2));
  REQUIRE(N.dim <= 500);  // keep the dense cross-check cheap
  const double ln = jacobi_lowest(densify(N), N.dim);
  const double ld = jacobi_lowest(densify(D), D.dim);
  CHECK(ln <= ld + 1e-12);
}

TEST_CASE("sampled potential is nonnegative, mirror symmetric, and tube-flagged") {
  const double rho = 0.3, a = 0.12;
  const Curve c = build_bookcover(rho, 0.0, 1.0);
  const auto p = TransverseProfile::poly(2, a, 50.0);
  // y range symmetric about the axis, nodes off the axis.
  const Grid2D g = make_grid(-0.7, 0.9, -0.85, 0.85, 0.03);
  const auto f = sample_potential(c, p, g);
  REQUIRE(f.values.size() == g.size());
  REQUIRE(f.inside.size() == g.size());
  CHECK(f.depth == doctest::Approx(50.0));

  int flagged = 0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    CHECK(f.values[i] >= 0.0);
    CHECK(f.values[i] <= 50.0 + 1e-12);
    if (f.inside[i]) {
      ++flagged;
      CHECK(f.values[i] >= 0.0);
    } else {
      CHECK(f.values[i] == 0.0);
    }
  }
  CHECK(flagged > 0);

  // The beta = 0 bookcover is symmetric under y -> -y, so the samples must be.
  for (int j = 0; j < g.ny; ++j) {
    const int jm = g.ny - 1 - j;
    for (int i = 0; i < g.nx; ++i) {
      const double v = f.values[g.node(i, j)], vm = f.values[g.node(i, jm)];
      CHECK(std::abs(v - vm) <= 1e-12 * 50.0);
      CHECK(f.inside[g.node(i, j)] == f.inside[g.node(i, jm)]);
    }
  }

  // A node exactly on the curve sees the full depth.
  int ci = -1, cj = -1;
  double best = 1e300;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double d = std::hypot(g.x(i) - 0.0, g.y(j) - rho);
      if (d < best) best = d, ci = i, cj = j;
    }
  CHECK(f.values[g.node(ci, cj)] >= 50.0 * 0.9);
}

TEST_CASE("sample_potential rejects unusable configurations") {
  const Curve c = build_bookcover(0.3, 0.0, 1.0);
  const Grid2D g = make_grid(-0.5, 0.5, -0.5, 0.5, 0.02);
  // zero-range profile has no sampled shape
  CHECK_THROWS_AS(sample_potential(c, TransverseProfile::delta(1.0), g),
                  std::invalid_argument);
  // tube wider than the bend radius folds onto itself
  CHECK_THROWS_AS(sample_potential(c, TransverseProfile::poly(2, 0.35, 1.0), g),
                  std::invalid_argument);
  // spacing too coarse for the tube half-width
  const Grid2D coarse = make_grid(-0.5, 0.5, -0.5, 0.5, 0.2);
  CHECK_THROWS_AS(sample_potential(c, TransverseProfile::poly(2, 0.12, 1.0), coarse),
                  ResolutionError);
  // depth * h^2 too large to trust the five-point stencil
  CHECK_THROWS_AS(sample_potential(c, TransverseProfile::poly(2, 0.12, 1e5), g),
                  ResolutionError);
}

TEST_CASE("parallel apply agrees bitwise with the serial reference") {
  const Curve c = build_bookcover(0.25, 0.4, 1.2);
  const auto p = TransverseProfile::poly(2, 0.1, 60.0);
  const Grid2D g = make_grid(-0.8, 1.4, -1.0, 1.0, 0.02);
  const auto A = assemble(sample_potential(c, p, g), Bc::dirichlet);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> x(A.dim), y1(A.dim, 0.0), y2(A.dim, 1e300);
  for (auto& v : x) v = U(rng);
  A.apply_serial(x, y1);
  A.apply(x, y2);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < A.dim; ++i) diff += (y1[i] != y2[i]);
  CHECK(diff == 0);
}

TEST_CASE("masked strip keeps only tube nodes and walls everything else") {
  const double rho = 0.3, a = 0.1;
  const Curve c = build_bookcover(rho, 0.0, 0.8);
  const auto p = TransverseProfile::square(a, 0.0);
  const Grid2D g = make_grid(-0.8, 0.8, -0.8, 0.8, 0.02);
  const auto A = assemble_masked_strip(c, p, g);
  CHECK(A.dim > 0);
  CHECK(A.dim < g.size());
  // Every kept node really lies inside the tube.
  for (std::size_t r = 0; r < A.dim; ++r) {
    const auto nd = static_cast<std::size_t>(A.row_to_node[r]);
    const int i = static_cast<int>(nd % g.nx), j = static_cast<int>(nd / g.nx);
    const FermiCoords f = c.fermi({g.x(i), g.y(j)});
    CHECK(std::abs(f.u) <= a + 1e-12);
  }
  // For a zero-depth profile the diagonal is the bare stencil plus the
  // interpolated-wall shift: exactly bare on interior rows (all four
  // neighbors present), strictly larger on rows that see a wall (the wall
  // sits inside the last grid segment, never beyond the neighbor node).
  const double bare = 2.0 / (g.hx() * g.hx()) + 2.0 / (g.hy() * g.hy());
  std::size_t walled = 0;
  for (std::size_t r = 0; r < A.dim; ++r) {
    double diag = 0.0;
    const std::size_t deg = A.row_ptr[r + 1] - A.row_ptr[r];
    for (std::size_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      if (A.col[k] == static_cast<std::int32_t>(r)) diag += A.val[k];
    CHECK(diag >= bare - 1e-9 * bare);
    if (deg == 5) CHECK(diag == doctest::Approx(bare));
    if (diag > bare * (1.0 + 1e-12)) ++walled;
  }
  CHECK(walled > 0);
  // A window that misses the strip entirely has no rows to keep.
  const Grid2D off = make_grid(5.0, 6.0, 5.0, 6.0, 0.02);
  CHECK_THROWS_AS(assemble_masked_strip(c, p, off), EmptyDomainError);
}

TEST_CASE("scatter_to_grid zero-fills excluded nodes") {
  const Curve c = build_bookcover(0.3, 0.0, 0.8);
  const auto p = TransverseProfile::square(0.1, 0.0);
  const Grid2D g = make_grid(-0.8, 0.8, -0.8, 0.8, 0.02);
  const auto A = assemble_masked_strip(c, p, g);
  std::vector<double> row(A.dim, 3.5);
  const auto full = scatter_to_grid(A, row);
  REQUIRE(full.size() == g.size());
  std::size_t hits = 0;
  for (double v : full) {
    CHECK((v == 0.0 || v == 3.5));
    hits += (v == 3.5);
  }
  CHECK(hits == A.dim);
}

TEST_CASE("SGW1 round trip is bitwise and the header is stable") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "softguide_gridio_test";
  fs::create_directories(dir);
  const fs::path bin = dir / "field.sgw";

  const Grid2D g = make_grid(-0.5, 1.0, 0.25, 0.75, 0.11);
  std::vector<double> vals(g.size());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  for (auto& v : vals) v = U(rng);
  vals[0] = 0.0;
  vals[1] = -0.0;  // signed zero must survive
  write_sgw1(bin, g, vals);

  const FieldDump back = read_sgw1(bin);
  CHECK(back.grid.nx == g.nx);
  CHECK(back.grid.ny == g.ny);
  CHECK(back.grid.xmin == g.xmin);
  CHECK(back.grid.xmax == g.xmax);
  CHECK(back.grid.ymin == g.ymin);
  CHECK(back.grid.ymax == g.ymax);
  REQUIRE(back.values.size() == vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    CHECK(std::memcmp(&back.values[i], &vals[i], sizeof(double)) == 0);
  }

  // Fixed 64-byte header: magic, version, dims.
  std::ifstream in(bin, std::ios::binary);
  std::vector<char> head(64);
  in.read(head.data(), 64);
  REQUIRE(in.gcount() == 64);
  CHECK(head[0] == 'S');
  CHECK(head[1] == 'G');
  CHECK(head[2] == 'W');
  CHECK(head[3] == '1');
  std::uint32_t ver;
  std::memcpy(&ver, head.data() + 4, 4);
  CHECK(ver == 1);
  std::uint64_t nx, ny;
  std::memcpy(&nx, head.data() + 8, 8);
  std::memcpy(&ny, head.data() + 16, 8);
  CHECK(nx == static_cast<std::uint64_t>(g.nx));
  CHECK(ny == static_cast<std::uint64_t>(g.ny));
  in.seekg(0, std::ios::end);
  CHECK(static_cast<std::size_t>(in.tellg()) == 64 + g.size() * 8);

  fs::remove_all(dir);
}

TEST_CASE("field CSV uses the documented header, order, and line endings") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "softguide_gridio_csv";
  fs::create_directories(dir);
  const fs::path csv = dir / "field.csv";

  const Grid2D g = make_grid(0.0, 1.0, 0.0, 1.0, 0.5);
  std::vector<double> vals(g.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1 * i + 1.0 / 3.0;
  write_field_csv(csv, g, vals);

  std::ifstream in(csv, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.rfind("x,y,value\n", 0) == 0);
  const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  CHECK(lines == 1 + g.size());
  // Second data row is node (1, 0): x moves first.
  std::istringstream li(text);
  std::string line;
  std::getline(li, line);
  std::getline(li, line);
  std::getline(li, line);
  double x, y, v;
  REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &v) == 3);
  CHECK(x == doctest::Approx(g.x(1)).epsilon(1e-15));
  CHECK(y == doctest::Approx(g.y(0)).epsilon(1e-15));
  // 17 significant digits round-trip the double exactly.
  CHECK(v == vals[1]);

  fs::remove_all(dir);
}

#pragma once

// Deterministic eigen-tools for symmetric tridiagonal matrices
// (diagonal d[0..n), off-diagonal e[0..n-1)).  Eigenvalues come from Sturm
// sequence counts and plain bisection, eigenvectors from inverse iteration
// with partial pivoting; no randomness anywhere, so repeated runs agree to
// the last bit.

#include <span>
#include <vector>

namespace softguide::tridiag {

// Number of eigenvalues strictly below x.
int count_below(std::span<const double> d, std::span<const double> e, double x);

// Gershgorin enclosure of the whole spectrum.
struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};
Bounds gershgorin(std::span<const double> d, std::span<const double> e);

// The k smallest eigenvalues in ascending order, each bisected to relative
// accuracy ~1e-14.
std::vector<double> lowest_eigenvalues(std::span<const double> d,
                                       std::span<const double> e, int k);

// Unit eigenvector for an eigenvalue lambda obtained from the bisection
// above.  For clustered eigenvalues pass the already-computed neighbors in
// `orthogonal_to`; they are projected out every iteration.  The entry of
// largest magnitude is made positive to fix the sign.
std::vector<double> eigenvector(std::span<const double> d, std::span<const double> e,
                                double lambda,
                                std::span<const std::vector<double>> orthogonal_to = {});

// ||T v - lambda v|| for diagnostics.
double residual(std::span<const double> d, std::span<const double> e,
                std::span<const double> v, double lambda);

}  // namespace softguide::tridiag

#pragma once

// Lowest eigenpairs of the sparse symmetric operators, factorization-free.
//
// lowest_k runs block LOBPCG on the shifted matrix B = A - sigma I with
// sigma = gershgorin_lower - 1, so B is positive definite with lambda_min
// >= 1 by construction.  The preconditioner is a fixed-degree Chebyshev
// polynomial approximation of B^{-1} on a safe spectral interval; it is a
// fixed linear SPD map, so the whole iteration is deterministic: the
// starting block comes from a seeded generator, and every reduction uses
// the fixed-chunk kernels, making results independent of the OpenMP thread
// count.
//
// dense_lowest_k is the cross-check oracle (dense solve, capped dimension).

#include <cstdint>
#include <vector>

#include "softguide/operator2d.hpp"

namespace softguide {

struct EigensolveOptions {
  int k = 1;
  double tol = 1e-7;        // accept when ||A v - t v|| <= tol * max(1, |t|)
  int max_iter = 600;
  std::uint64_t seed = 20240817;
  int block_extra = 4;      // guard vectors beyond k
  int cheb_degree = 0;      // 0 = choose from the spectral interval
  bool want_vectors = true;
};

struct SpectralResult {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> residuals;    // ||A v - lambda v||, unit vectors
  std::vector<int> cluster;         // id; eigenvalues within 1e-12*scale share one
  std::vector<std::vector<double>> vectors;  // operator-row space, unit norm
  int iterations = 0;
  std::uint64_t seed = 0;
};

// Throws NonConvergenceError after max_iter, std::invalid_argument if
// k < 1 or k >= dim.  Falls back to the dense path for very small matrices
// where a 3k-dimensional block would not fit.
SpectralResult lowest_k(const SparseSymmetricOperator& A, const EigensolveOptions& opt);

// Dense symmetric solve; dimension capped at 4000.
SpectralResult dense_lowest_k(const SparseSymmetricOperator& A, int k);

}  // namespace softguide

#pragma once

// Data-parallel primitives with a determinism guarantee: every kernel
// returns bitwise-identical results for any OpenMP thread count.
//
// Loops parallelize over disjoint output slots, and reductions accumulate
// fixed-size chunks whose partial sums are combined serially in index
// order, so the floating-point summation tree never depends on the
// schedule.  Plain serial reference implementations live in
// softguide::par::serial; the unit tests and bench/ target compare the two.

#include <cstddef>
#include <span>

namespace softguide::par {

// Chunk length for deterministic reductions.  Large enough that the
// per-chunk bookkeeping is negligible, small enough to spread load.
inline constexpr std::ptrdiff_t reduction_chunk = 4096;

int max_threads();
void set_threads(int n);

// f(i) for i in [0, n); each index must touch only its own outputs.
template <class F>
void for_each_index(std::ptrdiff_t n, F&& f);

double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);
double sum(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x
void scal(double alpha, std::span<double> x);
void copy(std::span<const double> x, std::span<double> y);
void fill(std::span<double> x, double value);

namespace serial {
double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);
double sum(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace serial

}  // namespace softguide::par

#ifdef _OPENMP
#include <omp.h>
#endif

namespace softguide::par {

template <class F>
void for_each_index(std::ptrdiff_t n, F&& f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
}

}  // namespace softguide::par

#include "softguide/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace softguide::par {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

namespace {

// Reduce f(chunk) over fixed-size chunks; partial results are summed in
// chunk order so the answer does not depend on the thread count.
template <class ChunkFn>
double chunked_reduce(std::ptrdiff_t n, ChunkFn&& f) {
  const std::ptrdiff_t nchunk = (n + reduction_chunk - 1) / reduction_chunk;
  if (nchunk <= 1) return n > 0 ? f(std::ptrdiff_t{0}, n) : 0.0;
  std::vector<double> partial(static_cast<std::size_t>(nchunk));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t c = 0; c < nchunk; ++c) {
    const std::ptrdiff_t lo = c * reduction_chunk;
    const std::ptrdiff_t hi = std::min(n, lo + reduction_chunk);
    partial[static_cast<std::size_t>(c)] = f(lo, hi);
  }
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

}  // namespace

double dot(std::span<const double> x, std::span<const double> y) {
  const double* px = x.data();
  const double* py = y.data();
  return chunked_reduce(static_cast<std::ptrdiff_t>(x.size()),
                        [px, py](std::ptrdiff_t lo, std::ptrdiff_t hi) {
                          double s = 0.0;
                          for (std::ptrdiff_t i = lo; i < hi; ++i) s += px[i] * py[i];
                          return s;
                        });
}

double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double sum(std::span<const double> x) {
  const double* px = x.data();
  return chunked_reduce(static_cast<std::ptrdiff_t>(x.size()),
                        [px](std::ptrdiff_t lo, std::ptrdiff_t hi) {
                          double s = 0.0;
                          for (std::ptrdiff_t i = lo; i < hi; ++i) s += px[i];
                          return s;
                        });
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const double* px = x.data();
  double* py = y.data();
  for_each_index(static_cast<std::ptrdiff_t>(x.size()),
                 [=](std::ptrdiff_t i) { py[i] += alpha * px[i]; });
}

void scal(double alpha, std::span<double> x) {
  double* px = x.data();
  for_each_index(static_cast<std::ptrdiff_t>(x.size()),
                 [=](std::ptrdiff_t i) { px[i] *= alpha; });
}

void copy(std::span<const double> x, std::span<double> y) {
  const double* px = x.data();
  double* py = y.data();
  for_each_index(static_cast<std::ptrdiff_t>(x.size()),
                 [=](std::ptrdiff_t i) { py[i] = px[i]; });
}

void fill(std::span<double> x, double value) {
  double* px = x.data();
  for_each_index(static_cast<std::ptrdiff_t>(x.size()),
                 [=](std::ptrdiff_t i) { px[i] = value; });
}

namespace serial {

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace serial

}  // namespace softguide::par

// Timing harness for the OpenMP kernels against their serial references.
// Usage: bench_kernels [size] [repeats] [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "softguide/eigensolve.hpp"
#include "softguide/geometry.hpp"
#include "softguide/operator2d.hpp"
#include "softguide/parallel.hpp"
#include "softguide/transverse1d.hpp"

namespace {

using clk = std::chrono::steady_clock;

template <class F>
double time_best(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clk::now();
    f();
    const auto t1 = clk::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-18s serial %10.4f ms   parallel %10.4f ms   speedup %5.2fx\n", name,
              1e3 * serial, 1e3 * parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 4'000'000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  if (argc > 3) softguide::par::set_threads(std::atoi(argv[3]));
  std::printf("vector length %zu, repeats %d, threads %d\n", n, repeats,
              softguide::par::max_threads());

  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = uni(rng);
  for (auto& v : y) v = uni(rng);

  volatile double sink = 0.0;
  report("dot", time_best(repeats, [&] { sink = softguide::par::serial::dot(x, y); }),
         time_best(repeats, [&] { sink = softguide::par::dot(x, y); }));
  report("axpy", time_best(repeats, [&] { softguide::par::serial::axpy(0.5, x, y); }),
         time_best(repeats, [&] { softguide::par::axpy(-0.5, x, y); }));

  // A mid-size waveguide window for the operator kernels.
  const softguide::Curve c = softguide::build_bookcover(1.0, 0.6, 6.0);
  const auto p = softguide::TransverseProfile::poly(2, 0.3, 40.0);
  const softguide::Grid2D g = softguide::make_grid(-2.5, 5.5, -3.5, 3.5, 0.01);
  std::printf("grid %d x %d\n", g.nx, g.ny);

  softguide::PotentialField field;
  const double t_sample =
      time_best(repeats, [&] { field = softguide::sample_potential(c, p, g); });
  std::printf("%-18s %10.4f ms (parallel)\n", "sample_potential", 1e3 * t_sample);

  const auto A = softguide::assemble(field, softguide::Bc::dirichlet);
  std::vector<double> v(A.dim), w(A.dim);
  for (auto& e : v) e = uni(rng);
  report("spmv", time_best(repeats, [&] { A.apply_serial(v, w); }),
         time_best(repeats, [&] { A.apply(v, w); }));

  (void)sink;
  return 0;
}

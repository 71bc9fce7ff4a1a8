#include "softguide/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace softguide::tridiag {

namespace {
constexpr double tiny_pivot = 1e-300;
}

int count_below(std::span<const double> d, std::span<const double> e, double x) {
  const std::size_t n = d.size();
  int count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double off = i > 0 ? e[i - 1] * e[i - 1] / q : 0.0;
    q = d[i] - x - off;
    if (q == 0.0) q = -tiny_pivot;
    if (q < 0.0) ++count;
  }
  return count;
}

Bounds gershgorin(std::span<const double> d, std::span<const double> e) {
  const std::size_t n = d.size();
  Bounds b{d[0], d[0]};
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(e[i - 1]) : 0.0) +
                     (i + 1 < n ? std::abs(e[i]) : 0.0);
    b.lo = std::min(b.lo, d[i] - r);
    b.hi = std::max(b.hi, d[i] + r);
  }
  return b;
}

std::vector<double> lowest_eigenvalues(std::span<const double> d,
                                       std::span<const double> e, int k) {
  const int n = static_cast<int>(d.size());
  if (k < 1 || k > n)
    throw std::invalid_argument("tridiag::lowest_eigenvalues: k out of range");
  const Bounds b = gershgorin(d, e);
  const double scale = std::max({1.0, std::abs(b.lo), std::abs(b.hi)});
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k));
  double floor_j = b.lo;
  for (int j = 0; j < k; ++j) {
    // Eigenvalue j (0-based) is inf{x : count_below(x) >= j + 1}.
    double lo = floor_j;
    double hi = b.hi;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * scale; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(d, e, mid) >= j + 1)
        hi = mid;
      else
        lo = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    out.push_back(lambda);
    floor_j = lo;  // later eigenvalues cannot lie below this
  }
  return out;
}

namespace {

// Partial-pivoting LU of (T - lambda I) in band form, then one solve per
// call.  Layout follows the classic tridiagonal factorization: dl holds the
// multipliers, du2 the second superdiagonal created by row swaps.
struct PivotedFactor {
  std::vector<double> dd, du, du2, dl;
  std::vector<char> swapped;

  PivotedFactor(std::span<const double> d, std::span<const double> e, double lambda) {
    const std::size_t n = d.size();
    dd.resize(n);
    du.assign(n, 0.0);
    du2.assign(n, 0.0);
    dl.assign(n, 0.0);
    swapped.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) dd[i] = d[i] - lambda;
    for (std::size_t i = 0; i + 1 < n; ++i) du[i] = e[i];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double sub = e[i];  // entry (i+1, i)
      if (std::abs(dd[i]) >= std::abs(sub)) {
        if (dd[i] == 0.0) dd[i] = tiny_pivot;
        const double m = sub / dd[i];
        dl[i] = m;
        dd[i + 1] -= m * du[i];
      } else {
        // Swap rows i and i+1.
        swapped[i] = 1;
        const double m = dd[i] / sub;
        dl[i] = m;
        const double old_du = du[i];
        dd[i] = sub;
        du[i] = dd[i + 1];
        dd[i + 1] = old_du - m * dd[i + 1];
        if (i + 2 < n) {
          du2[i] = du[i + 1];
          du[i + 1] = -m * du[i + 1];
        }
      }
    }
    if (dd[n - 1] == 0.0) dd[n - 1] = tiny_pivot;
  }

  void solve(std::vector<double>& x) const {
    const std::size_t n = dd.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (swapped[i]) std::swap(x[i], x[i + 1]);
      x[i + 1] -= dl[i] * x[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x[ii];
      if (ii + 1 < n) v -= du[ii] * x[ii + 1];
      if (ii + 2 < n) v -= du2[ii] * x[ii + 2];
      x[ii] = v / dd[ii];
    }
  }
};

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> eigenvector(std::span<const double> d, std::span<const double> e,
                                double lambda,
                                std::span<const std::vector<double>> orthogonal_to) {
  const std::size_t n = d.size();
  const Bounds b = gershgorin(d, e);
  const double scale = std::max({1.0, std::abs(b.lo), std::abs(b.hi)});
  // Nudge the shift off the exactly-singular point found by bisection.
  const PivotedFactor lu(d, e, lambda + 1e-13 * scale);
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (int iter = 0; iter < 4; ++iter) {
    for (const auto& q : orthogonal_to) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += q[i] * v[i];
      for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
    }
    lu.solve(v);
    const double nv = vec_norm(v);
    if (!(nv > 0.0) || !std::isfinite(nv))
      throw std::runtime_error("tridiag::eigenvector: inverse iteration broke down");
    for (auto& x : v) x /= nv;
  }
  for (const auto& q : orthogonal_to) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += q[i] * v[i];
    for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
  }
  double nv = vec_norm(v);
  for (auto& x : v) x /= nv;
  // Sign convention: largest-magnitude entry positive.
  std::size_t imax = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  if (v[imax] < 0.0)
    for (auto& x : v) x = -x;
  return v;
}

double residual(std::span<const double> d, std::span<const double> e,
                std::span<const double> v, double lambda) {
  const std::size_t n = d.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = (d[i] - lambda) * v[i];
    if (i > 0) r += e[i - 1] * v[i - 1];
    if (i + 1 < n) r += e[i] * v[i + 1];
    s += r * r;
  }
  return std::sqrt(s);
}

}  // namespace softguide::tridiag

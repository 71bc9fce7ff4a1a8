#include "softguide/eigensolve.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>

#include "softguide/errors.hpp"
#include "softguide/parallel.hpp"

namespace softguide {

namespace {

using Eigen::MatrixXd;
using MapMat = Eigen::Map<MatrixXd, 0, Eigen::OuterStride<>>;
using MapConstMat = Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>>;

// Column-major block of vectors.
struct Block {
  std::size_t n = 0;
  int m = 0;
  std::vector<double> data;

  void resize(std::size_t n_, int m_) {
    n = n_;
    m = m_;
    data.assign(n_ * static_cast<std::size_t>(m_), 0.0);
  }
  double* col(int j) { return data.data() + static_cast<std::size_t>(j) * n; }
  const double* col(int j) const { return data.data() + static_cast<std::size_t>(j) * n; }
  std::span<double> cspan(int j) { return {col(j), n}; }
  std::span<const double> cspan(int j) const { return {col(j), n}; }
};

std::ptrdiff_t chunk_count(std::size_t n) {
  return (static_cast<std::ptrdiff_t>(n) + par::reduction_chunk - 1) / par::reduction_chunk;
}

// G = S^T T, deterministic: per-chunk partial products summed in chunk order.
MatrixXd gram(const Block& S, const Block& T) {
  const std::ptrdiff_t nchunk = chunk_count(S.n);
  const int ms = S.m, mt = T.m;
  std::vector<double> partial(static_cast<std::size_t>(nchunk) * ms * mt);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(S.n);
  par::for_each_index(nchunk, [&](std::ptrdiff_t c) {
    const std::ptrdiff_t lo = c * par::reduction_chunk;
    const std::ptrdiff_t len = std::min<std::ptrdiff_t>(par::reduction_chunk, n - lo);
    MapConstMat Sc(S.data.data() + lo, len, ms, Eigen::OuterStride<>(n));
    MapConstMat Tc(T.data.data() + lo, len, mt, Eigen::OuterStride<>(n));
    Eigen::Map<MatrixXd> Gc(partial.data() + static_cast<std::size_t>(c) * ms * mt, ms, mt);
    Gc.noalias() = Sc.transpose() * Tc;
  });
  MatrixXd G = MatrixXd::Zero(ms, mt);
  for (std::ptrdiff_t c = 0; c < nchunk; ++c)
    G += Eigen::Map<MatrixXd>(partial.data() + static_cast<std::size_t>(c) * ms * mt, ms, mt);
  return G;
}

// Out = S * Y; each output row is produced by exactly one chunk.
void combine(const Block& S, const MatrixXd& Y, Block& out) {
  out.resize(S.n, static_cast<int>(Y.cols()));
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(S.n);
  const std::ptrdiff_t nchunk = chunk_count(S.n);
  par::for_each_index(nchunk, [&](std::ptrdiff_t c) {
    const std::ptrdiff_t lo = c * par::reduction_chunk;
    const std::ptrdiff_t len = std::min<std::ptrdiff_t>(par::reduction_chunk, n - lo);
    MapConstMat Sc(S.data.data() + lo, len, S.m, Eigen::OuterStride<>(n));
    MapMat Oc(out.data.data() + lo, len, Y.cols(), Eigen::OuterStride<>(n));
    Oc.noalias() = Sc * Y;
  });
}

void append_cols(Block& dst, const Block& src) {
  const int m0 = dst.m;
  dst.data.resize(dst.n * static_cast<std::size_t>(m0 + src.m));
  dst.m = m0 + src.m;
  for (int j = 0; j < src.m; ++j) par::copy(src.cspan(j), dst.cspan(m0 + j));
}

// Whitening transform from a Gram matrix: columns span the same space,
// directions with Gram eigenvalue below drop_tol * max are discarded.
MatrixXd whitening(const MatrixXd& G, double drop_tol) {
  if (G.rows() == 0) return MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  const auto& ev = es.eigenvalues();
  const double gmax = std::max(ev.maxCoeff(), 0.0);
  int keep = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i] > drop_tol * gmax) ++keep;
  MatrixXd Z(G.rows(), keep);
  int at = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i] > drop_tol * gmax)
      Z.col(at++) = es.eigenvectors().col(i) / std::sqrt(ev[i]);
  return Z;
}

// In-place orthonormalization of a block (optionally transforming a paired
// block by the same coefficients).  Returns the surviving column count.
int orthonormalize(Block& S, Block* paired, double drop_tol) {
  if (S.m == 0) return 0;
  const MatrixXd Z = whitening(gram(S, S), drop_tol);
  Block tmp;
  combine(S, Z, tmp);
  S = std::move(tmp);
  if (paired) {
    combine(*paired, Z, tmp);
    *paired = std::move(tmp);
  }
  return S.m;
}

struct ShiftedApply {
  const SparseSymmetricOperator* A;
  double sigma;
  void operator()(std::span<const double> x, std::span<double> y) const {
    A->apply(x, y);
    par::axpy(-sigma, x, y);
  }
};

// z = p_deg(B) r: the Chebyshev iterative method for B z = r on the interval
// [lo, hi], a fixed polynomial in B, positive on (0, hi], hence an SPD and
// fully deterministic preconditioner.
struct ChebPrecond {
  ShiftedApply B;
  double lo = 1.0, hi = 2.0;
  int deg = 8;

  void apply_column(std::span<const double> b, std::span<double> z,
                    std::vector<double>& r, std::vector<double>& d,
                    std::vector<double>& bd) const {
    const double theta = 0.5 * (hi + lo);
    const double delta = 0.5 * (hi - lo);
    const double sigma1 = theta / delta;
    double rho = 1.0 / sigma1;
    par::fill(z, 0.0);
    par::copy(b, r);
    par::copy(r, d);
    par::scal(1.0 / theta, d);
    for (int it = 0; it < deg; ++it) {
      par::axpy(1.0, d, z);
      B(d, bd);
      par::axpy(-1.0, bd, r);
      const double rho_next = 1.0 / (2.0 * sigma1 - rho);
      // d = rho_next * rho * d + (2 rho_next / delta) * r
      par::scal(rho_next * rho, d);
      par::axpy(2.0 * rho_next / delta, r, d);
      rho = rho_next;
    }
  }
};

SpectralResult finalize(const SparseSymmetricOperator& A, const Block& X,
                        const std::vector<double>& lambda, int k, bool want_vectors,
                        int iterations, std::uint64_t seed) {
  SpectralResult res;
  res.iterations = iterations;
  res.seed = seed;
  res.eigenvalues.assign(lambda.begin(), lambda.begin() + k);
  std::vector<double> work(A.dim);
  for (int j = 0; j < k; ++j) {
    A.apply(X.cspan(j), work);
    par::axpy(-lambda[static_cast<std::size_t>(j)], X.cspan(j), work);
    res.residuals.push_back(par::norm(work));
    if (want_vectors)
      res.vectors.emplace_back(X.col(j), X.col(j) + A.dim);
  }
  const double scale =
      std::max({1.0, std::abs(res.eigenvalues.front()), std::abs(res.eigenvalues.back())});
  res.cluster.assign(static_cast<std::size_t>(k), 0);
  for (int j = 1; j < k; ++j) {
    const bool same =
        res.eigenvalues[j] - res.eigenvalues[j - 1] <= 1e-12 * scale;
    res.cluster[j] = same ? res.cluster[j - 1] : res.cluster[j - 1] + 1;
  }
  return res;
}

}  // namespace

SpectralResult dense_lowest_k(const SparseSymmetricOperator& A, int k) {
  if (A.dim > 4000)
    throw std::invalid_argument("dense_lowest_k: dimension " + std::to_string(A.dim) +
                                " exceeds the dense cap of 4000");
  if (k < 1 || static_cast<std::size_t>(k) >= A.dim)
    throw std::invalid_argument("dense_lowest_k: k out of range");
  const int n = static_cast<int>(A.dim);
  MatrixXd M = MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r)
    for (std::size_t q = A.row_ptr[r]; q < A.row_ptr[r + 1]; ++q)
      M(r, A.col[q]) = A.val[q];
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);

  Block X;
  X.resize(A.dim, k);
  std::vector<double> lambda(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    lambda[static_cast<std::size_t>(j)] = es.eigenvalues()[j];
    for (int i = 0; i < n; ++i) X.col(j)[i] = es.eigenvectors()(i, j);
  }
  return finalize(A, X, lambda, k, true, 0, 0);
}

SpectralResult lowest_k(const SparseSymmetricOperator& A, const EigensolveOptions& opt) {
  const std::size_t n = A.dim;
  if (opt.k < 1 || static_cast<std::size_t>(opt.k) >= n)
    throw std::invalid_argument("lowest_k: k must satisfy 1 <= k < dim");
  const int m_want = opt.k + std::max(0, opt.block_extra);
  if (n <= 4000 && 3 * static_cast<std::size_t>(m_want) + 2 >= n) {
    // Too small for a healthy block iteration; the dense path is exact.
    SpectralResult r = dense_lowest_k(A, opt.k);
    if (!opt.want_vectors) r.vectors.clear();
    r.seed = opt.seed;
    return r;
  }
  const int m = std::max(opt.k, std::min<int>(m_want, static_cast<int>((n - 2) / 3)));

  const double sigma = A.gershgorin_lower() - 1.0;
  const double hi_b = std::max(A.gershgorin_upper() - sigma, 2.0);
  ShiftedApply B{&A, sigma};

  // Seeded start block.
  Block X;
  X.resize(n, m);
  {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : X.data) v = u(rng);
  }
  orthonormalize(X, nullptr, 1e-12);

  Block BX;
  BX.resize(n, m);
  auto apply_block = [&](const Block& src, Block& dst) {
    dst.resize(n, src.m);
    for (int j = 0; j < src.m; ++j) B(src.cspan(j), dst.cspan(j));
  };
  apply_block(X, BX);

  std::vector<double> theta(static_cast<std::size_t>(m), 0.0);
  auto rayleigh_rotate = [&]() {
    MatrixXd H = gram(X, BX);
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
    Block tmp;
    combine(X, es.eigenvectors(), tmp);
    X = std::move(tmp);
    combine(BX, es.eigenvectors(), tmp);
    BX = std::move(tmp);
    for (int j = 0; j < m; ++j) theta[static_cast<std::size_t>(j)] = es.eigenvalues()[j];
  };
  rayleigh_rotate();

  ChebPrecond precond{B, 1.0, hi_b, 8};
  auto tune_precond = [&]() {
    precond.lo = std::clamp(0.5 * theta[0], 1.0, 0.98 * hi_b);
    precond.hi = hi_b;
    if (opt.cheb_degree > 0) {
      precond.deg = opt.cheb_degree;
    } else {
      precond.deg = std::clamp(
          static_cast<int>(std::ceil(0.9 * std::sqrt(precond.hi / precond.lo))), 6, 220);
    }
  };
  tune_precond();

  Block P, BP;  // empty until the second iteration
  Block R, W, BW;
  std::vector<double> scr_r(n), scr_d(n), scr_bd(n);
  std::vector<double> best_residuals;

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    // Residual block R = BX - X diag(theta) and convergence test.
    R.resize(n, m);
    std::vector<double> resnorm(static_cast<std::size_t>(m));
    bool done = true;
    for (int j = 0; j < m; ++j) {
      par::copy(BX.cspan(j), R.cspan(j));
      par::axpy(-theta[static_cast<std::size_t>(j)], X.cspan(j), R.cspan(j));
      resnorm[static_cast<std::size_t>(j)] = par::norm(R.cspan(j));
      if (j < opt.k) {
        const double lam = theta[static_cast<std::size_t>(j)] + sigma;
        if (resnorm[static_cast<std::size_t>(j)] > opt.tol * std::max(1.0, std::abs(lam)))
          done = false;
      }
    }
    best_residuals.assign(resnorm.begin(), resnorm.begin() + opt.k);
    if (done) {
      std::vector<double> lambda(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) lambda[static_cast<std::size_t>(j)] = theta[j] + sigma;
      return finalize(A, X, lambda, opt.k, opt.want_vectors, iter - 1, opt.seed);
    }

    if (iter == 4 || iter == 10 || iter == 22 || iter == 46) tune_precond();

    // Preconditioned residuals, projected off X and orthonormalized.
    W.resize(n, m);
    for (int j = 0; j < m; ++j)
      precond.apply_column(R.cspan(j), W.cspan(j), scr_r, scr_d, scr_bd);
    {
      const MatrixXd C = gram(X, W);
      Block XC;
      combine(X, C, XC);
      for (int j = 0; j < W.m; ++j) par::axpy(-1.0, XC.cspan(j), W.cspan(j));
    }
    if (orthonormalize(W, nullptr, 1e-10) == 0) {
      std::vector<double> lambda(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) lambda[static_cast<std::size_t>(j)] = theta[j] + sigma;
      throw NonConvergenceError("lowest_k: search space collapsed at iteration " +
                                    std::to_string(iter),
                                best_residuals);
    }
    apply_block(W, BW);

    // Basis S = [X | W | P] with the block partition preserved.
    Block S = X, BS = BX;
    append_cols(S, W);
    append_cols(BS, BW);
    if (P.m > 0) {
      append_cols(S, P);
      append_cols(BS, BP);
    }

    MatrixXd G = gram(S, S);
    MatrixXd H = gram(S, BS);
    H = 0.5 * (H + H.transpose()).eval();
    const MatrixXd Z = whitening(G, 1e-10);
    MatrixXd Hw = Z.transpose() * H * Z;
    Hw = 0.5 * (Hw + Hw.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Hw);
    const int msub = static_cast<int>(Hw.rows());
    const int mtake = std::min(m, msub);
    if (mtake < m)
      throw NonConvergenceError("lowest_k: Rayleigh-Ritz basis degenerated at iteration " +
                                    std::to_string(iter),
                                best_residuals);
    MatrixXd C = Z * es.eigenvectors().leftCols(mtake);

    Block Xnew, BXnew;
    combine(S, C, Xnew);
    combine(BS, C, BXnew);

    // Conjugate directions: same Ritz coefficients with the X rows zeroed.
    MatrixXd Cp = C;
    Cp.topRows(m).setZero();
    combine(S, Cp, P);
    combine(BS, Cp, BP);
    orthonormalize(P, &BP, 1e-10);

    X = std::move(Xnew);
    BX = std::move(BXnew);
    for (int j = 0; j < mtake; ++j) theta[static_cast<std::size_t>(j)] = es.eigenvalues()[j];
  }
  throw NonConvergenceError("lowest_k: no convergence within " +
                                std::to_string(opt.max_iter) + " iterations",
                            best_residuals);
}

}  // namespace softguide

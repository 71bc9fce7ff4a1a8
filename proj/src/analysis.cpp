#include "softguide/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "softguide/errors.hpp"

namespace softguide {

namespace {

constexpr double pi = std::numbers::pi;

BcSet outer_bc(Bc b, bool half_domain) {
  BcSet s = BcSet::all(b);
  if (half_domain) s.ylo = Bc::neumann;  // mirror plane at y = 0
  return s;
}

// Distance from p to a lateral window face along direction d (unit).  The
// x = xmax face is deliberately not a candidate: it cuts the channel
// longitudinally, which the Dirichlet/Neumann window pair already brackets;
// counting it here would report zero clearance at the channel ends and blow
// the margin up for every finite tail.
double lateral_exit(double xmin, double ymin, double ymax, Vec2 p, Vec2 d) {
  double t = std::numeric_limits<double>::max();
  if (d.x < 0.0) t = std::min(t, (xmin - p.x) / d.x);
  if (d.y > 0.0)
    t = std::min(t, (ymax - p.y) / d.y);
  else if (d.y < 0.0)
    t = std::min(t, (ymin - p.y) / d.y);
  return std::max(0.0, t);
}

// Least transverse room between the curve and the (full, unmirrored) window.
double transverse_clearance(const Curve& c, const Grid2D& g, bool half_domain) {
  const double ymax = g.ymax;
  const double ymin = half_domain ? -g.ymax : g.ymin;
  const double smax = c.arc_half_length() + c.tail_length();
  double room = std::numeric_limits<double>::max();
  const int nsamp = 257;
  for (int i = 0; i < nsamp; ++i) {
    const double s = -smax + 2.0 * smax * i / (nsamp - 1);
    const Vec2 p = c.point(s);
    if (p.x < g.xmin || p.x > g.xmax || p.y < ymin || p.y > ymax) continue;
    const Vec2 n = c.normal(s);
    room = std::min({room, lateral_exit(g.xmin, ymin, ymax, p, n),
                     lateral_exit(g.xmin, ymin, ymax, p, {-n.x, -n.y})});
  }
  return room;
}

// 3x the 1D Dirichlet/Neumann ground gap of the transverse problem truncated
// at the window clearance: how much the window can displace the channel
// levels, and hence the safety band any count must respect.
double truncation_margin(const Curve& c, const TransverseProfile& p, double room) {
  const bool folded = c.beta() == 0.0;
  const double L = folded ? c.rho() + room : room;
  const double support = folded ? c.rho() + p.a : p.a;
  if (L < support + 4.0 * p.a / 6.0)
    return std::numeric_limits<double>::max();  // window hugs the tube: hopeless
  auto V = [&](double u) {
    return folded ? profile_value(p, u - c.rho()) + profile_value(p, u + c.rho())
                  : profile_value(p, u);
  };
  const double h_max = std::min(p.a / 6.0, 0.14 / std::sqrt(p.depth));
  int n = std::max(2000, static_cast<int>(std::ceil(2.0 * L / h_max)));
  n += n % 2;
  const double ed = ground_even(V, p.depth, L, n).energy;
  const double en = ground_even_neumann_energy(V, p.depth, L, n);
  return 3.0 * std::max(0.0, ed - en);
}

struct BandCount {
  int count = 0;
  std::vector<double> below;
};

// Eigenvalues of A below nu, certified against the exclusion band: any
// eigenvalue within band (+ its residual bound) of nu, or a spectrum cap
// that cannot see past nu, raises InconclusiveError.
BandCount count_below(const SparseSymmetricOperator& A, const GridSpec& spec, double nu,
                      double band) {
  int k = std::min<int>(spec.k0, static_cast<int>(A.dim) - 1);
  for (;;) {
    EigensolveOptions opt;
    opt.k = k;
    opt.tol = spec.tol;
    opt.max_iter = spec.max_iter;
    opt.seed = spec.seed;
    opt.want_vectors = false;
    const SpectralResult r = lowest_k(A, opt);
    for (int i = 0; i < k; ++i) {
      const double slack = band + r.residuals[static_cast<std::size_t>(i)];
      if (r.eigenvalues[static_cast<std::size_t>(i)] > nu - slack &&
          r.eigenvalues[static_cast<std::size_t>(i)] < nu + slack)
        throw InconclusiveError(
            "count_below: eigenvalue " + std::to_string(r.eigenvalues[i]) +
                " lies inside the exclusion band around nu = " + std::to_string(nu),
            nu - slack, nu + slack);
    }
    const double top = r.eigenvalues.back();
    if (top >= nu + band + r.residuals.back()) {
      BandCount out;
      for (int i = 0; i < k; ++i)
        if (r.eigenvalues[static_cast<std::size_t>(i)] <
            nu - band - r.residuals[static_cast<std::size_t>(i)]) {
          ++out.count;
          out.below.push_back(r.eigenvalues[static_cast<std::size_t>(i)]);
        }
      return out;
    }
    if (k >= spec.kmax || k >= static_cast<int>(A.dim) - 1)
      throw InconclusiveError("count_below: " + std::to_string(k) +
                                  " eigenpairs do not reach past nu = " + std::to_string(nu),
                              nu, top);
    k = std::min({2 * k, spec.kmax, static_cast<int>(A.dim) - 1});
  }
}

double auto_pad(const TransverseProfile& p, double binding_level) {
  const double kappa = std::sqrt(std::max(1e-12, -binding_level));
  return 5.0 * std::max(p.a, 1.0 / kappa);
}

}  // namespace

Grid2D make_window(const Curve& c, double a, double pad, double h, bool half_domain) {
  if (!(pad > 0.0) || !(h > 0.0))
    throw std::invalid_argument("make_window: pad and h must be positive");
  pad = std::max(pad, 2.0 * h);
  // The structure reaches a beyond the arc's westmost point (the tube, or
  // the well support, extends that far); pad clears the structure, not the
  // bare curve, exactly as ytop does below.
  const double xmin = (c.arc_center().x - c.arc_radius() - a) - pad;
  const double xmax = c.tail_length() * std::cos(c.beta() / 2.0);
  const double ytop =
      c.rho() + xmax * std::tan(c.beta() / 2.0) + a + pad;
  const int ny2 = std::max(4, static_cast<int>(std::ceil(ytop / h + 0.5)));
  const double hy = ytop / (ny2 - 0.5);

  Grid2D g;
  g.xmin = xmin;
  g.xmax = xmax;
  g.nx = std::max(4, static_cast<int>(std::ceil((xmax - xmin) / h)) + 1);
  if (half_domain) {
    g.ymin = 0.5 * hy;
    g.ymax = ytop;
    g.ny = ny2;
  } else {
    g.ymin = -ytop;
    g.ymax = ytop;
    g.ny = 2 * ny2;
  }
  return g;
}

ThresholdReport essential_threshold(const TransverseProfile& p, double rho, double beta) {
  if (!(rho > 0.0)) throw std::invalid_argument("essential_threshold: rho must be positive");
  if (!(beta >= 0.0 && beta < pi))
    throw std::invalid_argument("essential_threshold: beta must lie in [0, pi)");
  ThresholdReport r;
  r.folded = beta == 0.0;
  if (p.kind == ProfileKind::delta_point) {
    const double alpha = p.depth;
    r.single_well = delta_ground(alpha);
    if (r.folded) {
      r.threshold = double_delta_ground(alpha, rho);
      r.eta = double_delta_center_ratio(alpha, rho);
    } else {
      r.threshold = r.single_well;
      r.eta = std::sqrt(alpha / 2.0);  // sqrt(kappa) of the single delta state
    }
    return r;
  }
  const Converged1D single = converged_single_ground(p);
  r.single_well = single.energy;
  if (r.folded) {
    const Converged1D dbl = converged_double_ground(p, rho);
    r.threshold = dbl.energy;
    r.eta = dbl.eta;
    r.tolerance = dbl.error_estimate + dbl.dn_gap;
    r.dn_gap = dbl.dn_gap;
  } else {
    r.threshold = single.energy;
    r.eta = single.eta;
    r.tolerance = single.error_estimate + single.dn_gap;
    r.dn_gap = single.dn_gap;
  }
  return r;
}

CountReport count_discrete(const Curve& c, const TransverseProfile& p,
                           const GridSpec& spec, double nu, double margin) {
  if (!(nu < 0.0))
    throw std::invalid_argument("count_discrete: counting level nu must be negative");
  if (!(margin >= 0.0)) throw std::invalid_argument("count_discrete: margin must be >= 0");

  const double pad = spec.pad > 0.0 ? spec.pad : auto_pad(p, nu);
  const Grid2D g = make_window(c, p.a, pad, spec.h, spec.half_domain);
  const PotentialField field = sample_potential(c, p, g);

  const double room = transverse_clearance(c, g, spec.half_domain);
  const double band = std::max({margin, 1e-6, truncation_margin(c, p, room)});
  if (!(band < std::abs(nu)))
    throw InconclusiveError("count_discrete: margin swallows the counting level", nu - band,
                            nu + band);

  CountReport rep;
  rep.nu = nu;
  rep.margin = band;
  rep.grid = g;
  const SparseSymmetricOperator an = assemble(field, outer_bc(Bc::neumann, spec.half_domain));
  const BandCount upper = count_below(an, spec, nu, band);
  const SparseSymmetricOperator ad = assemble(field, outer_bc(Bc::dirichlet, spec.half_domain));
  const BandCount lower = count_below(ad, spec, nu, band);
  rep.count_upper = upper.count;
  rep.count_lower = lower.count;
  rep.neumann_below = upper.below;
  rep.dirichlet_below = lower.below;
  if (rep.count_lower > rep.count_upper)
    throw InconclusiveError(
        "count_discrete: Dirichlet count exceeds Neumann count (missed eigenvalue?)", nu,
        nu);
  return rep;
}

Solve2DResult solve_guide(const Curve& c, const TransverseProfile& p,
                          const GridSpec& spec, Bc bc, int k) {
  Solve2DResult out;
  out.threshold = essential_threshold(p, c.rho(), c.beta());
  const double pad = spec.pad > 0.0 ? spec.pad : auto_pad(p, out.threshold.threshold);
  const Grid2D g = make_window(c, p.a, pad, spec.h, spec.half_domain);
  out.field = sample_potential(c, p, g);
  out.op = assemble(out.field, outer_bc(bc, spec.half_domain));

  EigensolveOptions opt;
  opt.k = k;
  opt.tol = spec.tol;
  opt.max_iter = spec.max_iter;
  opt.seed = spec.seed;
  out.spectral = lowest_k(out.op, opt);
  return out;
}

VariationalBound variational_count_bound(const TransverseProfile& p, double rho,
                                         double beta, double nu) {
  if (!(beta > 0.0 && beta < pi))
    throw std::invalid_argument("variational_count_bound: requires 0 < beta < pi");
  if (!(nu < 0.0)) throw std::invalid_argument("variational_count_bound: nu must be negative");
  const double rho_b = rho / std::cos(beta / 2.0);

  VariationalBound vb;
  if (p.kind == ProfileKind::delta_point) {
    vb.eps_fold = double_delta_ground(p.depth, rho_b);
    vb.eta = double_delta_center_ratio(p.depth, rho_b);
  } else {
    const Converged1D d = converged_double_ground(p, rho_b);
    vb.eps_fold = d.energy;
    vb.eta = d.eta;
  }
  if (!(vb.eps_fold < nu))
    throw std::invalid_argument("variational_count_bound: nu lies below the folded level " +
                                std::to_string(vb.eps_fold));

  const double tanb = std::tan(beta / 2.0);
  const double e2 = vb.eta * vb.eta;
  const double l_max = std::min((nu - vb.eps_fold) / (-nu * e2 * tanb), 1e6);
  const int nscan = 20000;
  for (int i = 1; i <= nscan; ++i) {
    const double L = l_max * i / nscan;
    const double mix = e2 * L * tanb;
    const double r = (nu - vb.eps_fold + nu * mix) / (1.0 + mix);
    if (r <= 0.0) continue;
    const int n = static_cast<int>(std::floor(L / pi * std::sqrt(r)));
    if (n > vb.n_nu) {
      vb.n_nu = n;
      vb.best_L = L;
    }
  }
  return vb;
}

namespace {

// Lowest eigenvalue of a symmetric tridiagonal with constant off-diagonal,
// by Sturm-count bisection inside the Gershgorin interval.
double tridiag_lowest(const std::vector<double>& diag, double off) {
  const std::size_t n = diag.size();
  double lo = diag[0], hi = diag[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(off) : 0.0) + (i + 1 < n ? std::abs(off) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  const auto any_below = [&](double t) {
    double q = diag[0] - t;
    if (q < 0.0) return true;
    for (std::size_t i = 1; i < n; ++i) {
      q = diag[i] - t - off * off / (q == 0.0 ? 1e-300 : q);
      if (q < 0.0) return true;
    }
    return false;
  };
  while (hi - lo > 1e-13 * std::max(1.0, std::abs(lo)))
    (any_below(0.5 * (lo + hi)) ? hi : lo) = 0.5 * (lo + hi);
  return 0.5 * (lo + hi);
}

}  // namespace

CriticalResult critical_depth(const Curve& c, TransverseProfile shape, double depth_lo,
                              double depth_hi, double tol, const GridSpec& spec) {
  if (!(depth_lo > 0.0 && depth_hi > depth_lo))
    throw std::invalid_argument("critical_depth: need 0 < depth_lo < depth_hi");
  if (!(tol > 0.0)) throw std::invalid_argument("critical_depth: tol must be positive");

  // One window for every trial depth, sized from the shallow end where the
  // transverse state is widest; with the matrix fixed up to its diagonal,
  // deeper wells lower every eigenvalue, so onset bisection is sound.
  shape.depth = depth_lo;
  const ThresholdReport thr_lo = essential_threshold(shape, c.rho(), c.beta());
  if (!(thr_lo.threshold < 0.0))
    throw BracketError("critical_depth: no transverse binding at depth_lo");
  const double pad = spec.pad > 0.0 ? spec.pad : auto_pad(shape, thr_lo.threshold);
  const Grid2D g = make_window(c, shape.a, pad, spec.h, spec.half_domain);

  // Reference level for "binds": the lowest eigenvalue of the window's own
  // discrete transverse section (same y nodes, same point sampling as
  // sample_potential, same lateral boundary).  The continuum threshold would
  // be useless here: the discrete section level sits O(h^2) away from it,
  // which dwarfs the detection band and turns far-channel lattice modes into
  // phantom bound states.  Against its own section level, a uniform channel
  // is exactly neutral and only bend-localized states can dip below.
  auto section_level = [&](const TransverseProfile& q, Bc bc) {
    std::vector<double> diag(static_cast<std::size_t>(g.ny));
    const double w = 1.0 / (g.hy() * g.hy());
    for (int j = 0; j < g.ny; ++j) {
      const double y = g.y(j);
      diag[static_cast<std::size_t>(j)] =
          2.0 * w - profile_value(q, y - c.rho()) - profile_value(q, y + c.rho());
    }
    if (spec.half_domain)
      diag.front() -= w;  // mirror row, as in the 2D assembly
    else if (bc == Bc::neumann)
      diag.front() -= w;
    if (bc == Bc::neumann) diag.back() -= w;
    return tridiag_lowest(diag, -w);
  };

  CriticalResult res;
  auto exists = [&](double depth, Bc bc) {
    TransverseProfile q = shape;
    q.depth = depth;
    const double section = section_level(q, bc);
    const double band = std::max(1e-6, 1e-5 * std::abs(section));
    const double nu = section - band;
    const PotentialField field = sample_potential(c, q, g);
    const SparseSymmetricOperator a = assemble(field, outer_bc(bc, spec.half_domain));
    EigensolveOptions opt;
    opt.k = 1;
    opt.tol = spec.tol;
    opt.max_iter = spec.max_iter;
    opt.seed = spec.seed;
    opt.want_vectors = false;
    const SpectralResult r = lowest_k(a, opt);
    ++res.evaluations;
    return r.eigenvalues[0] < nu;
  };

  if (exists(depth_lo, Bc::neumann))
    throw BracketError("critical_depth: guide already binds at depth_lo");
  if (!exists(depth_hi, Bc::dirichlet))
    throw BracketError("critical_depth: guide does not bind at depth_hi");

  auto bisect = [&](Bc bc) {
    double lo = depth_lo, hi = depth_hi;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (exists(mid, bc))
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  res.onset_neumann = bisect(Bc::neumann);
  res.onset_dirichlet = bisect(Bc::dirichlet);
  res.band = res.onset_dirichlet - res.onset_neumann;
  res.critical_depth = 0.5 * (res.onset_neumann + res.onset_dirichlet);
  if (std::abs(res.band) > 2.0 * tol)
    throw InconclusiveError(
        "critical_depth: Dirichlet and Neumann onsets disagree beyond resolution",
        res.onset_neumann, res.onset_dirichlet);
  return res;
}

double shape_quadrature_constant(const TransverseProfile& p) {
  if (p.kind == ProfileKind::delta_point)
    throw std::invalid_argument("shape_quadrature_constant: zero-range profile has no shape");
  if (p.kind == ProfileKind::square_well) return 2.0 * p.a / pi;
  // integral_0^1 (1 - t^e)^(1/2) dt = Beta(1/e, 3/2) / e
  const double e = p.exponent;
  const double lb = std::lgamma(1.0 / e) + std::lgamma(1.5) - std::lgamma(1.0 / e + 1.5);
  return (2.0 * p.a / pi) * std::exp(lb) / e;
}

double dimensionless_strength(const TransverseProfile& p) {
  return std::sqrt(p.depth) * shape_quadrature_constant(p);
}

std::vector<double> sgamma_spectrum(const Curve& c, int k) {
  if (k < 1) throw std::invalid_argument("sgamma_spectrum: k must be >= 1");
  const double radius = c.arc_radius();
  const double s0 = c.arc_half_length();
  const double depth = 1.0 / (4.0 * radius * radius);
  const TransverseProfile well = TransverseProfile::square(s0, depth);
  auto cells = [&well](double u, double h) { return profile_cell_average(well, u, h); };

  const Converged1D probe = converge_ground_cells(cells, depth, s0, s0);
  const double L = probe.finest.L;
  const int n = probe.finest.n;

  std::vector<double> out;
  const auto level = [&](int nl) {
    const double h = 2.0 * L / (nl + 1);
    return solve_potential([&cells, h](double u) { return cells(u, h); }, depth, L, nl, k);
  };
  const auto fine = level(n);
  const auto mid = level(n / 2);
  const double h2f = fine[0].grid.h * fine[0].grid.h;
  const double h2m = mid[0].grid.h * mid[0].grid.h;
  for (int j = 0; j < k; ++j) {
    const double ext =
        (fine[static_cast<std::size_t>(j)].energy * h2m -
         mid[static_cast<std::size_t>(j)].energy * h2f) /
        (h2m - h2f);
    const double drift =
        std::abs(ext - fine[static_cast<std::size_t>(j)].energy);
    if (ext < -std::max(1e-10, 3.0 * drift)) out.push_back(ext);
  }
  return out;
}

std::vector<StrongEssRow> strong_ess_check(const TransverseProfile& p, double rho,
                                           const std::vector<double>& lambdas) {
  if (p.kind == ProfileKind::delta_point)
    throw std::invalid_argument("strong_ess_check: zero-range profile not usable");
  if (!(rho > p.a)) throw std::invalid_argument("strong_ess_check: need rho > a");
  const double box = dirichlet_box_ground(p);
  std::vector<StrongEssRow> rows;
  for (double lam : lambdas) {
    if (!(lam >= 0.0))
      throw std::invalid_argument("strong_ess_check: floor depths must be >= 0");
    const TransverseProfile floor_boost = TransverseProfile::square(p.a, lam);
    auto deepened = [&](double u, double h) {
      return profile_cell_average(p, u, h) + profile_cell_average(floor_boost, u, h);
    };
    auto V = [&](double u, double h) { return deepened(u - rho, h) + deepened(u + rho, h); };
    const Converged1D conv = converge_ground_cells(V, p.depth + lam, rho + p.a, p.a);
    rows.push_back({lam, conv.energy, std::abs(conv.energy + lam - box)});
  }
  return rows;
}

SweepBetaResult closing_sweep(const TransverseProfile& p, double rho, double tail,
                              const std::vector<double>& betas, double nu_fraction,
                              const GridSpec& spec) {
  if (!(nu_fraction > 0.0 && nu_fraction < 1.0))
    throw std::invalid_argument("closing_sweep: nu_fraction must lie in (0, 1)");
  const ThresholdReport folded = essential_threshold(p, rho, 0.0);
  SweepBetaResult out;
  out.nu = folded.threshold + nu_fraction * (folded.single_well - folded.threshold);

  for (double beta : betas) {
    const Curve c = build_bookcover(rho, beta, tail);
    GridSpec s = spec;
    s.half_domain = false;  // all parities count
    SweepBetaRow row;
    row.beta = beta;
    row.count = count_discrete(c, p, s, out.nu, 0.0);
    row.variational_n =
        beta > 0.0 ? variational_count_bound(p, rho, beta, out.nu).n_nu : 0;
    out.rows.push_back(std::move(row));
  }

  // Least squares count_lower ~ a + b * (1/beta).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int np = 0;
  for (const auto& row : out.rows) {
    if (!(row.beta > 0.0)) continue;
    const double x = 1.0 / row.beta, y = row.count.count_lower;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++np;
  }
  if (np >= 2 && np * sxx - sx * sx > 0.0)
    out.slope_vs_inv_beta = (np * sxy - sx * sy) / (np * sxx - sx * sx);
  return out;
}

std::vector<StripLevel> dirichlet_strip_refinement(const Curve& c,
                                                   const TransverseProfile& p,
                                                   const std::vector<double>& hs,
                                                   const GridSpec& spec) {
  std::vector<StripLevel> out;
  for (double h : hs) {
    if (!(h > 0.0)) throw std::invalid_argument("dirichlet_strip_refinement: h must be > 0");
    const Grid2D g = make_window(c, p.a, std::max(2.0 * h, 0.1 * p.a), h, spec.half_domain);
    const SparseSymmetricOperator a = assemble_masked_strip(c, p, g, spec.half_domain);
    EigensolveOptions opt;
    opt.k = 1;
    opt.tol = spec.tol;
    opt.max_iter = spec.max_iter;
    opt.seed = spec.seed;
    opt.want_vectors = false;
    const SpectralResult r = lowest_k(a, opt);
    out.push_back({h, r.eigenvalues[0], a.dim});
  }
  return out;
}

}  // namespace softguide

#include "softguide/harness.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "softguide/analysis.hpp"
#include "softguide/errors.hpp"
#include "softguide/gridio.hpp"

namespace softguide::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- utilities

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("error while reading " + p.string());
  return ss.str();
}

void spill(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("error while writing " + p.string());
}

__attribute__((format(printf, 2, 3))) void appendf(std::string& s, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  s += buf;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run fn(0..n-1) on a small thread pool; exceptions are rethrown in row
// order so failures are reproducible regardless of scheduling.
void parallel_rows(int workers, int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  workers = std::clamp(workers, 1, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto drain = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errs[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(drain);
  drain();
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

// ------------------------------------------------------------- json access

void expect_keys(const json& j, const std::string& ctx,
                 std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(ctx + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ValidationError(ctx + ": unknown key '" + it.key() + "'");
  }
}

const json& require(const json& j, const std::string& ctx, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(ctx + ": missing required key '" + key + "'");
  return *it;
}

double num(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_number()) throw ValidationError(ctx + ": '" + key + "' must be a number");
  return v.get<double>();
}

double num_or(const json& j, const std::string& ctx, const char* key, double def) {
  return j.contains(key) ? num(j, ctx, key) : def;
}

int integer(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_number_integer()) throw ValidationError(ctx + ": '" + key + "' must be an integer");
  return v.get<int>();
}

int integer_or(const json& j, const std::string& ctx, const char* key, int def) {
  return j.contains(key) ? integer(j, ctx, key) : def;
}

bool flag_or(const json& j, const std::string& ctx, const char* key, bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ValidationError(ctx + ": '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string str(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_string()) throw ValidationError(ctx + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

std::string str_or(const json& j, const std::string& ctx, const char* key,
                   const std::string& def) {
  return j.contains(key) ? str(j, ctx, key) : def;
}

std::vector<double> num_list(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_array() || v.empty())
    throw ValidationError(ctx + ": '" + key + "' must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number())
      throw ValidationError(ctx + ": '" + key + "' must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// Scalar broadcast or per-row array of matching length.
std::vector<double> broadcast(const json& j, const std::string& ctx, const char* key,
                              std::size_t n) {
  const json& v = require(j, ctx, key);
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  auto list = num_list(j, ctx, key);
  if (list.size() != n)
    throw ValidationError(ctx + ": '" + key + "' must be a scalar or match the row count");
  return list;
}

// ----------------------------------------------------------- domain parsing

TransverseProfile parse_profile(const json& j, const std::string& ctx) {
  const std::string kind = str(j, ctx, "kind");
  if (kind == "poly") {
    expect_keys(j, ctx, {"kind", "exponent", "a", "depth"});
    return TransverseProfile::poly(integer(j, ctx, "exponent"), num(j, ctx, "a"),
                                   num(j, ctx, "depth"));
  }
  if (kind == "square") {
    expect_keys(j, ctx, {"kind", "a", "depth"});
    return TransverseProfile::square(num(j, ctx, "a"), num(j, ctx, "depth"));
  }
  if (kind == "delta") {
    expect_keys(j, ctx, {"kind", "strength"});
    return TransverseProfile::delta(num(j, ctx, "strength"));
  }
  throw ValidationError(ctx + ": kind must be one of poly, square, delta");
}

GridSpec parse_grid(const json& cfg, const std::string& ctx) {
  GridSpec s;
  if (!cfg.contains("grid")) return s;
  const json& g = cfg.at("grid");
  const std::string gctx = ctx + ".grid";
  expect_keys(g, gctx, {"h", "pad", "tol", "max_iter", "seed", "k0", "kmax", "half_domain"});
  s.h = num_or(g, gctx, "h", s.h);
  s.pad = num_or(g, gctx, "pad", s.pad);
  s.tol = num_or(g, gctx, "tol", s.tol);
  s.max_iter = integer_or(g, gctx, "max_iter", s.max_iter);
  if (g.contains("seed")) s.seed = g.at("seed").get<std::uint64_t>();
  s.k0 = integer_or(g, gctx, "k0", s.k0);
  s.kmax = integer_or(g, gctx, "kmax", s.kmax);
  s.half_domain = flag_or(g, gctx, "half_domain", s.half_domain);
  return s;
}

Bc parse_bc(const std::string& s, const std::string& ctx) {
  if (s == "dirichlet") return Bc::dirichlet;
  if (s == "neumann") return Bc::neumann;
  throw ValidationError(ctx + ": bc must be 'dirichlet' or 'neumann'");
}

// ------------------------------------------------------------------ runners

struct Stage {
  fs::path dir;
  std::vector<std::string> files;

  void text(const std::string& name, const std::string& content) {
    spill(dir / name, content);
    files.push_back(name);
  }
};

json run_solve1d(const json& cfg, Stage& st, int) {
  const std::string ctx = "solve1d";
  expect_keys(cfg, ctx, {"experiment", "out", "profile", "mode", "rho"});
  const TransverseProfile p = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const std::string mode = str(cfg, ctx, "mode");
  double energy, eta, err = 0.0, dn = 0.0, order = 0.0;
  if (mode == "single") {
    if (p.kind == ProfileKind::delta_point) {
      energy = delta_ground(p.depth);
      eta = std::sqrt(p.depth / 2.0);
    } else {
      const Converged1D c = converged_single_ground(p);
      energy = c.energy, eta = c.eta, err = c.error_estimate, dn = c.dn_gap, order = c.order;
    }
  } else if (mode == "double") {
    const double rho = num(cfg, ctx, "rho");
    if (p.kind == ProfileKind::delta_point) {
      energy = double_delta_ground(p.depth, rho);
      eta = double_delta_center_ratio(p.depth, rho);
    } else {
      const Converged1D c = converged_double_ground(p, rho);
      energy = c.energy, eta = c.eta, err = c.error_estimate, dn = c.dn_gap, order = c.order;
    }
  } else {
    throw ValidationError(ctx + ": mode must be 'single' or 'double'");
  }
  std::string csv = "energy,eta,error_estimate,dn_gap,order\n";
  appendf(csv, "%.17g,%.17g,%.17g,%.17g,%.17g\n", energy, eta, err, dn, order);
  st.text("transverse.csv", csv);
  return json{{"mode", mode}, {"energy", energy}};
}

json run_solve2d(const json& cfg, Stage& st, int) {
  const std::string ctx = "solve2d";
  expect_keys(cfg, ctx,
              {"experiment", "out", "profile", "rho", "beta", "tail", "k", "bc", "grid",
               "dump_ground"});
  const TransverseProfile p = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const Curve c =
      build_bookcover(num(cfg, ctx, "rho"), num(cfg, ctx, "beta"), num(cfg, ctx, "tail"));
  const GridSpec spec = parse_grid(cfg, ctx);
  const int k = integer_or(cfg, ctx, "k", 4);
  const Bc bc = parse_bc(str_or(cfg, ctx, "bc", "dirichlet"), ctx);

  const Solve2DResult res = solve_guide(c, p, spec, bc, k);

  std::string ev = "index,eigenvalue,residual,cluster\n";
  for (std::size_t i = 0; i < res.spectral.eigenvalues.size(); ++i)
    appendf(ev, "%zu,%.17g,%.17g,%d\n", i, res.spectral.eigenvalues[i],
            res.spectral.residuals[i], res.spectral.cluster[i]);
  st.text("eigenvalues.csv", ev);

  std::string th = "threshold,tolerance,dn_gap,eta,single_well,folded\n";
  appendf(th, "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", res.threshold.threshold,
          res.threshold.tolerance, res.threshold.dn_gap, res.threshold.eta,
          res.threshold.single_well, res.threshold.folded ? 1 : 0);
  st.text("threshold.csv", th);

  if (flag_or(cfg, ctx, "dump_ground", false) && !res.spectral.vectors.empty()) {
    const std::vector<double> field = scatter_to_grid(res.op, res.spectral.vectors[0]);
    write_sgw1(st.dir / "groundstate.sgw", res.op.grid, field);
    st.files.push_back("groundstate.sgw");
    write_field_csv(st.dir / "groundstate.csv", res.op.grid, field);
    st.files.push_back("groundstate.csv");
  }
  return json{{"iterations", res.spectral.iterations},
              {"dim", res.op.dim},
              {"nx", res.op.grid.nx},
              {"ny", res.op.grid.ny}};
}

json run_critical(const json& cfg, Stage& st, int workers) {
  const std::string ctx = "critical";
  expect_keys(cfg, ctx,
              {"experiment", "out", "profile", "rho", "beta", "tail", "widths", "depth_lo",
               "depth_hi", "tol_depth", "grid"});
  const TransverseProfile base = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const double rho = num(cfg, ctx, "rho");
  const Curve c = build_bookcover(rho, num(cfg, ctx, "beta"), num(cfg, ctx, "tail"));
  const GridSpec spec = parse_grid(cfg, ctx);
  const double tol = num(cfg, ctx, "tol_depth");
  std::vector<double> widths =
      cfg.contains("widths") ? num_list(cfg, ctx, "widths") : std::vector<double>{base.a};
  const std::vector<double> lo = broadcast(cfg, ctx, "depth_lo", widths.size());
  const std::vector<double> hi = broadcast(cfg, ctx, "depth_hi", widths.size());

  std::vector<CriticalResult> rows(widths.size());
  parallel_rows(workers, static_cast<int>(widths.size()), [&](int i) {
    TransverseProfile shape = base;
    shape.a = widths[static_cast<std::size_t>(i)];
    rows[static_cast<std::size_t>(i)] = critical_depth(
        c, shape, lo[static_cast<std::size_t>(i)], hi[static_cast<std::size_t>(i)], tol, spec);
  });

  std::string csv =
      "a,a_over_rho,critical_depth,onset_neumann,onset_dirichlet,band,evaluations,strength\n";
  int total_evals = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    TransverseProfile shape = base;
    shape.a = widths[i];
    shape.depth = rows[i].critical_depth;
    appendf(csv, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n", widths[i], widths[i] / rho,
            rows[i].critical_depth, rows[i].onset_neumann, rows[i].onset_dirichlet,
            rows[i].band, rows[i].evaluations, dimensionless_strength(shape));
    total_evals += rows[i].evaluations;
  }
  st.text("critical_sweep.csv", csv);
  return json{{"total_evaluations", total_evals}};
}

json run_sweep_beta(const json& cfg, Stage& st, int workers) {
  const std::string ctx = "sweep_beta";
  expect_keys(cfg, ctx,
              {"experiment", "out", "profile", "rho", "tail", "betas", "nu_fraction", "grid"});
  const TransverseProfile p = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const double rho = num(cfg, ctx, "rho");
  const double tail = num(cfg, ctx, "tail");
  const double frac = num_or(cfg, ctx, "nu_fraction", 0.5);
  if (!(frac > 0.0 && frac < 1.0))
    throw ValidationError(ctx + ": nu_fraction must lie in (0, 1)");
  const std::vector<double> betas = num_list(cfg, ctx, "betas");
  GridSpec spec = parse_grid(cfg, ctx);
  spec.half_domain = false;  // counting needs both parities in y

  const ThresholdReport folded = essential_threshold(p, rho, 0.0);
  const double nu = folded.threshold + frac * (folded.single_well - folded.threshold);

  std::vector<CountReport> counts(betas.size());
  std::vector<int> varn(betas.size(), 0);
  parallel_rows(workers, static_cast<int>(betas.size()), [&](int i) {
    const auto b = betas[static_cast<std::size_t>(i)];
    const Curve c = build_bookcover(rho, b, tail);
    counts[static_cast<std::size_t>(i)] = count_discrete(c, p, spec, nu, 0.0);
    if (b > 0.0)
      varn[static_cast<std::size_t>(i)] = variational_count_bound(p, rho, b, nu).n_nu;
  });

  std::string csv = "beta,nu,margin,count_lower,count_upper,variational_n\n";
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int np = 0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    appendf(csv, "%.17g,%.17g,%.17g,%d,%d,%d\n", betas[i], nu, counts[i].margin,
            counts[i].count_lower, counts[i].count_upper, varn[i]);
    if (betas[i] > 0.0) {
      const double x = 1.0 / betas[i], y = counts[i].count_lower;
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++np;
    }
  }
  st.text("beta_sweep.csv", csv);

  double slope = 0.0;
  if (np >= 2 && np * sxx - sx * sx > 0.0) slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
  std::string sum = "nu,eps_fold,eps_single,slope_vs_inv_beta\n";
  appendf(sum, "%.17g,%.17g,%.17g,%.17g\n", nu, folded.threshold, folded.single_well, slope);
  st.text("summary.csv", sum);
  return json{{"nu", nu}, {"slope_vs_inv_beta", slope}};
}

json run_sweep_width(const json& cfg, Stage& st, int workers) {
  const std::string ctx = "sweep_width";
  expect_keys(cfg, ctx,
              {"experiment", "out", "profile", "rho", "beta", "tail", "widths", "k", "bc",
               "grid"});
  const TransverseProfile base = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const Curve c =
      build_bookcover(num(cfg, ctx, "rho"), num(cfg, ctx, "beta"), num(cfg, ctx, "tail"));
  const GridSpec spec = parse_grid(cfg, ctx);
  const int k = integer_or(cfg, ctx, "k", 1);
  const Bc bc = parse_bc(str_or(cfg, ctx, "bc", "dirichlet"), ctx);
  const std::vector<double> widths = num_list(cfg, ctx, "widths");

  struct Row {
    double lowest, threshold, strength;
  };
  std::vector<Row> rows(widths.size());
  parallel_rows(workers, static_cast<int>(widths.size()), [&](int i) {
    TransverseProfile q = base;
    q.a = widths[static_cast<std::size_t>(i)];
    const Solve2DResult r = solve_guide(c, q, spec, bc, k);
    rows[static_cast<std::size_t>(i)] = {r.spectral.eigenvalues[0], r.threshold.threshold,
                                         dimensionless_strength(q)};
  });

  std::string csv = "a,strength,lowest,threshold,binding\n";
  for (std::size_t i = 0; i < widths.size(); ++i)
    appendf(csv, "%.17g,%.17g,%.17g,%.17g,%.17g\n", widths[i], rows[i].strength,
            rows[i].lowest, rows[i].threshold, rows[i].threshold - rows[i].lowest);
  st.text("width_sweep.csv", csv);
  return json::object();
}

json run_strong_ess(const json& cfg, Stage& st, int) {
  const std::string ctx = "strong_ess";
  expect_keys(cfg, ctx, {"experiment", "out", "profile", "rho", "lambdas"});
  const TransverseProfile p = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const double rho = num(cfg, ctx, "rho");
  const auto rows = strong_ess_check(p, rho, num_list(cfg, ctx, "lambdas"));
  std::string csv = "lambda,threshold,delta\n";
  for (const auto& r : rows)
    appendf(csv, "%.17g,%.17g,%.17g\n", r.lambda, r.threshold, r.delta);
  st.text("strong_ess.csv", csv);
  return json{{"box_level", dirichlet_box_ground(p)}};
}

json run_dirichlet_strip(const json& cfg, Stage& st, int) {
  const std::string ctx = "dirichlet_strip";
  expect_keys(cfg, ctx, {"experiment", "out", "profile", "rho", "beta", "tail", "hs", "grid"});
  const TransverseProfile p = parse_profile(require(cfg, ctx, "profile"), ctx + ".profile");
  const Curve c =
      build_bookcover(num(cfg, ctx, "rho"), num(cfg, ctx, "beta"), num(cfg, ctx, "tail"));
  const GridSpec spec = parse_grid(cfg, ctx);
  const auto rows = dirichlet_strip_refinement(c, p, num_list(cfg, ctx, "hs"), spec);
  std::string csv = "h,lowest,dim\n";
  for (const auto& r : rows) appendf(csv, "%.17g,%.17g,%zu\n", r.h, r.lowest, r.dim);
  st.text("refinement.csv", csv);
  const double ref = std::pow(std::numbers::pi / (2.0 * p.a), 2.0);
  return json{{"hard_strip_reference", ref}};
}

json run_sgamma(const json& cfg, Stage& st, int) {
  const std::string ctx = "sgamma";
  expect_keys(cfg, ctx, {"experiment", "out", "rho", "beta", "tail", "k"});
  const Curve c = build_bookcover(num(cfg, ctx, "rho"), num(cfg, ctx, "beta"),
                                  num_or(cfg, ctx, "tail", 1.0));
  const auto vals = sgamma_spectrum(c, integer_or(cfg, ctx, "k", 8));
  std::string csv = "index,eigenvalue\n";
  for (std::size_t i = 0; i < vals.size(); ++i) appendf(csv, "%zu,%.17g\n", i, vals[i]);
  st.text("sgamma.csv", csv);
  return json{{"negative_count", vals.size()}};
}

json dispatch(const std::string& name, const json& cfg, Stage& st, int workers) {
  if (name == "solve1d") return run_solve1d(cfg, st, workers);
  if (name == "solve2d") return run_solve2d(cfg, st, workers);
  if (name == "critical") return run_critical(cfg, st, workers);
  if (name == "sweep_beta") return run_sweep_beta(cfg, st, workers);
  if (name == "sweep_width") return run_sweep_width(cfg, st, workers);
  if (name == "strong_ess") return run_strong_ess(cfg, st, workers);
  if (name == "dirichlet_strip") return run_dirichlet_strip(cfg, st, workers);
  if (name == "sgamma") return run_sgamma(cfg, st, workers);
  throw ValidationError("unknown experiment '" + name + "'");
}

}  // namespace

// ------------------------------------------------------------------ public

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "solve1d",    "solve2d",    "critical",        "sweep_beta",
      "sweep_width", "strong_ess", "dirichlet_strip", "sgamma"};
  return names;
}

nlohmann::json load_config(const std::string& path) {
  const std::string bytes = slurp(path);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config parse error in ") + path + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config " + path + " must be a JSON object");
  return j;
}

std::string canonical_config(const nlohmann::json& config) {
  json j = config;
  j.erase("out");  // relocating output must not change the result key
  return j.dump();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hex[md[i] >> 4];
    out[2 * i + 1] = hex[md[i] & 0xf];
  }
  return out;
}

RunResult run_experiment(const std::string& experiment, const nlohmann::json& config,
                         const RunOptions& opt) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end())
    throw ValidationError("unknown experiment '" + experiment + "'");
  if (!config.is_object()) throw ValidationError("config must be a JSON object");
  const std::string declared = str(config, "config", "experiment");
  if (declared != experiment)
    throw ValidationError("config experiment '" + declared + "' does not match '" +
                          experiment + "'");

  const std::string canon = canonical_config(config);
  const std::string hash = sha256_hex(canon);
  const fs::path out_root = opt.out_root;
  const fs::path run_dir = out_root / hash.substr(0, 16);
  const char* env = std::getenv("SOFTGUIDE_CACHE_DIR");
  const fs::path cache_root = (env && *env) ? fs::path(env) : out_root / ".cache";
  const fs::path entry = cache_root / hash;
  const std::string pid = std::to_string(::getpid());

  RunResult rr;
  rr.config_hash = hash;
  rr.run_dir = run_dir.string();

  bool have_entry = false;
  if (!opt.force && fs::exists(entry / "record.json")) {
    if (slurp(entry / "config.json") != canon)
      throw IoError("cache entry " + entry.string() + " does not match its key");
    have_entry = true;
    rr.cache_hit = true;
  }

  if (!have_entry) {
    fs::create_directories(cache_root);
    const fs::path stage = cache_root / (hash + ".stage-" + pid);
    fs::remove_all(stage);
    fs::create_directories(stage);
    Stage st{stage, {}};
    json diag;
    try {
      diag = dispatch(experiment, config, st, opt.workers);
      spill(stage / "config.json", canon);
      json rec{{"config_hash", hash},          {"experiment", experiment},
               {"created_utc", utc_now()},     {"version", "0.1.0"},
               {"files", st.files},            {"diagnostics", diag}};
      spill(stage / "record.json", rec.dump(2) + "\n");
    } catch (...) {
      std::error_code ignore;
      fs::remove_all(stage, ignore);
      throw;
    }
    if (opt.force) {
      std::error_code ignore;
      fs::remove_all(entry, ignore);
    }
    std::error_code ec;
    fs::rename(stage, entry, ec);
    if (ec) {
      const bool raced = fs::exists(entry / "record.json");
      std::error_code ignore;
      fs::remove_all(stage, ignore);
      if (!raced)
        throw IoError("cannot publish cache entry " + entry.string() + ": " + ec.message());
    }
  }

  const json rec = json::parse(slurp(entry / "record.json"));
  rr.files = rec.at("files").get<std::vector<std::string>>();

  bool materialized = false;
  if (!opt.force && fs::exists(run_dir / "record.json")) {
    const json prev = json::parse(slurp(run_dir / "record.json"));
    if (prev.at("config_hash").get<std::string>() != hash)
      throw IoError("run directory " + run_dir.string() + " holds a different config");
    materialized = true;
  }
  if (!materialized) {
    fs::create_directories(out_root);
    const fs::path rstage = out_root / ("." + hash.substr(0, 16) + ".stage-" + pid);
    fs::remove_all(rstage);
    fs::create_directories(rstage);
    for (const std::string& f : rr.files)
      fs::copy_file(entry / f, rstage / f, fs::copy_options::overwrite_existing);
    fs::copy_file(entry / "config.json", rstage / "config.json",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(entry / "record.json", rstage / "record.json",
                  fs::copy_options::overwrite_existing);
    if (opt.force) {
      std::error_code ignore;
      fs::remove_all(run_dir, ignore);
    }
    std::error_code ec;
    fs::rename(rstage, run_dir, ec);
    if (ec) {
      const bool raced = fs::exists(run_dir / "record.json");
      std::error_code ignore;
      fs::remove_all(rstage, ignore);
      if (!raced)
        throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());
    }
  }
  return rr;
}

}  // namespace softguide::harness

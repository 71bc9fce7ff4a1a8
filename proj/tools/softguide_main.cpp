// Command-line front end: one subcommand per experiment, each driven by a
// JSON config.  Exit codes: 0 success, 2 invalid config or arguments,
// 3 eigensolver non-convergence, 4 bracket/inconclusive verdicts, 5 I/O.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "softguide/errors.hpp"
#include "softguide/harness.hpp"

namespace {

int run(const std::string& experiment, const std::string& config_path,
        const std::string& out_flag, bool force, int workers) {
  const nlohmann::json cfg = softguide::harness::load_config(config_path);
  softguide::harness::RunOptions opt;
  if (!out_flag.empty())
    opt.out_root = out_flag;
  else if (cfg.contains("out")) {
    if (!cfg.at("out").is_string())
      throw softguide::ValidationError("config key 'out' must be a string");
    opt.out_root = cfg.at("out").get<std::string>();
  }
  opt.force = force;
  opt.workers = workers;

  const auto rr = softguide::harness::run_experiment(experiment, cfg, opt);
  std::printf("%s %s\n", rr.cache_hit ? "cached" : "computed", rr.run_dir.c_str());
  std::printf("config %s\n", rr.config_hash.c_str());
  for (const auto& f : rr.files) std::printf("  %s\n", f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softguide: discrete spectra of soft bent waveguides"};
  app.require_subcommand(1);

  std::string config_path, out_flag;
  bool force = false;
  int workers = 1;
  for (const auto& name : softguide::harness::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run a '" + name + "' experiment config");
    sub->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_flag, "output root (overrides the config's 'out')");
    sub->add_flag("--force", force, "recompute even if a cached result exists");
    sub->add_option("--workers", workers, "threads for row-parallel sweeps")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    return run(experiment, config_path, out_flag, force, workers);
  } catch (const softguide::NonConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const softguide::BracketError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const softguide::InconclusiveError& e) {
    std::fprintf(stderr, "inconclusive: %s\n", e.what());
    return 4;
  } catch (const softguide::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  } catch (const softguide::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const softguide::ResolutionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const softguide::EmptyDomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

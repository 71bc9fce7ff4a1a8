#pragma once

// Config-driven experiment runner with content-addressed caching.
//
// A run is keyed by the SHA-256 of its canonical config (sorted keys, with
// the non-physical "out" key stripped), so editing any physical or numeric
// field changes the key while relocating the output does not.  Results are
// computed once into a cache entry and materialized into
// <out>/<first 16 hash chars>/ by atomic directory renames; a later run
// with the same config is a byte-identical cache hit.

#include <string>
#include <vector>

#include "json.hpp"

namespace softguide::harness {

struct RunOptions {
  std::string out_root = "runs";
  bool force = false;  // recompute even when a cache entry exists
  int workers = 1;     // row-level thread pool width for sweep experiments
};

struct RunResult {
  std::string run_dir;
  std::string config_hash;  // full SHA-256 hex
  bool cache_hit = false;
  std::vector<std::string> files;  // result files inside run_dir
};

// Names of the supported experiments (CLI subcommands).
const std::vector<std::string>& experiment_names();

// Parse a JSON config file; throws IoError / ValidationError.
nlohmann::json load_config(const std::string& path);

// Canonical serialization used for hashing: sorted keys, "out" removed.
std::string canonical_config(const nlohmann::json& config);

std::string sha256_hex(const std::string& bytes);

// Validate the config against the experiment's schema, execute it (or hit
// the cache), and materialize the run directory.  The config's "experiment"
// field must equal the given name.
RunResult run_experiment(const std::string& experiment, const nlohmann::json& config,
                         const RunOptions& opt);

}  // namespace softguide::harness

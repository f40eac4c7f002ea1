#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uscatter/dynamics.hpp"
#include "uscatter/entropy.hpp"
#include "uscatter/kernel.hpp"
#include "uscatter/rng.hpp"
#include "uscatter/spectral.hpp"

namespace uscatter {

/// Flat `section.key = value` configuration. Blank lines and lines starting
/// with '#' are ignored; duplicate or unknown keys are errors.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& base_dir = ".");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;

  /// Resolves a path relative to the config file's directory.
  std::string resolve_path(const std::string& path) const;

  /// FNV-1a 64 over the sorted `key=value` lines.
  std::uint64_t hash() const noexcept;
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string base_dir_ = ".";
};

/// Initial datum description shared by `initial.*` and `stability.*` keys.
struct InitialSpec {
  std::string type = "indicator";  // indicator | steady_perturbation | random_positive | random_signed | csv
  long long cell = 0;
  double mass = 1.0;
  double amplitude = 0.5;
  std::string path;
};

/// Materialized experiment: everything a subcommand needs.
struct Experiment {
  Config config;
  Grid grid;
  KernelSpec kernel;
  KMode k_mode = KMode::ColumnSum;
  std::optional<LatticeFunction> analytic_k;
  TimeDependentGenerator generator;  // base operator + modulation
  IntegratorSpec integrator;
  InitialSpec initial;
  InitialSpec second;
  std::uint64_t seed = 0;
  double t_end = 10.0;
  int sample_every = 1;
  std::vector<int> rescale_levels;
  double fit_start = 0.0;
  double fit_end = -1.0;  // < 0: t_end
  double decay_floor = 1e-12;

  static Experiment from_config(const Config& config, std::size_t max_cells = kDefaultMaxCells);

  /// Steady pair of the base generator (the modulation does not move it).
  SteadyPair steady_pair() const;
  LatticeFunction initial_datum(const InitialSpec& spec, std::uint64_t tag) const;
  LatticeFunction n0() const { return initial_datum(initial, 1); }
  LatticeFunction v0() const { return initial_datum(second, 2); }

  /// `# uscatter p=.. n=.. M=.. m=.. k_mode=.. config_hash=..` line.
  std::string provenance() const;
};

/// Parses a lattice-function source: `uniform`, `constant:c`, `random`,
/// `values:a,b,...`, or `csv:path`.
LatticeFunction lattice_source(const std::string& source, const Grid& grid, SplitMix64&& rng,
                               const Config& config);

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAssertion = 2;

/// Runs one subcommand (simulate, steady, alpha, decay, rescale, stability,
/// check), writing CSV files into `out_dir`. Returns the process exit code;
/// error messages go to `err`, a short summary to `out`.
int run_experiment(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                   std::ostream& out, std::ostream& err);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Max cell count from USCATTER_MAX_CELLS, or the default.
std::size_t max_cells_from_env();

}  // namespace uscatter

#include "uscatter/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "uscatter/error.hpp"

namespace uscatter {

namespace {

namespace fs = std::filesystem;

// Stream tags for SplitMix64::stream.
constexpr std::uint64_t kTagKernelTable = 11;
constexpr std::uint64_t kTagKernelWeight = 12;
constexpr std::uint64_t kTagKernelSteady = 13;
constexpr std::uint64_t kTagAnalyticK = 14;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "grid.p", "grid.n", "grid.M", "grid.m",
      "kernel.type", "kernel.value", "kernel.profile", "kernel.scale", "kernel.exponent", "kernel.radius",
      "kernel.length", "kernel.diagonal", "kernel.weight", "kernel.steady", "kernel.table", "kernel.csv",
      "kernel.modulation", "kernel.modulation_rate", "kernel.modulation_amplitude",
      "kernel.modulation_frequency",
      "generator.k_mode", "generator.analytic_k",
      "initial.type", "initial.cell", "initial.mass", "initial.amplitude", "initial.path",
      "stability.type", "stability.cell", "stability.mass", "stability.amplitude", "stability.path",
      "integrator.method", "integrator.dt", "integrator.picard_iterations", "integrator.expm_tolerance",
      "run.t_end", "run.sample_every", "run.seed", "run.rescale_levels", "run.fit_start", "run.fit_end",
      "run.decay_floor",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v))
    throw Error(ErrorCode::ConfigParse, what + ": '" + text + "' is not a finite number");
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw Error(ErrorCode::ConfigParse, what + ": '" + text + "' is not an integer");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!trim(item).empty()) parts.push_back(trim(item));
  return parts;
}

std::vector<double> read_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    for (const auto& part : split(line, ',')) values.push_back(parse_double(part, path));
  }
  return values;
}

void normalize_integral(LatticeFunction& f, double target) {
  const double total = integrate(f.grid(), f);
  if (!(total > 0.0)) throw Error(ErrorCode::ConfigParse, "cannot normalize a function with nonpositive integral");
  f *= target / total;
}

Matrix table_source(const std::string& source, const Grid& grid, SplitMix64 rng, const Config& config,
                    bool symmetric) {
  const std::size_t n = grid.cell_count();
  Matrix m(n, n);
  if (source == "ones") {
    m = Matrix(n, n, 1.0);
  } else if (source == "random") {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = symmetric ? i : 0; j < n; ++j) {
        const double v = rng.uniform(0.1, 1.0);
        m(i, j) = v;
        if (symmetric) m(j, i) = v;
      }
  } else if (source.rfind("csv:", 0) == 0) {
    m = std::get<kernels::Table>(load_kernel_table_csv(config.resolve_path(source.substr(4)), grid).variant())
            .entries;
  } else {
    throw Error(ErrorCode::ConfigParse, "kernel.table: unknown source '" + source + "'");
  }
  return m;
}

std::function<double(double)> modulation_from(const Config& c) {
  const std::string kind = c.get("kernel.modulation", "none");
  if (kind == "exp_decay") {
    const double rate = c.get_double("kernel.modulation_rate", 1.0);
    return [rate](double t) { return std::exp(-rate * t); };
  }
  if (kind == "periodic") {
    const double a = c.get_double("kernel.modulation_amplitude", 0.5);
    const double w = c.get_double("kernel.modulation_frequency", 1.0);
    if (std::abs(a) > 1.0) throw Error(ErrorCode::ConfigParse, "kernel.modulation_amplitude must be in [-1, 1]");
    return [a, w](double t) { return 1.0 + a * std::sin(w * t); };
  }
  if (kind != "none") throw Error(ErrorCode::ConfigParse, "kernel.modulation: unknown '" + kind + "'");
  return {};
}

KernelSpec kernel_from(const Config& c, const Grid& grid, std::uint64_t seed) {
  const std::string type = c.get("kernel.type", "constant");
  auto base = [&]() -> KernelSpec {
    if (type == "constant") return KernelSpec::constant(c.get_double("kernel.value", 1.0));
    if (type == "radial") {
      const std::string profile = c.get("kernel.profile", "indicator");
      const double scale = c.get_double("kernel.scale", 1.0);
      std::function<double(double)> fn;
      if (profile == "power") fn = power_profile(scale, c.get_double("kernel.exponent", 1.0));
      else if (profile == "indicator") fn = indicator_profile(scale, c.get_double("kernel.radius", 1.0));
      else if (profile == "exponential") fn = exponential_profile(scale, c.get_double("kernel.length", 1.0));
      else throw Error(ErrorCode::ConfigParse, "kernel.profile: unknown '" + profile + "'");
      const std::string diag = c.get("kernel.diagonal", "0");
      std::optional<double> diagonal;
      if (diag != "evaluate") diagonal = parse_double(diag, "kernel.diagonal");
      return KernelSpec::radial(fn, diagonal, profile);
    }
    if (type == "table") {
      const std::string src = c.has("kernel.csv") ? "csv:" + c.get("kernel.csv", "") : c.get("kernel.table", "random");
      return KernelSpec::table(table_source(src, grid, SplitMix64::stream(seed, kTagKernelTable), c, false));
    }
    LatticeFunction steady =
        lattice_source(c.get("kernel.steady", "uniform"), grid, SplitMix64::stream(seed, kTagKernelSteady), c);
    normalize_integral(steady, 1.0);
    if (type == "projection") {
      LatticeFunction weight =
          lattice_source(c.get("kernel.weight", "uniform"), grid, SplitMix64::stream(seed, kTagKernelWeight), c);
      weight *= 1.0 / integrate_product(weight, steady);
      return KernelSpec::projection(std::move(weight), std::move(steady), c.get_double("kernel.scale", 1.0));
    }
    if (type == "symmetric" || type == "detailed_balance") {
      Matrix table = table_source(c.get("kernel.table", "ones"), grid,
                                  SplitMix64::stream(seed, kTagKernelTable), c, true);
      return type == "symmetric" ? KernelSpec::symmetric(std::move(table), std::move(steady))
                                 : KernelSpec::detailed_balance(std::move(table), std::move(steady));
    }
    throw Error(ErrorCode::ConfigParse, "kernel.type: unknown '" + type + "'");
  };
  KernelSpec spec = base();
  if (auto mod = modulation_from(c)) return KernelSpec::time_dependent(std::move(spec), std::move(mod));
  return spec;
}

InitialSpec initial_from(const Config& c, const std::string& section, const std::string& default_type) {
  InitialSpec s;
  s.type = c.get(section + ".type", default_type);
  s.cell = c.get_int(section + ".cell", 0);
  s.mass = c.get_double(section + ".mass", 1.0);
  s.amplitude = c.get_double(section + ".amplitude", 0.5);
  s.path = c.get(section + ".path", "");
  static const std::set<std::string> types = {"indicator", "steady_perturbation", "random_positive",
                                              "random_signed", "csv"};
  if (!types.count(s.type)) throw Error(ErrorCode::ConfigParse, section + ".type: unknown '" + s.type + "'");
  if (s.type == "csv" && s.path.empty()) throw Error(ErrorCode::ConfigParse, section + ".path is required for csv");
  return s;
}

// ---------------------------------------------------------------- output

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& provenance, const std::string& header) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out_ << provenance << '\n' << header << '\n';
  }

  void row(std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string fmt(double v) { return format_double(v); }

void write_trajectory(const fs::path& dir, const Experiment& e, const Trajectory& traj) {
  std::string header = "t";
  for (std::size_t i = 0; i < e.grid.cell_count(); ++i) header += ",cell_" + std::to_string(i);
  CsvFile csv(dir / "trajectory.csv", e.provenance(), header);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::vector<std::string> cells{fmt(traj.times[k])};
    for (double v : traj.states[k].values()) cells.push_back(fmt(v));
    csv.row(cells);
  }
}

void write_diagnostics(const fs::path& dir, const Experiment& e, const std::vector<DiagnosticsRow>& rows) {
  CsvFile csv(dir / "diagnostics.csv", e.provenance(), kDiagnosticsHeader);
  for (const auto& r : rows)
    csv.row({fmt(r.t), fmt(r.mass), fmt(r.l1), fmt(r.weighted_l2sq), fmt(r.rel_entropy_square),
             fmt(r.rel_entropy_abs), fmt(r.min_n), fmt(r.max_ratio), fmt(r.min_ratio)});
}

struct Summary {
  std::vector<std::pair<std::string, std::string>> items;
  void add(const std::string& k, double v) { items.emplace_back(k, fmt(v)); }
  void add(const std::string& k, const std::string& v) { items.emplace_back(k, v); }

  void write(const fs::path& file, const Experiment& e, std::ostream& out) const {
    CsvFile csv(file, e.provenance(), "quantity,value");
    for (const auto& [k, v] : items) {
      csv.row({k, v});
      out << k << " = " << v << '\n';
    }
  }
};

// ---------------------------------------------------------------- checks

struct CheckRow {
  std::string name;
  double value;
  double threshold;
  bool pass;
};

const Generator& autonomous_generator(const Experiment& e, const char* what) {
  if (!e.generator.autonomous)
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " requires a time-independent kernel");
  return e.generator.base;
}

double max_abs_diff(const LatticeFunction& a, const LatticeFunction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Q(t) <= e^{-alpha t} Q(0) (1 + 1e-8) along the exact flow at the sample
// times; returns the worst ratio Q(t) / (e^{-alpha t} Q(0)).
double decay_bound_ratio(const Generator& gen, const SteadyPair& pair, const LatticeFunction& n0, double alpha,
                         const std::vector<double>& times, double floor) {
  const double q0 = weighted_l2sq(n0, pair);
  double worst = 0.0;
  if (!(q0 > 0.0) || !std::isfinite(alpha)) return worst;
  LatticeFunction state = n0;
  double t_prev = 0.0;
  for (double t : times) {
    state = expm_apply(gen, state, t - t_prev);
    t_prev = t;
    const double q = weighted_l2sq(state, pair);
    if (q < floor * q0) break;
    worst = std::max(worst, q / (std::exp(-alpha * t) * q0));
  }
  return worst;
}

int run_simulate(const Experiment& e, const fs::path& dir, std::ostream& out) {
  const LatticeFunction n0 = e.n0();
  const Trajectory traj = evolve(e.generator, n0, e.integrator, e.t_end, e.sample_every);
  write_trajectory(dir, e, traj);
  const SteadyPair pair = e.steady_pair();
  const auto rows = diagnose(traj, pair);
  write_diagnostics(dir, e, rows);
  out << "samples = " << traj.states.size() << "\nfinal_mass = " << fmt(rows.back().mass)
      << "\nfinal_weighted_l2sq = " << fmt(rows.back().weighted_l2sq) << '\n';
  return kExitOk;
}

int run_steady(const Experiment& e, const fs::path& dir, std::ostream& out) {
  const SteadyPair pair = e.steady_pair();
  {
    CsvFile csv(dir / "steady.csv", e.provenance(), "cell,N,phi");
    for (std::size_t i = 0; i < pair.steady.size(); ++i)
      csv.row({std::to_string(i), fmt(pair.steady[i]), fmt(pair.dual[i])});
  }
  const LatticeFunction n0 = e.n0();
  Summary s;
  s.add("rho", compute_rho(pair.dual, n0));
  s.add("mass0", integrate(e.grid, n0));
  s.add("residual", pair.residual);
  s.add("dual_residual", pair.dual_residual);
  s.add("integral_N", integrate(e.grid, pair.steady));
  s.add("integral_N_phi", integrate_product(pair.steady, pair.dual));
  s.write(dir / "steady_summary.csv", e, out);
  return pair.residual <= 1e-10 && pair.dual_residual <= 1e-10 ? kExitOk : kExitAssertion;
}

int run_alpha(const Experiment& e, const fs::path& dir, std::ostream& out) {
  const SteadyPair pair = e.steady_pair();
  const AlphaEstimate a = estimate_alpha(e.generator.base, pair.steady, pair.dual);
  {
    CsvFile csv(dir / "alpha_direction.csv", e.provenance(), "cell,u");
    for (std::size_t i = 0; i < a.direction.size(); ++i) csv.row({std::to_string(i), fmt(a.direction[i])});
  }
  Summary s;
  s.add("alpha", a.alpha);
  s.add("residual", a.residual);
  s.add("iterations", static_cast<double>(a.iterations));
  s.write(dir / "alpha.csv", e, out);
  return kExitOk;
}

int run_decay(const Experiment& e, const fs::path& dir, std::ostream& out) {
  const Generator& gen = autonomous_generator(e, "decay");
  const SteadyPair pair = e.steady_pair();
  const AlphaEstimate a = estimate_alpha(gen, pair.steady, pair.dual);
  const LatticeFunction n0 = e.n0();
  const Trajectory traj = evolve(gen, n0, e.integrator, e.t_end, e.sample_every);
  write_trajectory(dir, e, traj);
  const auto rows = diagnose(traj, pair);
  write_diagnostics(dir, e, rows);

  const double fit_end = e.fit_end < 0.0 ? e.t_end : e.fit_end;
  const double q0 = rows.front().weighted_l2sq;
  std::vector<double> ts, qs;
  for (const auto& r : rows)
    if (r.t >= e.fit_start && r.t <= fit_end && r.weighted_l2sq > e.decay_floor * q0) {
      ts.push_back(r.t);
      qs.push_back(r.weighted_l2sq);
    }
  if (ts.size() < 3) throw Error(ErrorCode::InsufficientSamples, "decay fit window holds fewer than 3 samples");
  const double rate = fit_decay_rate(ts, qs);
  const double worst = decay_bound_ratio(gen, pair, n0, a.alpha, traj.times, e.decay_floor);
  const bool bound_ok = worst <= 1.0 + 1e-8;
  const bool rate_ok = rate >= a.alpha * (1.0 - 1e-6);

  Summary s;
  s.add("alpha", a.alpha);
  s.add("fitted_rate", rate);
  s.add("fit_samples", static_cast<double>(ts.size()));
  s.add("max_bound_ratio", worst);
  s.add("bound_holds", bound_ok ? "true" : "false");
  s.add("rate_at_least_alpha", rate_ok ? "true" : "false");
  s.write(dir / "decay.csv", e, out);
  return bound_ok && rate_ok ? kExitOk : kExitAssertion;
}

int run_rescale(const Experiment& e, const fs::path& dir, std::ostream& out) {
  const LatticeFunction n0 = e.n0();
  bool ok = true;
  CsvFile csv(dir / "rescale.csv", e.provenance(), "level,t,l2_norm,bound");
  Summary s;
  s.add("M0", integrate_abs(n0));
  for (int level : e.rescale_levels) {
    const RescaleReport r = run_rescaled(e.kernel, e.grid, level, n0, e.integrator, e.t_end, e.sample_every);
    const double initial = r.l2_norms.front();
    for (std::size_t k = 0; k < r.times.size(); ++k)
      csv.row({std::to_string(level), fmt(r.times[k]), fmt(r.l2_norms[k]),
               fmt(std::exp(r.regularity * r.times[k]) * initial)});
    const std::string tag = "level_" + std::to_string(level);
    s.add(tag + ".L1", r.regularity);
    s.add(tag + ".max_ratio_to_bound", r.max_ratio_to_bound);
    s.add(tag + ".bound_holds", r.bound_holds ? "true" : "false");
    s.add(tag + ".non_increasing", r.non_increasing ? "true" : "false");
    ok = ok && r.bound_holds && (r.regularity > 0.0 || r.non_increasing);
  }
  s.write(dir / "rescale_summary.csv", e, out);
  return ok ? kExitOk : kExitAssertion;
}

int run_stability_cmd(const Experiment& e, const fs::path& dir, std::ostream& out) {
  const Generator& gen = autonomous_generator(e, "stability");
  const StabilityReport r = run_stability(gen, e.n0(), e.v0(), e.integrator, e.t_end, e.sample_every);
  {
    CsvFile csv(dir / "stability.csv", e.provenance(), "t,distance");
    for (std::size_t k = 0; k < r.times.size(); ++k) csv.row({fmt(r.times[k]), fmt(r.distances[k])});
  }
  Summary s;
  s.add("initial_distance", r.distances.front());
  s.add("final_distance", r.distances.back());
  s.add("max_increase", r.max_increase);
  s.add("monotone", r.monotone ? "true" : "false");
  s.write(dir / "stability_summary.csv", e, out);
  return r.monotone ? kExitOk : kExitAssertion;
}

int run_check(const Experiment& e, const fs::path& dir, std::ostream& out) {
  std::vector<CheckRow> rows;
  auto add = [&rows](std::string name, double value, double threshold, bool pass) {
    rows.push_back({std::move(name), value, threshold, pass});
  };

  const SteadyPair pair = e.steady_pair();
  const Generator& base = e.generator.base;
  const LatticeFunction n0 = e.n0();
  const Trajectory traj = evolve(e.generator, n0, e.integrator, e.t_end, e.sample_every);
  const auto diag = diagnose(traj, pair);

  add("steady_residual", pair.residual, 1e-10, pair.residual <= 1e-10);
  add("dual_residual", pair.dual_residual, 1e-10, pair.dual_residual <= 1e-10);

  const double mass0 = diag.front().mass;
  double mass_drift = 0.0, min_n = 0.0, l1_increase = 0.0, rho_drift = 0.0;
  const double rho0 = compute_rho(pair.dual, n0);
  for (std::size_t k = 0; k < diag.size(); ++k) {
    mass_drift = std::max(mass_drift, std::abs(diag[k].mass - mass0));
    min_n = std::min(min_n, diag[k].min_n);
    if (k > 0) l1_increase = std::max(l1_increase, diag[k].l1 - diag[k - 1].l1);
    rho_drift = std::max(rho_drift, std::abs(compute_rho(pair.dual, traj.states[k]) - rho0));
  }
  const double mass_tol = 1e-9 * std::max(std::abs(mass0), 1e-3);
  add("mass_conservation", mass_drift, mass_tol, mass_drift <= mass_tol);
  bool nonneg = true;
  for (double v : n0.values()) nonneg = nonneg && v >= 0.0;
  if (nonneg) add("positivity_min", min_n, -1e-12, min_n >= -1e-12);
  add("l1_contraction_step_increase", l1_increase, 1e-9, l1_increase <= 1e-9);
  add("rho_conservation", rho_drift, 1e-9, rho_drift <= 1e-9 * std::max(1.0, std::abs(rho0)));

  {
    const LatticeFunction g = apply(base, n0);
    const double lhs = integrate_abs(g);
    const double rhs = l1_lipschitz_bound(base) * integrate_abs(n0);
    add("lipschitz_bound_slack", lhs - rhs, 0.0, lhs <= rhs * (1.0 + 1e-12) + 1e-300);
  }

  // Ratio bounds with C0 = max n0/N, C1 = min n0/N.
  const double c0 = diag.front().max_ratio;
  const double c1 = diag.front().min_ratio;
  double max_ratio = -1e300, min_ratio = 1e300;
  for (const auto& r : diag) {
    max_ratio = std::max(max_ratio, r.max_ratio);
    min_ratio = std::min(min_ratio, r.min_ratio);
  }
  add("max_ratio_bound", max_ratio - c0, 1e-9 * std::abs(c0), max_ratio <= c0 + 1e-9 * std::abs(c0));
  add("min_ratio_bound", c1 - min_ratio, 1e-9 * std::abs(c1), min_ratio >= c1 - 1e-9 * std::abs(c1));

  // Entropy monotonicity along the configured trajectory.
  for (const EntropyFn& h : {EntropyFn::square(), EntropyFn::abs(), EntropyFn::pos_part_sq(c0),
                             EntropyFn::neg_part_sq(c1)}) {
    double worst = 0.0, scale = 0.0;
    double prev = relative_entropy(pair.dual, pair.steady, traj.states.front(), h);
    scale = std::max(1.0, std::abs(prev));
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
      const double cur = relative_entropy(pair.dual, pair.steady, traj.states[k], h);
      worst = std::max(worst, cur - prev);
      prev = cur;
    }
    add("entropy_monotone_" + h.name(), worst, 1e-12 * scale, worst <= 1e-12 * scale);
  }

  {
    const double rhs = gre_dissipation_rhs(base, pair.dual, pair.steady, n0, EntropyFn::square());
    add("gre_dissipation_nonpositive", rhs, 1e-12, rhs <= 1e-12);
  }

  if (e.generator.autonomous) {
    const double t1 = std::min(1.0, e.t_end > 0.0 ? e.t_end : 1.0);
    const LatticeFunction exact = expm_apply(base, n0, t1);
    IntegratorSpec fine;
    fine.dt = std::min(1e-3, 1.0 / std::max(base.max_loss(), 1e-300));
    const Trajectory rk = evolve(base, n0, fine, t1, 1 << 30);
    const double rk_err = max_abs_diff(rk.states.back(), exact);
    add("rk4_vs_expm", rk_err, 1e-7, rk_err <= 1e-7);
    const double pic_err = max_abs_diff(picard_iterate(base, n0, t1, 60), exact);
    add("picard_vs_expm", pic_err, 1e-12, pic_err <= 1e-12);

    // Entropy production identity on a fine trajectory: d/dt H = dissipation.
    IntegratorSpec gre_integ;
    gre_integ.dt = std::min(1e-3, 1.0 / (2.0 * std::max(base.max_loss(), 1e-300)));
    const Trajectory fine_traj = evolve(base, n0, gre_integ, std::min(0.1, t1), 1);
    const auto rep = entropy_production_check(fine_traj, base, pair.dual, pair.steady, EntropyFn::square(), 1e-5);
    add("gre_identity_mismatch", rep.max_mismatch, 1e-5, rep.identity_holds);

    const AlphaEstimate a = estimate_alpha(base, pair.steady, pair.dual);
    if (std::isfinite(a.alpha)) {
      add("alpha_positive", a.alpha, 0.0, a.alpha > 0.0);
      const double worst = decay_bound_ratio(base, pair, n0, a.alpha, traj.times, e.decay_floor);
      add("decay_bound_ratio", worst, 1.0 + 1e-8, worst <= 1.0 + 1e-8);
    }

    const StabilityReport st = run_stability(base, n0, e.v0(), e.integrator, e.t_end, e.sample_every);
    add("stability_max_increase", st.max_increase, 1e-9, st.monotone);
  }

  for (int level : e.rescale_levels) {
    if (!e.kernel.is_radial() && level != 0) continue;
    if (e.kernel.is_time_dependent()) continue;
    const RescaleReport r = run_rescaled(e.kernel, e.grid, level, n0, e.integrator, e.t_end, e.sample_every);
    add("rescale_l2_bound_level_" + std::to_string(level), r.max_ratio_to_bound, 1.0 + 1e-9, r.bound_holds);
  }

  bool all = true;
  CsvFile csv(dir / "check.csv", e.provenance(), "criterion,value,threshold,pass");
  for (const auto& r : rows) {
    csv.row({r.name, fmt(r.value), fmt(r.threshold), r.pass ? "true" : "false"});
    out << (r.pass ? "PASS " : "FAIL ") << r.name << " value=" << fmt(r.value) << " threshold=" << fmt(r.threshold)
        << '\n';
    all = all && r.pass;
  }
  return all ? kExitOk : kExitAssertion;
}

}  // namespace

// ---------------------------------------------------------------- Config

Config Config::parse(const std::string& text, const std::string& base_dir) {
  Config c;
  c.base_dir_ = base_dir;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigParse, "line " + std::to_string(number) + ": expected 'section.key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!known_keys().count(key))
      throw Error(ErrorCode::ConfigParse, "line " + std::to_string(number) + ": unknown key '" + key + "'");
    if (!c.entries_.emplace(key, value).second)
      throw Error(ErrorCode::ConfigParse, "line " + std::to_string(number) + ": duplicate key '" + key + "'");
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse(buffer.str(), parent.empty() ? "." : parent.string());
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(it->second, key);
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_int(it->second, key);
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::uint64_t v = 0;
  const std::string& t = it->second;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw Error(ErrorCode::ConfigParse, key + ": '" + t + "' is not an unsigned 64-bit seed");
  return v;
}

std::string Config::resolve_path(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base_dir_) / p).string();
}

std::uint64_t Config::hash() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : entries_) feed(k + "=" + v + "\n");
  return h;
}

// ---------------------------------------------------------------- Experiment

LatticeFunction lattice_source(const std::string& source, const Grid& grid, SplitMix64&& rng, const Config& config) {
  if (source == "uniform") return LatticeFunction(grid, 1.0);
  if (source.rfind("constant:", 0) == 0) return LatticeFunction(grid, parse_double(source.substr(9), source));
  if (source == "random") {
    LatticeFunction f(grid);
    for (double& v : f.values()) v = rng.uniform(0.2, 1.0);
    return f;
  }
  if (source.rfind("values:", 0) == 0) {
    std::vector<double> values;
    for (const auto& part : split(source.substr(7), ',')) values.push_back(parse_double(part, source));
    return LatticeFunction(grid, std::move(values));
  }
  if (source.rfind("csv:", 0) == 0) return LatticeFunction(grid, read_numbers(config.resolve_path(source.substr(4))));
  throw Error(ErrorCode::ConfigParse, "unknown lattice source '" + source + "'");
}

Experiment Experiment::from_config(const Config& c, std::size_t max_cells) {
  const Grid grid = build_grid(static_cast<int>(c.get_int("grid.p", 2)), static_cast<int>(c.get_int("grid.n", 1)),
                               static_cast<int>(c.get_int("grid.M", 1)), static_cast<int>(c.get_int("grid.m", 1)),
                               max_cells);
  const std::uint64_t seed = c.get_seed("run.seed", 0);
  KernelSpec kernel = kernel_from(c, grid, seed);

  const std::string mode_name = c.get("generator.k_mode", "column_sum");
  KMode mode;
  if (mode_name == "column_sum") mode = KMode::ColumnSum;
  else if (mode_name == "analytic") mode = KMode::Analytic;
  else throw Error(ErrorCode::ConfigParse, "generator.k_mode: unknown '" + mode_name + "'");
  std::optional<LatticeFunction> analytic_k;
  if (mode == KMode::Analytic) {
    if (!c.has("generator.analytic_k"))
      throw Error(ErrorCode::MissingAnalyticK, "generator.analytic_k is required in analytic mode");
    analytic_k = lattice_source(c.get("generator.analytic_k", ""), grid, SplitMix64::stream(seed, kTagAnalyticK), c);
  }
  TimeDependentGenerator generator = assemble_time_dependent(kernel, grid, mode, analytic_k);

  IntegratorSpec integ;
  const std::string method = c.get("integrator.method", "rk4");
  if (method == "rk4") integ.method = Method::Rk4;
  else if (method == "expm") integ.method = Method::ExpmOracle;
  else if (method == "picard") integ.method = Method::Picard;
  else throw Error(ErrorCode::ConfigParse, "integrator.method: unknown '" + method + "'");
  integ.dt = c.get_double("integrator.dt", 0.0);
  integ.picard_iterations = static_cast<int>(c.get_int("integrator.picard_iterations", 60));
  integ.expm_tolerance = c.get_double("integrator.expm_tolerance", 1e-16);
  if (integ.dt < 0.0) throw Error(ErrorCode::ConfigParse, "integrator.dt must be >= 0");
  if (integ.picard_iterations < 1) throw Error(ErrorCode::ConfigParse, "integrator.picard_iterations must be >= 1");
  if (!(integ.expm_tolerance > 0.0)) throw Error(ErrorCode::ConfigParse, "integrator.expm_tolerance must be > 0");

  std::vector<int> levels;
  for (const auto& part : split(c.get("run.rescale_levels", "0,1,2"), ',')) {
    const long long l = parse_int(part, "run.rescale_levels");
    if (l < 0) throw Error(ErrorCode::ConfigParse, "run.rescale_levels must be >= 0");
    levels.push_back(static_cast<int>(l));
  }

  Experiment e{c,
               grid,
               std::move(kernel),
               mode,
               std::move(analytic_k),
               std::move(generator),
               integ,
               initial_from(c, "initial", "indicator"),
               initial_from(c, "stability", "random_positive"),
               seed,
               c.get_double("run.t_end", 10.0),
               static_cast<int>(c.get_int("run.sample_every", 1)),
               std::move(levels),
               c.get_double("run.fit_start", 0.0),
               c.get_double("run.fit_end", -1.0),
               c.get_double("run.decay_floor", 1e-12)};
  if (e.t_end < 0.0) throw Error(ErrorCode::ConfigParse, "run.t_end must be >= 0");
  if (e.sample_every < 1) throw Error(ErrorCode::ConfigParse, "run.sample_every must be >= 1");
  for (const InitialSpec* s : {&e.initial, &e.second})
    if (s->cell < 0 || static_cast<std::size_t>(s->cell) >= grid.cell_count())
      throw Error(ErrorCode::ConfigParse, "initial cell index out of range");
  return e;
}

SteadyPair Experiment::steady_pair() const { return solve_steady_pair(generator.base); }

LatticeFunction Experiment::initial_datum(const InitialSpec& spec, std::uint64_t tag) const {
  SplitMix64 rng = SplitMix64::stream(seed, 100 + tag);
  LatticeFunction f(grid);
  if (spec.type == "indicator") {
    f[static_cast<std::size_t>(spec.cell)] = spec.mass / grid.cell_measure();
    return f;
  }
  if (spec.type == "csv") return LatticeFunction(grid, read_numbers(config.resolve_path(spec.path)));
  if (spec.type == "steady_perturbation") {
    const LatticeFunction steady = steady_pair().steady;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = steady[i] * (1.0 + spec.amplitude * rng.uniform(-1.0, 1.0));
    normalize_integral(f, spec.mass);
    return f;
  }
  if (spec.type == "random_positive") {
    for (double& v : f.values()) v = rng.uniform();
    normalize_integral(f, spec.mass);
    return f;
  }
  // random_signed: scaled so that integral |n0| = mass.
  for (double& v : f.values()) v = rng.uniform(-1.0, 1.0);
  f *= spec.mass / integrate_abs(f);
  return f;
}

std::string Experiment::provenance() const {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config.hash()));
  return "# uscatter p=" + std::to_string(grid.p()) + " n=" + std::to_string(grid.dim()) +
         " M=" + std::to_string(grid.outer_level()) + " m=" + std::to_string(grid.inner_level()) +
         " k_mode=" + k_mode_name(k_mode) + " kernel=" + kernel.name() + " seed=" + std::to_string(seed) +
         " M0=" + format_double(integrate_abs(n0())) + " config_hash=" + hash;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::size_t max_cells_from_env() {
  const char* env = std::getenv("USCATTER_MAX_CELLS");
  if (!env || !*env) return kDefaultMaxCells;
  const std::string s = env;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0)
    throw Error(ErrorCode::ConfigParse, "USCATTER_MAX_CELLS must be a positive integer");
  return v;
}

int run_experiment(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                   std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::function<int(const Experiment&, const fs::path&, std::ostream&)>>
      commands = {
          {"simulate", run_simulate}, {"steady", run_steady},   {"alpha", run_alpha},
          {"decay", run_decay},       {"rescale", run_rescale}, {"stability", run_stability_cmd},
          {"check", run_check},
      };
  try {
    const auto it = commands.find(subcommand);
    if (it == commands.end()) throw Error(ErrorCode::ConfigParse, "unknown subcommand '" + subcommand + "'");
    const Experiment e = Experiment::from_config(Config::load(config_path), max_cells_from_env());
    const fs::path dir(out_dir.empty() ? "." : out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
    const int code = it->second(e, dir, out);
    if (code == kExitAssertion) err << "uscatter " << subcommand << ": assertion failed\n";
    return code;
  } catch (const Error& e) {
    err << "uscatter " << subcommand << ": " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "uscatter " << subcommand << ": " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace uscatter

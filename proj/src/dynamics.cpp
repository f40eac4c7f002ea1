#include "uscatter/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uscatter/error.hpp"

namespace uscatter {

namespace {

// Relative slack on the rk4 guard so that dt = 1/k_max is accepted.
constexpr double kGuardSlack = 1.0 + 1e-12;

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double operator_one_norm(const Generator& gen) {
  // Column j of G is gain(:, j) with the diagonal reduced by k_j.
  const Matrix& a = gen.gain();
  std::vector<double> cols(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) cols[j] += i == j ? std::abs(r[j] - gen.loss()[j]) : r[j];
  }
  return cols.empty() ? 0.0 : *std::max_element(cols.begin(), cols.end());
}

std::size_t step_count(double span, double dt) {
  if (span <= 0.0) return 0;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt - 1e-9)));
}

using Rhs = std::function<void(double, std::span<const double>, std::span<double>)>;

// Classical 4-stage step for y' = rhs(t, y).
void rk4_into(const Rhs& rhs, double t, double h, std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs(t, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  rhs(t + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  rhs(t + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  rhs(t + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void guard_step(double h, double loss_rate) {
  if (h * loss_rate > kGuardSlack)
    throw Error(ErrorCode::StepTooLarge, "dt * k_max = " + std::to_string(h * loss_rate) + " exceeds 1");
}

double checked_modulation(const TimeDependentGenerator& gen, double t) {
  const double m = gen.modulation(t);
  if (!std::isfinite(m) || m < 0.0)
    throw Error(ErrorCode::NegativeKernelValue, "time modulation at t = " + std::to_string(t) + " is " + std::to_string(m));
  return m;
}

Rhs primal_rhs(const TimeDependentGenerator& gen) {
  return [&gen](double t, std::span<const double> y, std::span<double> out) {
    const double m = checked_modulation(gen, t);
    apply_into(gen.base, y, out);
    if (m != 1.0)
      for (double& v : out) v *= m;
  };
}

void guard_rk4(const TimeDependentGenerator& gen, double t, double h) {
  const double m = std::max({checked_modulation(gen, t), checked_modulation(gen, t + 0.5 * h),
                             checked_modulation(gen, t + h)});
  guard_step(h, m * gen.base.max_loss());
}

}  // namespace

const char* method_name(Method m) noexcept {
  switch (m) {
    case Method::Rk4: return "rk4";
    case Method::ExpmOracle: return "expm";
    case Method::Picard: return "picard";
  }
  return "unknown";
}

TimeDependentGenerator constant_in_time(Generator gen) {
  return TimeDependentGenerator{std::move(gen), [](double) { return 1.0; }, true};
}

TimeDependentGenerator assemble_time_dependent(const KernelSpec& spec, const Grid& grid, KMode mode,
                                               const std::optional<LatticeFunction>& analytic_k) {
  if (const auto* td = std::get_if<kernels::TimeDependent>(&spec.variant())) {
    Generator base = assemble(build_kernel_matrix(*td->base, grid, 0.0), mode, analytic_k);
    return TimeDependentGenerator{std::move(base), td->modulation, false};
  }
  return constant_in_time(assemble(build_kernel_matrix(spec, grid, 0.0), mode, analytic_k));
}

double resolve_dt(const IntegratorSpec& integ, double max_loss) {
  if (integ.dt > 0.0) return integ.dt;
  return max_loss > 0.0 ? std::min(0.01, 1.0 / (4.0 * max_loss)) : 0.01;
}

LatticeFunction step_rk4(const Generator& gen, const LatticeFunction& f, double dt) {
  require_same_grid(gen.grid(), f);
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  guard_step(dt, gen.max_loss());
  std::vector<double> y(f.values().begin(), f.values().end());
  rk4_into([&gen](double, std::span<const double> in, std::span<double> out) { apply_into(gen, in, out); },
           0.0, dt, y);
  return LatticeFunction(f.grid(), std::move(y));
}

LatticeFunction step_rk4(const TimeDependentGenerator& gen, const LatticeFunction& f, double t, double dt) {
  require_same_grid(gen.base.grid(), f);
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  guard_rk4(gen, t, dt);
  std::vector<double> y(f.values().begin(), f.values().end());
  rk4_into(primal_rhs(gen), t, dt, y);
  return LatticeFunction(f.grid(), std::move(y));
}

LatticeFunction expm_apply(const Generator& gen, const LatticeFunction& f, double t, double tolerance) {
  require_same_grid(gen.grid(), f);
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "expm_apply needs t >= 0");
  constexpr int kMaxTerms = 80;
  const double norm = operator_one_norm(gen);
  const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(t * norm)));
  const double h = t / static_cast<double>(substeps);

  const std::size_t n = f.size();
  std::vector<double> v(f.values().begin(), f.values().end());
  std::vector<double> term(n), next(n);
  for (std::size_t s = 0; s < substeps && t > 0.0; ++s) {
    term = v;
    bool converged = false;
    for (int j = 1; j <= kMaxTerms; ++j) {
      apply_into(gen, term, next);
      const double c = h / j;
      for (std::size_t i = 0; i < n; ++i) {
        term[i] = c * next[i];
        v[i] += term[i];
      }
      if (max_abs(term) <= tolerance * std::max(max_abs(v), 1e-300)) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw Error(ErrorCode::ToleranceNotReached,
                  "Taylor series did not reach tolerance " + std::to_string(tolerance));
  }
  return LatticeFunction(f.grid(), std::move(v));
}

LatticeFunction picard_iterate(const Generator& gen, const LatticeFunction& f, double t, int iterations) {
  require_same_grid(gen.grid(), f);
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "picard needs at least one iteration");
  const std::size_t n = f.size();
  std::vector<double> sum(f.values().begin(), f.values().end());
  std::vector<double> term = sum, next(n);
  for (int j = 1; j <= iterations; ++j) {
    apply_into(gen, term, next);
    const double c = t / j;
    for (std::size_t i = 0; i < n; ++i) {
      term[i] = c * next[i];
      sum[i] += term[i];
    }
  }
  return LatticeFunction(f.grid(), std::move(sum));
}

Trajectory evolve(const TimeDependentGenerator& gen, const LatticeFunction& n0, const IntegratorSpec& integ,
                  double t_end, int sample_every) {
  require_same_grid(gen.base.grid(), n0);
  if (!n0.all_finite()) throw Error(ErrorCode::InvalidArgument, "initial data must be finite");
  if (t_end < 0.0) throw Error(ErrorCode::InvalidArgument, "t_end must be >= 0");
  if (sample_every < 1) throw Error(ErrorCode::InvalidArgument, "sample_every must be >= 1");
  if (integ.method != Method::Rk4 && !gen.autonomous)
    throw Error(ErrorCode::InvalidArgument,
                std::string(method_name(integ.method)) + " requires a time-independent kernel");

  const double dt = resolve_dt(integ, gen.max_loss_at(0.0));
  const std::size_t steps = step_count(t_end, dt);
  const double h = steps ? t_end / static_cast<double>(steps) : 0.0;

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(n0);

  if (integ.method == Method::Rk4) {
    std::vector<double> y(n0.values().begin(), n0.values().end());
    const Rhs rhs = primal_rhs(gen);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * h;
      guard_rk4(gen, t, h);
      rk4_into(rhs, t, h, y);
      if ((k + 1) % static_cast<std::size_t>(sample_every) == 0 || k + 1 == steps) {
        traj.times.push_back(k + 1 == steps ? t_end : static_cast<double>(k + 1) * h);
        traj.states.emplace_back(n0.grid(), y);
      }
    }
    return traj;
  }

  std::size_t done = 0;
  while (done < steps) {
    const std::size_t next = std::min(steps, done + static_cast<std::size_t>(sample_every));
    const double span = static_cast<double>(next - done) * h;
    const LatticeFunction& prev = traj.states.back();
    traj.states.push_back(integ.method == Method::ExpmOracle
                              ? expm_apply(gen.base, prev, span, integ.expm_tolerance)
                              : picard_iterate(gen.base, prev, span, integ.picard_iterations));
    traj.times.push_back(next == steps ? t_end : static_cast<double>(next) * h);
    done = next;
  }
  return traj;
}

Trajectory evolve(const Generator& gen, const LatticeFunction& n0, const IntegratorSpec& integ, double t_end,
                  int sample_every) {
  return evolve(constant_in_time(gen), n0, integ, t_end, sample_every);
}

Trajectory evolve_dual(const TimeDependentGenerator& gen, const LatticeFunction& phi_terminal,
                       const IntegratorSpec& integ, double t_start, double t_end, int sample_every) {
  require_same_grid(gen.base.grid(), phi_terminal);
  if (t_end < t_start) throw Error(ErrorCode::InvalidArgument, "evolve_dual needs t_start <= t_end");
  if (sample_every < 1) throw Error(ErrorCode::InvalidArgument, "sample_every must be >= 1");
  if (integ.method != Method::Rk4)
    throw Error(ErrorCode::InvalidArgument, "backward dual evolution uses rk4");

  const double span = t_end - t_start;
  const double dt = resolve_dt(integ, gen.max_loss_at(t_end));
  const std::size_t steps = step_count(span, dt);
  const double h = steps ? span / static_cast<double>(steps) : 0.0;

  // psi(s) = phi(t_end - s) solves psi' = apply_dual(G(t_end - s), psi).
  const Rhs reversed = [&gen, t_end](double s, std::span<const double> y, std::span<double> out) {
    const double m = checked_modulation(gen, t_end - s);
    apply_dual_into(gen.base, y, out);
    if (m != 1.0)
      for (double& v : out) v *= m;
  };

  Trajectory back;
  back.times.push_back(t_end);
  back.states.push_back(phi_terminal);
  std::vector<double> y(phi_terminal.values().begin(), phi_terminal.values().end());
  for (std::size_t k = 0; k < steps; ++k) {
    const double s = static_cast<double>(k) * h;
    guard_rk4(gen, t_end - s - h, h);
    rk4_into(reversed, s, h, y);
    if ((k + 1) % static_cast<std::size_t>(sample_every) == 0 || k + 1 == steps) {
      back.times.push_back(k + 1 == steps ? t_start : t_end - static_cast<double>(k + 1) * h);
      back.states.emplace_back(phi_terminal.grid(), y);
    }
  }
  std::reverse(back.times.begin(), back.times.end());
  std::reverse(back.states.begin(), back.states.end());
  return back;
}

StabilityReport run_stability(const Generator& gen, const LatticeFunction& n0, const LatticeFunction& v0,
                              const IntegratorSpec& integ, double t_end, int sample_every) {
  require_same_grid(n0, v0);
  const Trajectory a = evolve(gen, n0, integ, t_end, sample_every);
  const Trajectory b = evolve(gen, v0, integ, t_end, sample_every);
  StabilityReport report;
  report.times = a.times;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    report.distances.push_back(integrate_abs(a.states[k] - b.states[k]));
    if (k > 0)
      report.max_increase = std::max(report.max_increase, report.distances[k] - report.distances[k - 1]);
  }
  report.monotone = report.max_increase <= 1e-9;
  return report;
}

double l2_norm(const LatticeFunction& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return std::sqrt(s * f.grid().cell_measure());
}

RescaleReport run_rescaled(const KernelSpec& spec, const Grid& grid, int level, const LatticeFunction& n0,
                           const IntegratorSpec& integ, double t_end, int sample_every) {
  if (!spec.is_radial() && level != 0)
    throw Error(ErrorCode::NonRadialKernel, spec.name() + " can only be run unscaled (level 0)");
  const Generator gen = spec.is_radial() ? rescale(spec, grid, level)
                                         : assemble(build_kernel_matrix(spec, grid, 0.0), KMode::ColumnSum);
  RescaleReport report;
  report.level = level;
  report.regularity = regularity_constant(spec, grid, level);
  const Trajectory traj = evolve(gen, n0, integ, t_end, sample_every);
  report.times = traj.times;
  const double initial = l2_norm(n0);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double norm = l2_norm(traj.states[k]);
    report.l2_norms.push_back(norm);
    const double bound = std::exp(report.regularity * traj.times[k]) * initial;
    if (bound > 0.0) report.max_ratio_to_bound = std::max(report.max_ratio_to_bound, norm / bound);
    if (norm > bound * (1.0 + 1e-9) + 1e-300) report.bound_holds = false;
    if (k > 0 && norm > report.l2_norms[k - 1] * (1.0 + 1e-9)) report.non_increasing = false;
  }
  return report;
}

}  // namespace uscatter

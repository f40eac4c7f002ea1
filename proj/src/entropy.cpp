#include "uscatter/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uscatter/error.hpp"

namespace uscatter {

namespace {

void require_positive(const LatticeFunction& f, const char* what) {
  for (double v : f.values())
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::NonPositiveN, std::string(what) + " must be positive");
}

// Shared double sum over a gain-like matrix with the given per-entry weight.
double gre_sum(const Matrix& rates, double weight, const LatticeFunction& dual, const LatticeFunction& steady,
               const LatticeFunction& n, const EntropyFn& h) {
  require_same_grid(steady, n);
  require_same_grid(steady, dual);
  require_positive(steady, "steady state");
  require_positive(dual, "dual state");
  const std::size_t size = n.size();
  std::vector<double> u(size), hu(size), dhu(size);
  for (std::size_t i = 0; i < size; ++i) {
    u[i] = n[i] / steady[i];
    hu[i] = h.value(u[i]);
    dhu[i] = h.derivative(u[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const auto r = rates.row(i);
    double row = 0.0;
    for (std::size_t j = 0; j < size; ++j)
      row += r[j] * steady[j] * (dhu[i] * (u[j] - u[i]) + hu[i] - hu[j]);
    total += dual[i] * row;
  }
  return total * weight;
}

// Derivative at t[k] of the interpolating polynomial through up to five
// nearby samples (centered where possible).
double stencil_derivative(const std::vector<double>& t, const std::vector<double>& y, std::size_t k) {
  const std::size_t count = t.size();
  const std::size_t width = std::min<std::size_t>(5, count);
  std::size_t lo = k >= width / 2 ? k - width / 2 : 0;
  lo = std::min(lo, count - width);
  double d = 0.0;
  for (std::size_t j = lo; j < lo + width; ++j) {
    double w;
    if (j == k) {
      w = 0.0;
      for (std::size_t m = lo; m < lo + width; ++m)
        if (m != k) w += 1.0 / (t[k] - t[m]);
    } else {
      double num = 1.0, den = 1.0;
      for (std::size_t m = lo; m < lo + width; ++m) {
        if (m == j) continue;
        den *= t[j] - t[m];
        if (m != k) num *= t[k] - t[m];
      }
      w = num / den;
    }
    d += w * y[j];
  }
  return d;
}

}  // namespace

EntropyFn EntropyFn::smoothed_sign(double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "smoothed sign needs delta > 0");
  return EntropyFn(Kind::SmoothedSign, delta);
}

double EntropyFn::value(double u) const noexcept {
  switch (kind_) {
    case Kind::Linear: return u;
    case Kind::Abs: return std::abs(u);
    case Kind::Square: return u * u;
    case Kind::PosPartSq: {
      const double d = std::max(u - param_, 0.0);
      return d * d;
    }
    case Kind::NegPartSq: {
      const double d = std::max(param_ - u, 0.0);
      return d * d;
    }
    case Kind::SmoothedSign: return 0.5 * (std::hypot(u, param_) + u);
  }
  return 0.0;
}

double EntropyFn::derivative(double u) const noexcept {
  switch (kind_) {
    case Kind::Linear: return 1.0;
    case Kind::Abs: return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    case Kind::Square: return 2.0 * u;
    case Kind::PosPartSq: return 2.0 * std::max(u - param_, 0.0);
    case Kind::NegPartSq: return -2.0 * std::max(param_ - u, 0.0);
    case Kind::SmoothedSign: return 0.5 * (u / std::hypot(u, param_) + 1.0);
  }
  return 0.0;
}

std::string EntropyFn::name() const {
  switch (kind_) {
    case Kind::Linear: return "linear";
    case Kind::Abs: return "abs";
    case Kind::Square: return "square";
    case Kind::PosPartSq: return "pos_part_sq";
    case Kind::NegPartSq: return "neg_part_sq";
    case Kind::SmoothedSign: return "smoothed_sign";
  }
  return "unknown";
}

double relative_entropy(const LatticeFunction& dual, const LatticeFunction& steady, const LatticeFunction& n,
                        const EntropyFn& h) {
  require_same_grid(steady, n);
  require_same_grid(steady, dual);
  require_positive(steady, "steady state");
  double sum = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) sum += dual[i] * steady[i] * h.value(n[i] / steady[i]);
  return sum * n.grid().cell_measure();
}

double gre_dissipation_rhs(const KernelMatrix& kmat, const LatticeFunction& dual, const LatticeFunction& steady,
                           const LatticeFunction& n, const EntropyFn& h) {
  require_same_grid(kmat.grid, n);
  const double mu = kmat.grid.cell_measure();
  return gre_sum(kmat.entries, mu * mu, dual, steady, n, h);
}

double gre_dissipation_rhs(const Generator& gen, const LatticeFunction& dual, const LatticeFunction& steady,
                           const LatticeFunction& n, const EntropyFn& h) {
  require_same_grid(gen.grid(), n);
  return gre_sum(gen.gain(), gen.grid().cell_measure(), dual, steady, n, h);
}

EntropyProductionReport entropy_production_check(const Trajectory& traj, const Generator& gen,
                                                 const LatticeFunction& dual, const LatticeFunction& steady,
                                                 const EntropyFn& h, double tolerance, double monotone_tolerance) {
  const std::size_t count = traj.states.size();
  if (count < 3) throw Error(ErrorCode::InsufficientSamples, "need at least 3 samples");

  EntropyProductionReport report;
  report.times = traj.times;
  for (const auto& state : traj.states) {
    report.entropy.push_back(relative_entropy(dual, steady, state, h));
    report.dissipation.push_back(gre_dissipation_rhs(gen, dual, steady, state, h));
  }
  report.fd_derivative.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    report.fd_derivative[k] = stencil_derivative(traj.times, report.entropy, k);
    if (k > 0 && k + 1 < count)
      report.max_mismatch = std::max(report.max_mismatch, std::abs(report.fd_derivative[k] - report.dissipation[k]));
  }
  const auto& e = report.entropy;
  for (std::size_t k = 1; k < count; ++k) report.max_increase = std::max(report.max_increase, e[k] - e[k - 1]);
  report.identity_holds = report.max_mismatch <= tolerance;
  report.non_increasing = report.max_increase <= monotone_tolerance;
  return report;
}

double fit_decay_rate(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw Error(ErrorCode::InvalidArgument, "times and values differ in length");
  if (times.size() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least 2 samples");
  const auto n = static_cast<double>(times.size());
  double mean_t = 0.0, mean_y = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(values[k] > 0.0)) throw Error(ErrorCode::NonPositiveValue, "decay fit needs positive values");
    mean_t += times[k];
    mean_y += -std::log(values[k]);
  }
  mean_t /= n;
  mean_y /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double dt = times[k] - mean_t;
    sxy += dt * (-std::log(values[k]) - mean_y);
    sxx += dt * dt;
  }
  if (sxx == 0.0) throw Error(ErrorCode::InsufficientSamples, "decay fit needs distinct times");
  return sxy / sxx;
}

double weighted_l2sq(const LatticeFunction& n, const SteadyPair& pair) {
  require_same_grid(pair.steady, n);
  const double rho = compute_rho(pair.dual, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double u = n[i] / pair.steady[i] - rho;
    sum += pair.dual[i] * pair.steady[i] * u * u;
  }
  return sum * n.grid().cell_measure();
}

DiagnosticsRow diagnostics(double t, const LatticeFunction& n, const SteadyPair& pair) {
  require_same_grid(pair.steady, n);
  DiagnosticsRow row;
  row.t = t;
  row.mass = integrate(n.grid(), n);
  row.l1 = integrate_abs(n);
  row.weighted_l2sq = weighted_l2sq(n, pair);
  row.rel_entropy_square = relative_entropy(pair.dual, pair.steady, n, EntropyFn::square());
  row.rel_entropy_abs = relative_entropy(pair.dual, pair.steady, n, EntropyFn::abs());
  row.min_n = std::numeric_limits<double>::infinity();
  row.max_ratio = -std::numeric_limits<double>::infinity();
  row.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n.size(); ++i) {
    row.min_n = std::min(row.min_n, n[i]);
    const double ratio = n[i] / pair.steady[i];
    row.max_ratio = std::max(row.max_ratio, ratio);
    row.min_ratio = std::min(row.min_ratio, ratio);
  }
  return row;
}

std::vector<DiagnosticsRow> diagnose(const Trajectory& traj, const SteadyPair& pair) {
  std::vector<DiagnosticsRow> rows;
  rows.reserve(traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) rows.push_back(diagnostics(traj.times[k], traj.states[k], pair));
  return rows;
}

}  // namespace uscatter

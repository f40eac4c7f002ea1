#include "uscatter/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "linalg.hpp"
#include "uscatter/error.hpp"

namespace uscatter {

namespace {

constexpr int kMaxInverseIterations = 100;
constexpr double kSteadyTolerance = 1e-10;

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Dense G (or its transpose) shifted by -shift on the diagonal.
Matrix shifted_operator(const Generator& gen, bool transpose, double shift) {
  const std::size_t n = gen.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = transpose ? gen.gain()(j, i) : gen.gain()(i, j);
  for (std::size_t i = 0; i < n; ++i) m(i, i) -= gen.loss()[i] + shift;
  return m;
}

// Inverse iteration toward the eigenvalue of G (or G^T) closest to zero.
std::vector<double> null_vector(const Generator& gen, bool transpose) {
  const std::size_t n = gen.size();
  const double scale = std::max(gen.max_loss(), 1e-300);
  const detail::Lu lu(shifted_operator(gen, transpose, 1e-9 * scale));
  if (lu.singular()) throw Error(ErrorCode::NonConvergence, "shifted generator is singular");

  std::vector<double> x(n, 1.0);
  for (int it = 0; it < kMaxInverseIterations; ++it) {
    std::vector<double> y = lu.solve(x);
    double sum = 0.0;
    for (double v : y) sum += v;
    const double norm = max_abs(y);
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw Error(ErrorCode::NonConvergence, "inverse iteration broke down");
    const double sign = sum < 0.0 ? -1.0 : 1.0;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] *= sign / norm;
      change = std::max(change, std::abs(y[i] - x[i]));
    }
    x = std::move(y);
    if (change <= 1e-15 && it > 0) break;
  }
  return x;
}

void require_positive(const LatticeFunction& f, const char* what) {
  for (double v : f.values())
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::NonPositiveN, std::string(what) + " must be positive");
}

}  // namespace

bool is_irreducible(const Generator& gen) {
  const std::size_t n = gen.size();
  if (n <= 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      for (std::size_t i = 0; i < n; ++i) {
        // gain(i, j) > 0 means mass flows from cell j to cell i.
        const double w = forward ? gen.gain()(i, j) : gen.gain()(j, i);
        if (i != j && w > 0.0 && !seen[i]) {
          seen[i] = 1;
          ++count;
          stack.push_back(i);
        }
      }
    }
    return count == n;
  };
  return reach(true) && reach(false);
}

LatticeFunction solve_steady(const Generator& gen) {
  const Grid& grid = gen.grid();
  if (!is_irreducible(gen))
    throw Error(ErrorCode::NoPositiveSteadyState, "generator is reducible; the steady state is not unique");

  LatticeFunction steady(grid, null_vector(gen, false));
  for (double v : steady.values())
    if (!(v > 0.0)) throw Error(ErrorCode::NoPositiveSteadyState, "null vector changes sign");
  steady *= 1.0 / integrate(grid, steady);

  const double residual = max_abs(apply(gen, steady).values());
  const double tol = kSteadyTolerance * std::max(1.0, gen.max_loss() * max_abs(steady.values()));
  if (!(residual <= tol))
    throw Error(ErrorCode::NonConvergence, "steady residual " + std::to_string(residual) +
                                               " above tolerance; generator may have no zero eigenvalue");
  return steady;
}

LatticeFunction solve_dual_steady(const Generator& gen, const LatticeFunction& steady) {
  const Grid& grid = gen.grid();
  require_same_grid(grid, steady);
  require_positive(steady, "steady state");

  LatticeFunction dual(grid, 1.0);
  if (gen.k_mode() != KMode::ColumnSum) {
    if (!is_irreducible(gen))
      throw Error(ErrorCode::NoPositiveSteadyState, "generator is reducible; the dual state is not unique");
    dual = LatticeFunction(grid, null_vector(gen, true));
    for (double v : dual.values())
      if (!(v > 0.0)) throw Error(ErrorCode::NoPositiveSteadyState, "dual null vector changes sign");
  }
  const double norm = integrate_product(dual, steady);
  // phi = 1 stays exact when N already carries unit mass up to rounding.
  const bool unit_mass = gen.k_mode() == KMode::ColumnSum && std::abs(norm - 1.0) <= 1e-14;
  if (!unit_mass) dual *= 1.0 / norm;

  const double residual = max_abs(apply_dual(gen, dual).values());
  const double tol = kSteadyTolerance * std::max(1.0, gen.max_loss() * max_abs(dual.values()));
  if (!(residual <= tol))
    throw Error(ErrorCode::NonConvergence, "dual residual " + std::to_string(residual) + " above tolerance");
  return dual;
}

SteadyPair solve_steady_pair(const Generator& gen) {
  LatticeFunction steady = solve_steady(gen);
  LatticeFunction dual = solve_dual_steady(gen, steady);
  const double r = max_abs(apply(gen, steady).values());
  const double rd = max_abs(apply_dual(gen, dual).values());
  return SteadyPair{std::move(steady), std::move(dual), r, rd, true};
}

double compute_rho(const LatticeFunction& dual, const LatticeFunction& n0) {
  return integrate_product(dual, n0);
}

Matrix dissipation_form(const Generator& gen, const LatticeFunction& steady, const LatticeFunction& dual) {
  require_same_grid(gen.grid(), steady);
  require_same_grid(gen.grid(), dual);
  const std::size_t n = gen.size();
  const double mu = gen.grid().cell_measure();
  // c_ij = K_ij phi_i N_j mu^2 = gain_ij phi_i N_j mu.
  Matrix form(n, n);
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = gen.gain()(i, j) * dual[i] * steady[j] * mu;
      form(i, j) -= c;
      form(j, i) -= c;
      degree[i] += c;
      degree[j] += c;
    }
  for (std::size_t i = 0; i < n; ++i) form(i, i) = degree[i];
  return form;
}

AlphaEstimate estimate_alpha(const Generator& gen, const LatticeFunction& steady, const LatticeFunction& dual) {
  require_positive(steady, "steady state");
  require_positive(dual, "dual state");
  const Grid& grid = gen.grid();
  const std::size_t n = gen.size();
  if (n == 1) return AlphaEstimate{std::numeric_limits<double>::infinity(), LatticeFunction(grid, 0.0), 0.0, 0};

  const double mu = grid.cell_measure();
  const Matrix form = dissipation_form(gen, steady, dual);

  // Q(u) = sum w_i u_i^2 with w_i = phi_i N_i mu; work in x = W^{1/2} u.
  std::vector<double> root_w(n), q(n);
  double qnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    root_w[i] = std::sqrt(dual[i] * steady[i] * mu);
    q[i] = root_w[i];
    qnorm += q[i] * q[i];
  }
  qnorm = std::sqrt(qnorm);
  for (double& v : q) v /= qnorm;

  Matrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sym(i, j) = form(i, j) / (root_w[i] * root_w[j]);

  // Gershgorin bound on the spectrum; used to push the constant mode q above
  // every other eigenvalue.
  double bound = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(sym(i, j));
    bound = std::max(bound, row);
  }
  if (bound == 0.0) return AlphaEstimate{0.0, LatticeFunction(grid, 0.0), 0.0, 0};

  auto project = [&](std::vector<double>& x) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += q[i] * x[i];
    for (std::size_t i = 0; i < n; ++i) x[i] -= dot * q[i];
  };
  // Deflated matrix: P S P + bound q q^T (S q = 0 exactly in exact arithmetic).
  Matrix deflated(n, n);
  {
    std::vector<double> sq(n, 0.0);
    double qsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) sq[i] += sym(i, j) * q[j];
      qsq += q[i] * sq[i];
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        deflated(i, j) = sym(i, j) - q[i] * sq[j] - sq[i] * q[j] + (qsq + bound) * q[i] * q[j];
  }

  auto rayleigh = [&](const std::vector<double>& x, std::vector<double>& sx) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sx[i] = 0.0;
      for (std::size_t j = 0; j < n; ++j) sx[i] += deflated(i, j) * x[j];
      num += x[i] * sx[i];
      den += x[i] * x[i];
    }
    return num / den;
  };

  std::optional<Matrix> factor;
  double tau = 1e-10 * bound;
  for (int attempt = 0; attempt < 8 && !factor; ++attempt, tau *= 100.0) {
    Matrix shifted = deflated;
    for (std::size_t i = 0; i < n; ++i) shifted(i, i) += tau;
    factor = detail::cholesky(shifted);
  }
  if (!factor) throw Error(ErrorCode::NonConvergence, "could not factor the dissipation form");

  // Deterministic start with components in every direction.
  std::vector<double> x(n), sx(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.0 + 3.7 * static_cast<double>(i));
  project(x);

  double lambda = std::numeric_limits<double>::infinity();
  double residual = 0.0;
  int it = 0;
  constexpr int kMaxIterations = 20000;
  for (; it < kMaxIterations; ++it) {
    x = detail::cholesky_solve(*factor, std::move(x));
    project(x);
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw Error(ErrorCode::NonConvergence, "inverse iteration collapsed");
    for (double& v : x) v /= norm;
    const double next = rayleigh(x, sx);
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += (sx[i] - next * x[i]) * (sx[i] - next * x[i]);
    residual = std::sqrt(residual);
    const double change = std::abs(lambda - next);
    lambda = next;
    if (residual <= 1e-12 * bound) break;
    // Clustered spectra: the vector wanders inside the cluster but the
    // quotient has settled.
    if (it > 50 && change <= 1e-15 * bound) break;
  }
  if (it == kMaxIterations) throw Error(ErrorCode::NonConvergence, "alpha iteration did not settle");

  LatticeFunction direction(grid);
  for (std::size_t i = 0; i < n; ++i) direction[i] = x[i] / root_w[i];
  return AlphaEstimate{std::max(0.0, lambda), std::move(direction), residual, it + 1};
}

}  // namespace uscatter

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "uscatter/error.hpp"
#include "uscatter/spectral.hpp"

using namespace uscatter;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

// Smallest generalized eigenvalue of D against Q on {u : sum phi N u mu = 0},
// with D(u) = sum_ij K_ij phi_i N_j mu^2 (u_i - u_j)^2 built term by term.
double alpha_oracle(const Generator& gen, const LatticeFunction& steady, const LatticeFunction& dual) {
  const auto n = static_cast<Eigen::Index>(gen.size());
  const double mu = gen.grid().cell_measure();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = dual[i] * steady[i] * mu;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = gen.gain()(i, j) / mu * dual[i] * steady[j] * mu * mu;
      d(i, i) += c;
      d(j, j) += c;
      d(i, j) -= c;
      d(j, i) -= c;
    }
  }
  // Orthonormal basis of the complement of w.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.transpose(), Eigen::ComputeFullV);
  const Eigen::MatrixXd basis = svd.matrixV().rightCols(n - 1);
  const Eigen::MatrixXd a = basis.transpose() * d * basis;
  const Eigen::MatrixXd b = basis.transpose() * w.asDiagonal() * basis;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, b);
  return solver.eigenvalues().minCoeff();
}

double quad(const Generator& gen, const LatticeFunction& steady, const LatticeFunction& dual,
            const std::vector<double>& u, double& q) {
  const double mu = gen.grid().cell_measure();
  double dsum = 0.0;
  q = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    q += dual[i] * steady[i] * u[i] * u[i] * mu;
    for (std::size_t j = 0; j < u.size(); ++j)
      dsum += gen.gain()(i, j) * dual[i] * steady[j] * mu * (u[i] - u[j]) * (u[i] - u[j]);
  }
  return dsum;
}

}  // namespace

TEST_CASE("U4 steady pair") {
  const Generator gen = fixtures::u4_generator();
  const SteadyPair pair = solve_steady_pair(gen);
  for (double v : pair.steady.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
  for (double v : pair.dual.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pair.residual <= 1e-10);
  CHECK(pair.dual_residual <= 1e-10);
  CHECK(compute_rho(pair.dual, fixtures::u4_n0()) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(compute_rho(pair.dual, 2.5 * pair.steady) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("steady states of the constructed kernels") {
  SplitMix64 rng(13);
  for (const Grid& g : fixtures::small_grids()) {
    LatticeFunction target(g);
    for (double& v : target.values()) v = rng.uniform(0.2, 1.0);
    const LatticeFunction normalized = (1.0 / integrate(g, target)) * target;

    Matrix s(g.cell_count(), g.cell_count());
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = i; j < s.cols(); ++j) s(i, j) = s(j, i) = rng.uniform(0.1, 1.0);
    const Generator db = assemble(build_kernel_matrix(KernelSpec::detailed_balance(s, target), g));
    const SteadyPair p = solve_steady_pair(db);
    CHECK(fixtures::max_abs_diff(p.steady, normalized) <= 1e-10);
    for (double v : p.dual.values()) CHECK(v == 1.0);

    LatticeFunction weight(g);
    for (double& v : weight.values()) v = rng.uniform(0.5, 1.5);
    weight *= 1.0 / integrate_product(weight, normalized);
    const Generator proj = assemble(build_kernel_matrix(KernelSpec::projection(weight, normalized, 1.0), g));
    CHECK(fixtures::max_abs_diff(solve_steady(proj), normalized) <= 1e-10);
  }
}

TEST_CASE("dual steady state") {
  SplitMix64 rng(14);
  for (const auto& inst : fixtures::random_suite(8, 3, 0.05)) {
    const LatticeFunction steady = solve_steady(inst.gen);
    CHECK(integrate(inst.grid, steady) == doctest::Approx(1.0).epsilon(1e-14));
    const LatticeFunction dual = solve_dual_steady(inst.gen, steady);
    for (double v : dual.values()) CHECK(v == 1.0);

    // Analytic mode with the column sums is the same operator; the dual comes
    // from inverse iteration on the transpose instead.
    const Generator analytic(inst.grid, inst.gen.gain(), inst.gen.loss(), KMode::Analytic);
    const SteadyPair pa = solve_steady_pair(analytic);
    CHECK(fixtures::max_abs_diff(pa.steady, steady) <= 1e-10);
    for (double v : pa.dual.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("non-conservative analytic generator") {
  // Loss above the column sums: no zero eigenvalue.
  const Grid g = fixtures::u4_grid();
  const Generator leaky =
      assemble(build_kernel_matrix(KernelSpec::constant(1.0), g), KMode::Analytic, LatticeFunction(g, 3.0));
  CHECK(code_of([&] { solve_steady(leaky); }) == ErrorCode::NonConvergence);

  // Raising one loss rate removes the zero eigenvalue.
  SplitMix64 rng(6);
  const Grid g3 = build_grid(3, 1, 1, 1);
  const KernelMatrix km = build_kernel_matrix(fixtures::random_table(g3, rng, 0.1), g3);
  const Generator col = assemble(km);
  LatticeFunction k(g3, col.loss());
  k[0] *= 1.3;
  CHECK(code_of([&] { solve_steady(assemble(km, KMode::Analytic, k)); }) == ErrorCode::NonConvergence);
}

TEST_CASE("reducible generators are rejected") {
  const Grid g = fixtures::u4_grid();
  Matrix m(4, 4, 0.0);
  m(1, 0) = 1.0;  // mass leaves cell 0 and never returns
  m(2, 1) = m(1, 2) = 1.0;
  m(3, 2) = m(2, 3) = 1.0;
  const Generator gen = assemble(build_kernel_matrix(KernelSpec::table(m), g));
  CHECK_FALSE(is_irreducible(gen));
  CHECK(code_of([&] { solve_steady(gen); }) == ErrorCode::NoPositiveSteadyState);
  CHECK(is_irreducible(fixtures::u4_generator()));
}

TEST_CASE("alpha on U4") {
  const Generator gen = fixtures::u4_generator();
  const SteadyPair pair = solve_steady_pair(gen);
  const AlphaEstimate a = estimate_alpha(gen, pair.steady, pair.dual);
  CHECK(a.alpha == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(alpha_oracle(gen, pair.steady, pair.dual) == doctest::Approx(4.0).epsilon(1e-12));
  const AlphaEstimate scaled = estimate_alpha(gen.scaled(3.0), pair.steady, pair.dual);
  CHECK(scaled.alpha == doctest::Approx(12.0).epsilon(1e-12));

  const Grid one = build_grid(2, 1, 0, 0);
  const Generator single = assemble(build_kernel_matrix(KernelSpec::constant(1.0), one));
  const AlphaEstimate inf = estimate_alpha(single, LatticeFunction(one, 1.0), LatticeFunction(one, 1.0));
  CHECK(inf.alpha == std::numeric_limits<double>::infinity());
  CHECK(code_of([&] { estimate_alpha(gen, LatticeFunction(gen.grid(), 0.0), pair.dual); }) ==
        ErrorCode::NonPositiveN);
}

TEST_CASE("alpha matches a generalized eigensolver and bounds the Rayleigh quotient") {
  SplitMix64 rng(27);
  for (const auto& inst : fixtures::random_suite(16, 8, 0.05)) {
    const SteadyPair pair = solve_steady_pair(inst.gen);
    const AlphaEstimate a = estimate_alpha(inst.gen, pair.steady, pair.dual);
    const double oracle = alpha_oracle(inst.gen, pair.steady, pair.dual);
    CHECK(a.alpha > 0.0);
    CHECK(a.alpha == doctest::Approx(oracle).epsilon(1e-8));
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> u(inst.gen.size());
      double mean = 0.0, wsum = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = rng.uniform(-1.0, 1.0);
        const double w = pair.dual[i] * pair.steady[i];
        mean += w * u[i];
        wsum += w;
      }
      for (double& v : u) v -= mean / wsum;
      double q = 0.0;
      const double d = quad(inst.gen, pair.steady, pair.dual, u, q);
      CHECK(d >= a.alpha * q * (1.0 - 1e-10));
    }
  }
}

TEST_CASE("analytic generator with a prescribed steady state has a non-constant dual") {
  SplitMix64 rng(71);
  const Grid g = build_grid(3, 1, 1, 1);
  const KernelMatrix km = build_kernel_matrix(fixtures::random_table(g, rng, 0.1), g);
  LatticeFunction target(g);
  for (double& v : target.values()) v = rng.uniform(0.5, 1.5);
  // k_i = (A N)_i / N_i makes G N = 0 while the column sums differ from k.
  const Generator col = assemble(km);
  LatticeFunction k(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.cell_count(); ++j) s += col.gain()(i, j) * target[j];
    k[i] = s / target[i];
  }
  const Generator analytic = assemble(km, KMode::Analytic, k);
  const SteadyPair pair = solve_steady_pair(analytic);
  CHECK(fixtures::max_abs_diff(pair.steady, (1.0 / integrate(g, target)) * target) <= 1e-10);
  CHECK(integrate_product(pair.dual, pair.steady) == doctest::Approx(1.0).epsilon(1e-14));
  double spread = 0.0;
  for (double v : pair.dual.values()) spread = std::max(spread, std::abs(v - pair.dual[0]));
  CHECK(spread > 1e-3);
  const AlphaEstimate a = estimate_alpha(analytic, pair.steady, pair.dual);
  CHECK(a.alpha > 0.0);
  CHECK(a.alpha == doctest::Approx(alpha_oracle(analytic, pair.steady, pair.dual)).epsilon(1e-8));
}

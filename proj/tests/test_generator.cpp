#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "uscatter/error.hpp"
#include "uscatter/generator.hpp"

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

// max_x sum_y (K(x <- y) - K(y <- x)) mu: row sum minus column sum.
double row_minus_column_oracle(const Matrix& k, double mu) {
  double worst = -1e300;
  for (std::size_t x = 0; x < k.rows(); ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < k.cols(); ++y) s += k(x, y) - k(y, x);
    worst = std::max(worst, s * mu);
  }
  return worst;
}

}  // namespace

TEST_CASE("U4 assembly") {
  const Generator gen = fixtures::u4_generator();
  for (double v : gen.gain().data()) CHECK(v == 0.5);
  for (double k : gen.loss()) CHECK(k == 2.0);
  CHECK(gen.k_mode() == KMode::ColumnSum);

  const Grid g = fixtures::u4_grid();
  const Generator analytic =
      assemble(build_kernel_matrix(KernelSpec::constant(1.0), g), KMode::Analytic, LatticeFunction(g, 2.0));
  CHECK(analytic.gain() == gen.gain());
  CHECK(analytic.loss() == gen.loss());

  CHECK(code_of([&] { assemble(build_kernel_matrix(KernelSpec::constant(1.0), g), KMode::Analytic); }) ==
        ErrorCode::MissingAnalyticK);
  CHECK(code_of([&] {
          assemble(build_kernel_matrix(KernelSpec::constant(1.0), g), KMode::Analytic, LatticeFunction(g, -1.0));
        }) == ErrorCode::NegativeLoss);
}

TEST_CASE("column scaling doubles the loss") {
  const Grid g = fixtures::u4_grid();
  SplitMix64 rng(2);
  const KernelSpec base = fixtures::random_table(g, rng);
  Matrix scaled = std::get<kernels::Table>(base.variant()).entries;
  for (std::size_t i = 0; i < 4; ++i) scaled(i, 2) *= 2.0;
  const Generator a = assemble(build_kernel_matrix(base, g));
  const Generator b = assemble(build_kernel_matrix(KernelSpec::table(scaled), g));
  CHECK(b.loss()[2] == doctest::Approx(2.0 * a.loss()[2]).epsilon(1e-15));
  CHECK(b.loss()[1] == a.loss()[1]);
}

TEST_CASE("apply and apply_dual on U4") {
  const Generator gen = fixtures::u4_generator();
  const Grid g = gen.grid();
  const LatticeFunction c = apply(gen, LatticeFunction(g, 0.7));
  for (double v : c.values()) CHECK(std::abs(v) <= 1e-15);
  const LatticeFunction r = apply(gen, fixtures::u4_n0());
  CHECK(r[0] == -3.0);
  CHECK(r[1] == 1.0);
  CHECK(r[2] == 1.0);
  CHECK(r[3] == 1.0);
  for (double v : apply(gen, LatticeFunction(g)).values()) CHECK(v == 0.0);

  for (double v : apply_dual(gen, LatticeFunction(g, 1.0)).values()) CHECK(v == 0.0);
  for (double v : apply_dual(gen, LatticeFunction(g, 0.0)).values()) CHECK(v == 0.0);
  const Generator analytic =
      assemble(build_kernel_matrix(KernelSpec::constant(1.0), g), KMode::Analytic, LatticeFunction(g, 3.0));
  for (double v : apply_dual(analytic, LatticeFunction(g, 1.0)).values()) CHECK(v == -1.0);

  CHECK(code_of([&] { apply(gen, LatticeFunction(build_grid(3, 1, 1, 1))); }) == ErrorCode::GridMismatch);
}

TEST_CASE("conservation, Metzler structure and duality on random kernels") {
  SplitMix64 rng(99);
  for (const auto& inst : fixtures::random_suite(16, 4, 0.0)) {
    const LatticeFunction f = fixtures::random_signed(inst.grid, rng);
    const LatticeFunction phi = fixtures::random_signed(inst.grid, rng);
    const LatticeFunction gf = apply(inst.gen, f);
    CHECK(std::abs(integrate(inst.grid, gf)) <= 1e-13 * std::max(1.0, integrate_abs(f)) * inst.gen.max_loss());

    double lhs = 0.0, rhs = 0.0;
    const LatticeFunction gphi = apply_dual(inst.gen, phi);
    for (std::size_t i = 0; i < f.size(); ++i) {
      lhs += phi[i] * gf[i];
      rhs += f[i] * gphi[i];
    }
    CHECK(std::abs(lhs - rhs) <= 1e-13 * static_cast<double>(f.size()) * inst.gen.max_loss());

    const LatticeFunction pos = fixtures::random_positive(inst.grid, rng);
    const LatticeFunction gp = apply(inst.gen, pos);
    for (std::size_t i = 0; i < pos.size(); ++i) CHECK(gp[i] >= -inst.gen.max_loss() * pos[i] - 1e-15);

    // Column sums of G are exactly zero in ascending summation order.
    const auto sums = column_sums(inst.gen.gain());
    for (std::size_t j = 0; j < sums.size(); ++j) CHECK(sums[j] == inst.gen.loss()[j]);
  }
}

TEST_CASE("steady residual for the projection and detailed-balance constructions") {
  SplitMix64 rng(21);
  for (const Grid& g : fixtures::small_grids()) {
    LatticeFunction steady = fixtures::random_positive(g, rng);
    LatticeFunction weight(g);
    for (double& v : weight.values()) v = rng.uniform(0.5, 1.5);
    weight *= 1.0 / integrate_product(weight, steady);
    const Generator proj = assemble(build_kernel_matrix(KernelSpec::projection(weight, steady, 1.0), g));
    for (double v : apply(proj, steady).values()) CHECK(std::abs(v) <= 1e-12);

    Matrix s(g.cell_count(), g.cell_count());
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = i; j < s.cols(); ++j) s(i, j) = s(j, i) = rng.uniform(0.1, 1.0);
    const Generator db = assemble(build_kernel_matrix(KernelSpec::detailed_balance(s, steady), g));
    for (double v : apply(db, steady).values()) CHECK(std::abs(v) <= 1e-12);
  }
}

TEST_CASE("rescale") {
  const Grid g = fixtures::u4_grid();
  const KernelSpec ind = KernelSpec::radial(indicator_profile(1.0, 1.0), 0.0, "indicator");
  const Generator unscaled = assemble(build_kernel_matrix(ind, g));
  const Generator l0 = rescale(ind, g, 0);
  CHECK(l0.gain() == unscaled.gain());
  CHECK(l0.loss() == unscaled.loss());

  // Norms {0,2,1,2} scaled by 2 exceed radius 1 off the diagonal.
  const Generator l1 = rescale(ind, g, 1);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(l1.gain()(i, j) == 0.0);
  for (double k : l1.loss()) CHECK(k == 0.0);

  const KernelSpec pw = KernelSpec::radial(power_profile(1.0, -1.0), 0.0, "power");
  for (int level : {0, 1, 2, 3}) {
    const Generator r = rescale(pw, build_grid(3, 1, 1, 1), level);
    const auto sums = column_sums(r.gain());
    for (std::size_t j = 0; j < sums.size(); ++j) CHECK(sums[j] == r.loss()[j]);
    CHECK(r.rescale_level() == level);
  }
  // gain = mu p^{l(n+1)} kappa(r p^l) for kappa(r) = 1/r: p^{l n} mu / r.
  const Generator r2 = rescale(pw, build_grid(3, 1, 1, 1), 2);
  CHECK(r2.gain()(0, 1) == doctest::Approx(9.0 / 3.0 / 3.0).epsilon(1e-15));

  SplitMix64 rng(1);
  CHECK(code_of([&] { rescale(fixtures::random_table(g, rng), g, 1); }) == ErrorCode::NonRadialKernel);
}

TEST_CASE("Lipschitz bound") {
  const Generator gen = fixtures::u4_generator();
  CHECK(l1_lipschitz_bound(gen) == 4.0);
  const Grid g = fixtures::u4_grid();
  CHECK(l1_lipschitz_bound(assemble(build_kernel_matrix(KernelSpec::constant(0.0), g))) == 0.0);
  CHECK(l1_lipschitz_bound(gen.scaled(2.5)) == 10.0);

  // ||G f||_1 <= 2 k_max ||f||_1.
  SplitMix64 rng(8);
  for (const auto& inst : fixtures::random_suite(8, 12, 0.0)) {
    const LatticeFunction f = fixtures::random_signed(inst.grid, rng);
    CHECK(integrate_abs(apply(inst.gen, f)) <= l1_lipschitz_bound(inst.gen) * integrate_abs(f) * (1 + 1e-12));
  }
}

TEST_CASE("regularity constant") {
  const Grid g = fixtures::u4_grid();
  CHECK(regularity_constant(KernelSpec::constant(1.0), g, 0) == 0.0);
  for (int level : {0, 1, 2})
    CHECK(regularity_constant(KernelSpec::radial(power_profile(1.0, 1.0), 0.0), build_grid(3, 1, 1, 1), level) ==
          doctest::Approx(0.0).epsilon(1e-15));

  Matrix perturbed(4, 4, 1.0);
  for (std::size_t j = 0; j < 4; ++j) perturbed(2, j) += 0.5;
  const double l1 = regularity_constant(KernelSpec::table(perturbed), g, 0);
  CHECK(l1 == doctest::Approx(row_minus_column_oracle(perturbed, 0.5)).epsilon(1e-15));
  CHECK(l1 == doctest::Approx(0.75).epsilon(1e-15));

  SplitMix64 rng(5);
  for (const Grid& grid : fixtures::small_grids()) {
    const KernelSpec t = fixtures::random_table(grid, rng);
    const double value = regularity_constant(t, grid, 0);
    CHECK(value >= 0.0);
    CHECK(value == doctest::Approx(row_minus_column_oracle(build_kernel_matrix(t, grid).entries,
                                                           grid.cell_measure()))
                       .epsilon(1e-12));
  }

  const KernelSpec singular = KernelSpec::radial(power_profile(1.0, -1.0), std::nullopt);
  CHECK(code_of([&] { regularity_constant(singular, g, 0); }) == ErrorCode::NonEvaluable);
}

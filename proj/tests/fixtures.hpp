#pragma once

#include <cmath>
#include <vector>

#include "uscatter/dynamics.hpp"
#include "uscatter/generator.hpp"
#include "uscatter/kernel.hpp"
#include "uscatter/padic.hpp"
#include "uscatter/rng.hpp"

namespace fixtures {

using namespace uscatter;

// p = 2, n = 1, M = 1, m = 1 with K = 1.
inline Grid u4_grid() { return build_grid(2, 1, 1, 1); }

inline Generator u4_generator() {
  const Grid g = u4_grid();
  return assemble(build_kernel_matrix(KernelSpec::constant(1.0), g));
}

inline LatticeFunction u4_n0() { return LatticeFunction(u4_grid(), {2.0, 0.0, 0.0, 0.0}); }

// n_i(t) = 0.5 + (f_i - 0.5) e^{-2t} for mass-one data on U4.
inline LatticeFunction u4_exact(const LatticeFunction& f, double t) {
  LatticeFunction out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = 0.5 + (f[i] - 0.5) * std::exp(-2.0 * t);
  return out;
}

// Grids of at most 64 cells used by the randomized suites.
inline std::vector<Grid> small_grids() {
  return {build_grid(2, 1, 1, 1), build_grid(3, 1, 1, 1), build_grid(2, 1, 2, 2), build_grid(2, 2, 1, 1),
          build_grid(5, 1, 1, 0), build_grid(3, 1, 2, 1), build_grid(2, 1, 3, 3), build_grid(7, 1, 0, 1)};
}

// Table kernel with entries in [lo, 1]; lo > 0 gives a strictly positive kernel.
inline KernelSpec random_table(const Grid& g, SplitMix64& rng, double lo = 0.0) {
  const std::size_t n = g.cell_count();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rng.uniform(lo, 1.0);
  return KernelSpec::table(std::move(m));
}

struct Instance {
  Grid grid;
  Generator gen;
};

// count random strictly positive table kernels cycling through small_grids().
inline std::vector<Instance> random_suite(int count, std::uint64_t seed, double lo = 0.05) {
  const auto grids = small_grids();
  std::vector<Instance> out;
  SplitMix64 rng = SplitMix64::stream(seed, 1);
  for (int k = 0; k < count; ++k) {
    const Grid& g = grids[static_cast<std::size_t>(k) % grids.size()];
    out.push_back({g, assemble(build_kernel_matrix(random_table(g, rng, lo), g))});
  }
  return out;
}

inline LatticeFunction random_positive(const Grid& g, SplitMix64& rng) {
  LatticeFunction f(g);
  for (double& v : f.values()) v = rng.uniform();
  f *= 1.0 / integrate(g, f);
  return f;
}

inline LatticeFunction random_signed(const Grid& g, SplitMix64& rng) {
  LatticeFunction f(g);
  for (double& v : f.values()) v = rng.uniform(-1.0, 1.0);
  return f;
}

inline double max_abs_diff(const LatticeFunction& a, const LatticeFunction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fixtures

#pragma once

#include <vector>

#include "uscatter/generator.hpp"

namespace uscatter {

/// Steady state N and dual steady state phi with integral(N) = 1 and
/// integral(N phi) = 1.
struct SteadyPair {
  LatticeFunction steady;
  LatticeFunction dual;
  double residual = 0.0;       // max |apply(gen, N)|
  double dual_residual = 0.0;  // max |apply_dual(gen, phi)|
  bool normalized = true;
};

/// Result of the weighted Poincare constant computation.
struct AlphaEstimate {
  double alpha = 0.0;              // +infinity on a single-cell grid
  LatticeFunction direction;       // minimizing u = m / N
  double residual = 0.0;           // ||S x - alpha x|| of the symmetrized problem
  int iterations = 0;
};

/// True when every cell reaches every other one through positive gain entries.
bool is_irreducible(const Generator& gen);

/// Positive null vector of the generator, normalized to integral 1, by
/// shifted inverse iteration from the uniform start.
LatticeFunction solve_steady(const Generator& gen);

/// Positive null vector of the transpose, normalized so integral(N phi) = 1.
/// In column-sum mode the solution is the constant 1 / integral(N).
LatticeFunction solve_dual_steady(const Generator& gen, const LatticeFunction& steady);

SteadyPair solve_steady_pair(const Generator& gen);

/// rho = integral(phi n0).
double compute_rho(const LatticeFunction& dual, const LatticeFunction& n0);

/// Largest alpha with D(u) >= alpha Q(u) whenever sum phi_i N_i u_i mu = 0,
/// where D(u) = sum_ij K_ij phi_i N_j mu^2 (u_i - u_j)^2 and
/// Q(u) = sum_i phi_i N_i u_i^2 mu.
AlphaEstimate estimate_alpha(const Generator& gen, const LatticeFunction& steady, const LatticeFunction& dual);

/// The symmetric matrix of the quadratic form D (u^T L u = D(u)).
Matrix dissipation_form(const Generator& gen, const LatticeFunction& steady, const LatticeFunction& dual);

}  // namespace uscatter

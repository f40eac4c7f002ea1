#pragma once

#include <string>
#include <vector>

#include "uscatter/dynamics.hpp"
#include "uscatter/spectral.hpp"

namespace uscatter {

/// Convex entropy densities H with derivative H'.
class EntropyFn {
 public:
  enum class Kind { Linear, Abs, Square, PosPartSq, NegPartSq, SmoothedSign };

  static EntropyFn linear() { return EntropyFn(Kind::Linear, 0.0); }
  static EntropyFn abs() { return EntropyFn(Kind::Abs, 0.0); }
  static EntropyFn square() { return EntropyFn(Kind::Square, 0.0); }
  /// (u - c)_+^2
  static EntropyFn pos_part_sq(double c) { return EntropyFn(Kind::PosPartSq, c); }
  /// (c - u)_+^2
  static EntropyFn neg_part_sq(double c) { return EntropyFn(Kind::NegPartSq, c); }
  /// ((u^2 + delta^2)^(1/2) + u) / 2, increasing to u_+ as delta -> 0.
  static EntropyFn smoothed_sign(double delta);

  double value(double u) const noexcept;
  double derivative(double u) const noexcept;

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }
  std::string name() const;

 private:
  EntropyFn(Kind kind, double param) : kind_(kind), param_(param) {}
  Kind kind_;
  double param_;
};

/// sum_i phi_i N_i H(n_i / N_i) mu.
double relative_entropy(const LatticeFunction& dual, const LatticeFunction& steady, const LatticeFunction& n,
                        const EntropyFn& h);

/// sum_ij K_ij phi_i N_j mu^2 [H'(u_i)(u_j - u_i) + H(u_i) - H(u_j)], u = n / N.
double gre_dissipation_rhs(const KernelMatrix& kmat, const LatticeFunction& dual, const LatticeFunction& steady,
                           const LatticeFunction& n, const EntropyFn& h);

/// Same sum using the gain matrix of an assembled generator (gain = K mu).
double gre_dissipation_rhs(const Generator& gen, const LatticeFunction& dual, const LatticeFunction& steady,
                           const LatticeFunction& n, const EntropyFn& h);

struct EntropyProductionReport {
  std::vector<double> times;
  std::vector<double> entropy;       // relative entropy per sample
  std::vector<double> fd_derivative;  // five-point stencil d/dt
  std::vector<double> dissipation;    // gre_dissipation_rhs per sample
  double max_mismatch = 0.0;          // over interior samples
  double max_increase = 0.0;          // largest entropy[k+1] - entropy[k]
  bool identity_holds = true;
  bool non_increasing = true;
};

/// Compares the finite-difference derivative (five-point interpolating stencil,
/// centered in the interior) of the relative entropy with
/// the dissipation sum at interior samples, and checks monotonicity to
/// `monotone_tolerance`.
EntropyProductionReport entropy_production_check(const Trajectory& traj, const Generator& gen,
                                                 const LatticeFunction& dual, const LatticeFunction& steady,
                                                 const EntropyFn& h, double tolerance,
                                                 double monotone_tolerance = 1e-12);

/// Least-squares slope of -log(value) against time.
double fit_decay_rate(std::span<const double> times, std::span<const double> values);

struct DiagnosticsRow {
  double t = 0.0;
  double mass = 0.0;
  double l1 = 0.0;
  double weighted_l2sq = 0.0;  // sum phi_i N_i (h_i / N_i)^2 mu, h = n - rho N
  double rel_entropy_square = 0.0;
  double rel_entropy_abs = 0.0;
  double min_n = 0.0;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
};

/// sum phi_i N_i (h_i/N_i)^2 mu with h = n - rho N and rho = integral(phi n).
double weighted_l2sq(const LatticeFunction& n, const SteadyPair& pair);

DiagnosticsRow diagnostics(double t, const LatticeFunction& n, const SteadyPair& pair);
std::vector<DiagnosticsRow> diagnose(const Trajectory& traj, const SteadyPair& pair);

/// Header of the diagnostics CSV.
inline constexpr const char* kDiagnosticsHeader =
    "t,mass,l1,weighted_l2sq,rel_entropy_square,rel_entropy_abs,min_n,max_ratio,min_ratio";

}  // namespace uscatter

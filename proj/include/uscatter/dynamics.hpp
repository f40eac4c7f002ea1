#pragma once

#include <functional>
#include <vector>

#include "uscatter/generator.hpp"

namespace uscatter {

enum class Method { Rk4, ExpmOracle, Picard };

const char* method_name(Method m) noexcept;

struct IntegratorSpec {
  Method method = Method::Rk4;
  /// Step for rk4 and sample spacing for the other methods; <= 0 selects
  /// min(0.01, 1 / (4 k_max)).
  double dt = 0.0;
  int picard_iterations = 60;
  double expm_tolerance = 1e-16;
};

/// G(t) = modulation(t) * base. Time-independent generators use modulation 1.
struct TimeDependentGenerator {
  Generator base;
  std::function<double(double)> modulation;
  bool autonomous = true;

  double max_loss_at(double t) const { return modulation(t) * base.max_loss(); }
};

TimeDependentGenerator constant_in_time(Generator gen);

/// Assembles the base operator of a (possibly) time-dependent kernel. In
/// analytic mode the supplied k is modulated together with the gain.
TimeDependentGenerator assemble_time_dependent(
    const KernelSpec& spec, const Grid& grid, KMode mode = KMode::ColumnSum,
    const std::optional<LatticeFunction>& analytic_k = std::nullopt);

struct Trajectory {
  std::vector<double> times;
  std::vector<LatticeFunction> states;
};

/// Step size actually used for `integ` on `gen`.
double resolve_dt(const IntegratorSpec& integ, double max_loss);

LatticeFunction step_rk4(const Generator& gen, const LatticeFunction& f, double dt);
/// One rk4 step of the modulated system from time t.
LatticeFunction step_rk4(const TimeDependentGenerator& gen, const LatticeFunction& f, double t, double dt);

/// e^{tG} f by splitting t into substeps with ||h G||_1 <= 1 and summing the
/// Taylor series of each substep until terms fall below `tolerance`.
LatticeFunction expm_apply(const Generator& gen, const LatticeFunction& f, double t,
                           double tolerance = 1e-16);

/// sum_{j <= iterations} (tG)^j f / j!, the Picard iterate of the integral equation.
LatticeFunction picard_iterate(const Generator& gen, const LatticeFunction& f, double t, int iterations);

/// Samples every `sample_every` steps and always at t_end.
Trajectory evolve(const TimeDependentGenerator& gen, const LatticeFunction& n0,
                  const IntegratorSpec& integ, double t_end, int sample_every = 1);
Trajectory evolve(const Generator& gen, const LatticeFunction& n0, const IntegratorSpec& integ,
                  double t_end, int sample_every = 1);

/// Solves the dual equation backward from phi(t_end) = phi_terminal to
/// t_start. Returned times are ascending.
Trajectory evolve_dual(const TimeDependentGenerator& gen, const LatticeFunction& phi_terminal,
                       const IntegratorSpec& integ, double t_start, double t_end, int sample_every = 1);

struct StabilityReport {
  std::vector<double> times;
  std::vector<double> distances;  // integral |n - v|
  double max_increase = 0.0;      // largest distances[k+1] - distances[k]
  bool monotone = true;           // max_increase <= 1e-9
};

StabilityReport run_stability(const Generator& gen, const LatticeFunction& n0, const LatticeFunction& v0,
                              const IntegratorSpec& integ, double t_end, int sample_every = 1);

struct RescaleReport {
  int level = 0;
  std::vector<double> times;
  std::vector<double> l2_norms;  // (sum n_i^2 mu)^(1/2)
  double regularity = 0.0;       // L1
  double max_ratio_to_bound = 0.0;  // max_t ||n(t)|| / (e^{L1 t} ||n0||)
  bool bound_holds = true;
  bool non_increasing = true;
};

/// Evolves under rescale(spec, level). A non-radial kernel is accepted only at
/// level 0, where the unscaled column-sum generator is used.
RescaleReport run_rescaled(const KernelSpec& spec, const Grid& grid, int level, const LatticeFunction& n0,
                           const IntegratorSpec& integ, double t_end, int sample_every = 1);

double l2_norm(const LatticeFunction& f);

}  // namespace uscatter

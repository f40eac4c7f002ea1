#pragma once

#include <optional>
#include <vector>

#include "uscatter/kernel.hpp"

namespace uscatter {

enum class KMode {
  /// k[j] is the column sum of the gain matrix, so mass is conserved exactly.
  ColumnSum,
  /// k is supplied by the caller.
  Analytic,
};

const char* k_mode_name(KMode mode) noexcept;

/// Discretized right-hand side f -> A f - k f of the scattering equation.
/// gain(i, j) = K(y_j, x_i - y_j) * cell_measure.
class Generator {
 public:
  Generator(Grid grid, Matrix gain, std::vector<double> loss, KMode mode, int rescale_level = 0);

  const Grid& grid() const noexcept { return grid_; }
  const Matrix& gain() const noexcept { return gain_; }
  const std::vector<double>& loss() const noexcept { return loss_; }
  KMode k_mode() const noexcept { return mode_; }
  int rescale_level() const noexcept { return rescale_level_; }
  std::size_t size() const noexcept { return loss_.size(); }
  double max_loss() const noexcept;

  /// Same operator multiplied by s >= 0 (used for separable time modulation).
  Generator scaled(double s) const;

 private:
  Grid grid_;
  Matrix gain_;
  std::vector<double> loss_;
  KMode mode_;
  int rescale_level_;
};

/// Column sums in ascending row order.
std::vector<double> column_sums(const Matrix& m);

Generator assemble(const KernelMatrix& kmat, KMode mode = KMode::ColumnSum,
                   const std::optional<LatticeFunction>& analytic_k = std::nullopt);

LatticeFunction apply(const Generator& gen, const LatticeFunction& f);
LatticeFunction apply_dual(const Generator& gen, const LatticeFunction& phi);

/// Raw-buffer forms used by the integrators; out must not alias f.
void apply_into(const Generator& gen, std::span<const double> f, std::span<double> out);
void apply_dual_into(const Generator& gen, std::span<const double> phi, std::span<double> out);

/// Generator of the hyperbolically rescaled equation with eps = p^level
/// (|eps|_p = p^-level): gain (mu / |eps|^(n+1)) * kappa(|x - y|_p / |eps|_p),
/// column-sum loss. Only radial kernels are accepted.
Generator rescale(const KernelSpec& spec, const Grid& grid, int level);

/// 2 * max_j k[j], the L1 Lipschitz constant of the right-hand side.
double l1_lipschitz_bound(const Generator& gen);

/// max_x (1/|eps|_p) * sum_z [K(x - eps z, z) - K(x, z)] * mu, eps = p^level.
double regularity_constant(const KernelSpec& spec, const Grid& grid, int level, double t = 0.0);

}  // namespace uscatter

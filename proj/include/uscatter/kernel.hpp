#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "uscatter/matrix.hpp"
#include "uscatter/padic.hpp"

namespace uscatter {

/// Cross-section K(source, displacement). Every variant samples, for target
/// cell i and source cell j, the value K(y_j, x_i - y_j).
namespace kernels {

struct Constant {
  double value = 1.0;
};

/// K(y, z) = profile(|z|_p). The zero displacement uses `diagonal` when set;
/// otherwise profile(0) is evaluated and must be finite.
struct Radial {
  std::function<double(double)> profile;
  std::optional<double> diagonal = 0.0;
  std::string label = "radial";
};

/// K(y, x - y) = scale * g(y) * g(x) * N(x). The loss rate of this kernel is
/// scale * g, which is the only loss consistent with integrate(g N) = 1.
struct Projection {
  LatticeFunction weight;  // g
  LatticeFunction steady;  // N
  double scale = 1.0;
};

/// K(y, x - y) = Ktilde(x, y) / N(y) with Ktilde symmetric.
struct Symmetric {
  Matrix table;
  LatticeFunction steady;
};

/// Two-point rate K(x <- y) = S(x, y) N(x) with S symmetric, so that
/// K(y <- x) N(x) = K(x <- y) N(y).
struct DetailedBalance {
  Matrix table;
  LatticeFunction steady;
};

/// Explicit sampled matrix, row i = target, column j = source.
struct Table {
  Matrix entries;
};

}  // namespace kernels

class KernelSpec;

namespace kernels {
/// K(t, y, z) = modulation(t) * base(y, z).
struct TimeDependent {
  std::shared_ptr<const KernelSpec> base;
  std::function<double(double)> modulation;
};
}  // namespace kernels

class KernelSpec {
 public:
  using Variant = std::variant<kernels::Constant, kernels::Radial, kernels::Projection,
                               kernels::Symmetric, kernels::DetailedBalance, kernels::Table,
                               kernels::TimeDependent>;

  static KernelSpec constant(double value);
  static KernelSpec radial(std::function<double(double)> profile,
                           std::optional<double> diagonal = 0.0, std::string label = "radial");
  /// Requires integrate(g N) = 1 within 1e-12, g >= 0, N > 0.
  static KernelSpec projection(LatticeFunction weight, LatticeFunction steady, double scale = 1.0);
  static KernelSpec symmetric(Matrix table, LatticeFunction steady);
  static KernelSpec detailed_balance(Matrix table, LatticeFunction steady);
  static KernelSpec table(Matrix entries);
  static KernelSpec time_dependent(KernelSpec base, std::function<double(double)> modulation);

  const Variant& variant() const noexcept { return variant_; }
  /// Constant kernels count as radial (a flat profile).
  bool is_radial() const noexcept {
    return std::holds_alternative<kernels::Radial>(variant_) || std::holds_alternative<kernels::Constant>(variant_);
  }
  bool is_time_dependent() const noexcept {
    return std::holds_alternative<kernels::TimeDependent>(variant_);
  }
  std::string name() const;

 private:
  explicit KernelSpec(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// Sampled K(y_j, x_i - y_j) at time t.
struct KernelMatrix {
  Grid grid;
  Matrix entries;
  double time = 0.0;
};

/// Radial profile at norm r, applying the diagonal policy at r = 0.
double eval_radial(const kernels::Radial& radial, double r);

double eval_kernel(const KernelSpec& spec, const Grid& grid, std::size_t i, std::size_t j,
                   double t = 0.0);

KernelMatrix build_kernel_matrix(const KernelSpec& spec, const Grid& grid, double t = 0.0);

/// Reads a cell_count x cell_count table of nonnegative entries (row i,
/// column j = K(y_j, x_i - y_j)). Lines starting with '#' are skipped.
KernelSpec load_kernel_table_csv(const std::string& path, const Grid& grid);

/// Largest |K(y <- x) N(x) - K(x <- y) N(y)| over all pairs of a sampled matrix.
double detailed_balance_residual(const KernelMatrix& kmat, const LatticeFunction& steady);

// Common radial profiles.
std::function<double(double)> power_profile(double scale, double exponent);
std::function<double(double)> indicator_profile(double scale, double radius);
std::function<double(double)> exponential_profile(double scale, double length);

}  // namespace uscatter

#include "uscatter/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uscatter/error.hpp"

namespace uscatter {

const char* k_mode_name(KMode mode) noexcept {
  return mode == KMode::ColumnSum ? "column_sum" : "analytic";
}

Generator::Generator(Grid grid, Matrix gain, std::vector<double> loss, KMode mode, int rescale_level)
    : grid_(std::move(grid)),
      gain_(std::move(gain)),
      loss_(std::move(loss)),
      mode_(mode),
      rescale_level_(rescale_level) {
  const std::size_t n = grid_.cell_count();
  if (gain_.rows() != n || gain_.cols() != n || loss_.size() != n)
    throw Error(ErrorCode::GridMismatch, "generator dimensions do not match the grid");
  for (double v : loss_)
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::NegativeLoss, "loss rate " + std::to_string(v));
  for (double v : gain_.data())
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::NegativeKernelValue, "gain entry " + std::to_string(v));
}

double Generator::max_loss() const noexcept {
  double best = 0.0;
  for (double v : loss_) best = std::max(best, v);
  return best;
}

Generator Generator::scaled(double s) const {
  Generator out = *this;
  for (std::size_t i = 0; i < out.gain_.rows(); ++i)
    for (double& v : out.gain_.row(i)) v *= s;
  for (double& v : out.loss_) v *= s;
  return out;
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> sums(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += r[j];
  }
  return sums;
}

Generator assemble(const KernelMatrix& kmat, KMode mode, const std::optional<LatticeFunction>& analytic_k) {
  const double mu = kmat.grid.cell_measure();
  Matrix gain = kmat.entries;
  for (std::size_t i = 0; i < gain.rows(); ++i)
    for (double& v : gain.row(i)) v *= mu;

  std::vector<double> loss;
  if (mode == KMode::ColumnSum) {
    loss = column_sums(gain);
  } else {
    if (!analytic_k) throw Error(ErrorCode::MissingAnalyticK, "analytic k-mode needs a loss function");
    require_same_grid(kmat.grid, *analytic_k);
    for (double v : analytic_k->values())
      if (!(v >= 0.0)) throw Error(ErrorCode::NegativeLoss, "analytic loss rate " + std::to_string(v));
    loss.assign(analytic_k->values().begin(), analytic_k->values().end());
  }
  return Generator(kmat.grid, std::move(gain), std::move(loss), mode);
}

void apply_into(const Generator& gen, std::span<const double> f, std::span<double> out) {
  const Matrix& a = gen.gain();
  const auto& k = gen.loss();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * f[j];
    out[i] = s - k[i] * f[i];
  }
}

void apply_dual_into(const Generator& gen, std::span<const double> phi, std::span<double> out) {
  const Matrix& a = gen.gain();
  const auto& k = gen.loss();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const double w = phi[i];
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * w;
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] -= k[j] * phi[j];
}

LatticeFunction apply(const Generator& gen, const LatticeFunction& f) {
  require_same_grid(gen.grid(), f);
  LatticeFunction out(gen.grid());
  apply_into(gen, f.values(), out.values());
  return out;
}

LatticeFunction apply_dual(const Generator& gen, const LatticeFunction& phi) {
  require_same_grid(gen.grid(), phi);
  LatticeFunction out(gen.grid());
  apply_dual_into(gen, phi.values(), out.values());
  return out;
}

Generator rescale(const KernelSpec& spec, const Grid& grid, int level) {
  std::optional<kernels::Radial> flat;
  const auto* radial = std::get_if<kernels::Radial>(&spec.variant());
  if (const auto* c = std::get_if<kernels::Constant>(&spec.variant())) {
    const double v = c->value;
    flat = kernels::Radial{[v](double) { return v; }, v, "constant"};
    radial = &*flat;
  }
  if (!radial) throw Error(ErrorCode::NonRadialKernel, spec.name() + " cannot be rescaled");
  if (level < 0) throw Error(ErrorCode::InvalidArgument, "rescale level must be >= 0");

  const double p = grid.p();
  const double stretch = std::pow(p, level);  // 1 / |eps|_p
  const double factor = grid.cell_measure() * std::pow(stretch, grid.dim() + 1);
  const std::size_t n = grid.cell_count();
  Matrix gain(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      gain(i, j) = factor * eval_radial(*radial, cell_norm(grid, cell_diff(grid, i, j)) * stretch);
  auto loss = column_sums(gain);
  return Generator(grid, std::move(gain), std::move(loss), KMode::ColumnSum, level);
}

double l1_lipschitz_bound(const Generator& gen) { return 2.0 * gen.max_loss(); }

double regularity_constant(const KernelSpec& spec, const Grid& grid, int level, double t) {
  if (level < 0) throw Error(ErrorCode::InvalidArgument, "rescale level must be >= 0");
  KernelMatrix kmat;
  try {
    kmat = build_kernel_matrix(spec, grid, t);
  } catch (const Error& e) {
    throw Error(ErrorCode::NonEvaluable, e.what());
  }
  const std::size_t n = grid.cell_count();
  // K(source s, displacement z) is the sampled entry (s + z, s).
  auto k_at = [&](std::size_t source, const CellCoords& z) {
    return kmat.entries(translate(grid, source, z), source);
  };

  const double inv_eps = std::pow(static_cast<double>(grid.p()), level);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    const CellCoords cx = cell_coords(grid, x);
    double sum = 0.0;
    for (std::size_t zi = 0; zi < n; ++zi) {
      const CellCoords z = cell_coords(grid, zi);
      CellCoords shifted = cx;
      const CellCoords ez = cell_scale_by_p(grid, z, level);
      for (std::size_t a = 0; a < shifted.residues.size(); ++a) {
        const std::int64_t q = grid.cells_per_axis();
        shifted.residues[a] = ((shifted.residues[a] - ez.residues[a]) % q + q) % q;
      }
      sum += k_at(cell_index(grid, shifted), z) - k_at(x, z);
    }
    worst = std::max(worst, inv_eps * sum * grid.cell_measure());
  }
  return worst;
}

}  // namespace uscatter

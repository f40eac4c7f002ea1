#include "uscatter/kernel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "uscatter/error.hpp"

namespace uscatter {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double checked_value(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0)
    throw Error(ErrorCode::NegativeKernelValue,
                std::string(what) + " produced " + std::to_string(v));
  return v;
}

void require_positive(const LatticeFunction& f, const char* what) {
  for (double v : f.values())
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::InvalidKernel, std::string(what) + " must be strictly positive");
}

void require_nonnegative(const Matrix& m, const char* what) {
  for (double v : m.data())
    if (!std::isfinite(v) || v < 0.0)
      throw Error(ErrorCode::NegativeKernelValue, std::string(what) + " has a negative entry");
}

void require_square(const Matrix& m, const LatticeFunction& f, const char* what) {
  if (m.rows() != f.size() || m.cols() != f.size())
    throw Error(ErrorCode::GridMismatch, std::string(what) + " table does not match steady state");
}

void require_table_on(const Matrix& m, const Grid& grid) {
  if (m.rows() != grid.cell_count() || m.cols() != grid.cell_count())
    throw Error(ErrorCode::GridMismatch, "kernel table is " + std::to_string(m.rows()) + "x" +
                                             std::to_string(m.cols()) + ", grid has " +
                                             std::to_string(grid.cell_count()) + " cells");
}

}  // namespace

KernelSpec KernelSpec::constant(double value) {
  checked_value(value, "constant kernel");
  return KernelSpec(kernels::Constant{value});
}

KernelSpec KernelSpec::radial(std::function<double(double)> profile, std::optional<double> diagonal,
                              std::string label) {
  if (!profile) throw Error(ErrorCode::InvalidKernel, "radial kernel needs a profile");
  if (diagonal) checked_value(*diagonal, "radial diagonal policy");
  return KernelSpec(kernels::Radial{std::move(profile), diagonal, std::move(label)});
}

KernelSpec KernelSpec::projection(LatticeFunction weight, LatticeFunction steady, double scale) {
  require_same_grid(weight, steady);
  require_positive(steady, "projection steady state");
  for (double v : weight.values()) checked_value(v, "projection weight");
  checked_value(scale, "projection scale");
  const double norm = integrate_product(weight, steady);
  if (std::abs(norm - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidKernel,
                "projection weight must satisfy integral(g N) = 1, got " + std::to_string(norm));
  return KernelSpec(kernels::Projection{std::move(weight), std::move(steady), scale});
}

KernelSpec KernelSpec::symmetric(Matrix table, LatticeFunction steady) {
  require_square(table, steady, "symmetric");
  require_nonnegative(table, "symmetric kernel");
  if (!table.is_symmetric()) throw Error(ErrorCode::InvalidKernel, "symmetric table is not symmetric");
  require_positive(steady, "symmetric-kernel steady state");
  return KernelSpec(kernels::Symmetric{std::move(table), std::move(steady)});
}

KernelSpec KernelSpec::detailed_balance(Matrix table, LatticeFunction steady) {
  require_square(table, steady, "detailed-balance");
  require_nonnegative(table, "detailed-balance kernel");
  if (!table.is_symmetric())
    throw Error(ErrorCode::InvalidKernel, "detailed-balance table is not symmetric");
  require_positive(steady, "detailed-balance steady state");
  return KernelSpec(kernels::DetailedBalance{std::move(table), std::move(steady)});
}

KernelSpec KernelSpec::table(Matrix entries) {
  if (entries.rows() != entries.cols()) throw Error(ErrorCode::InvalidKernel, "table must be square");
  require_nonnegative(entries, "kernel table");
  return KernelSpec(kernels::Table{std::move(entries)});
}

KernelSpec KernelSpec::time_dependent(KernelSpec base, std::function<double(double)> modulation) {
  if (!modulation) throw Error(ErrorCode::InvalidKernel, "time-dependent kernel needs a modulation");
  if (base.is_time_dependent())
    throw Error(ErrorCode::InvalidKernel, "nested time dependence is not supported");
  return KernelSpec(kernels::TimeDependent{std::make_shared<const KernelSpec>(std::move(base)),
                                           std::move(modulation)});
}

std::string KernelSpec::name() const {
  return std::visit(overloaded{
                        [](const kernels::Constant&) { return std::string("constant"); },
                        [](const kernels::Radial& r) { return r.label; },
                        [](const kernels::Projection&) { return std::string("projection"); },
                        [](const kernels::Symmetric&) { return std::string("symmetric"); },
                        [](const kernels::DetailedBalance&) { return std::string("detailed_balance"); },
                        [](const kernels::Table&) { return std::string("table"); },
                        [](const kernels::TimeDependent& td) { return "time_dependent(" + td.base->name() + ")"; },
                    },
                    variant_);
}

double eval_radial(const kernels::Radial& radial, double r) {
  if (r == 0.0) {
    if (radial.diagonal) return *radial.diagonal;
    const double v = radial.profile(0.0);
    if (!std::isfinite(v))
      throw Error(ErrorCode::DiagonalSingularity,
                  radial.label + " is singular at 0 and no diagonal value was given");
    return checked_value(v, "radial profile");
  }
  return checked_value(radial.profile(r), "radial profile");
}

double eval_kernel(const KernelSpec& spec, const Grid& grid, std::size_t i, std::size_t j, double t) {
  if (i >= grid.cell_count() || j >= grid.cell_count())
    throw Error(ErrorCode::IndexOutOfRange, "kernel indices out of range");
  return std::visit(
      overloaded{
          [](const kernels::Constant& c) { return c.value; },
          [&](const kernels::Radial& r) { return eval_radial(r, cell_norm(grid, cell_diff(grid, i, j))); },
          [&](const kernels::Projection& p) {
            require_same_grid(grid, p.steady);
            return p.scale * p.weight[j] * p.weight[i] * p.steady[i];
          },
          [&](const kernels::Symmetric& s) {
            require_same_grid(grid, s.steady);
            return s.table(i, j) / s.steady[j];
          },
          [&](const kernels::DetailedBalance& d) {
            require_same_grid(grid, d.steady);
            return d.table(i, j) * d.steady[i];
          },
          [&](const kernels::Table& tb) {
            require_table_on(tb.entries, grid);
            return tb.entries(i, j);
          },
          [&](const kernels::TimeDependent& td) {
            const double m = checked_value(td.modulation(t), "time modulation");
            return m * eval_kernel(*td.base, grid, i, j, t);
          },
      },
      spec.variant());
}

KernelMatrix build_kernel_matrix(const KernelSpec& spec, const Grid& grid, double t) {
  const std::size_t n = grid.cell_count();
  if (n > 20000)
    throw Error(ErrorCode::GridTooLarge, "dense kernel matrix limited to 20000 cells");
  KernelMatrix out{grid, Matrix(n, n), t};

  // Radial kernels depend only on the displacement; evaluate each norm once.
  if (const auto* r = std::get_if<kernels::Radial>(&spec.variant())) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.entries(i, j) = eval_radial(*r, cell_norm(grid, cell_diff(grid, i, j)));
    return out;
  }
  if (const auto* td = std::get_if<kernels::TimeDependent>(&spec.variant())) {
    const double m = checked_value(td->modulation(t), "time modulation");
    out.entries = build_kernel_matrix(*td->base, grid, t).entries;
    for (std::size_t i = 0; i < n; ++i)
      for (double& v : out.entries.row(i)) v *= m;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.entries(i, j) = eval_kernel(spec, grid, i, j, t);
  return out;
}

KernelSpec load_kernel_table_csv(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open kernel table " + path);
  const std::size_t n = grid.cell_count();
  Matrix m(n, n);
  std::size_t row = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (row >= n) throw Error(ErrorCode::GridMismatch, path + ": more than " + std::to_string(n) + " rows");
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= n) throw Error(ErrorCode::GridMismatch, path + ": row " + std::to_string(row) + " too long");
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigParse, path + ": bad number '" + cell + "'");
      }
      if (!std::isfinite(v) || v < 0.0)
        throw Error(ErrorCode::NegativeKernelValue,
                    path + ": entry (" + std::to_string(row) + "," + std::to_string(col) +
                        ") = " + cell + " is negative");
      m(row, col++) = v;
    }
    if (col != n) throw Error(ErrorCode::GridMismatch, path + ": row " + std::to_string(row) + " has " +
                                                           std::to_string(col) + " entries");
    ++row;
  }
  if (row != n) throw Error(ErrorCode::GridMismatch, path + ": expected " + std::to_string(n) + " rows");
  return KernelSpec::table(std::move(m));
}

double detailed_balance_residual(const KernelMatrix& kmat, const LatticeFunction& steady) {
  require_same_grid(kmat.grid, steady);
  double worst = 0.0;
  const std::size_t n = steady.size();
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      // Two-point K(y <- x) is the sampled entry (target y, source x).
      const double lhs = kmat.entries(y, x) * steady[x];
      const double rhs = kmat.entries(x, y) * steady[y];
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  return worst;
}

std::function<double(double)> power_profile(double scale, double exponent) {
  return [scale, exponent](double r) { return scale * std::pow(r, exponent); };
}

std::function<double(double)> indicator_profile(double scale, double radius) {
  return [scale, radius](double r) { return r <= radius ? scale : 0.0; };
}

std::function<double(double)> exponential_profile(double scale, double length) {
  return [scale, length](double r) { return scale * std::exp(-r / length); };
}

}  // namespace uscatter

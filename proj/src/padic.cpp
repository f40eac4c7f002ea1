#include "uscatter/padic.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "uscatter/error.hpp"

namespace uscatter {

namespace {

std::int64_t mod_residue(std::int64_t value, std::int64_t modulus) noexcept {
  std::int64_t r = value % modulus;
  return r < 0 ? r + modulus : r;
}

std::int64_t checked_pow(std::int64_t base, int exp, std::int64_t limit, bool& overflow) noexcept {
  std::int64_t result = 1;
  for (int k = 0; k < exp; ++k) {
    if (result > limit / base) {
      overflow = true;
      return 0;
    }
    result *= base;
  }
  return result;
}

}  // namespace

bool is_prime(std::int64_t value) noexcept {
  if (value < 2) return false;
  for (std::int64_t d = 2; d * d <= value; ++d)
    if (value % d == 0) return false;
  return true;
}

Grid build_grid(int p, int n, int outer_level, int inner_level, std::size_t max_cells) {
  if (!is_prime(p)) throw Error(ErrorCode::NonPrimeP, "p = " + std::to_string(p) + " is not prime");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  if (outer_level < 0 || inner_level < 0)
    throw Error(ErrorCode::InvalidArgument, "levels M and m must be >= 0");

  const auto limit = static_cast<std::int64_t>(
      std::min<std::size_t>(max_cells, static_cast<std::size_t>(std::numeric_limits<std::int64_t>::max())));
  bool overflow = false;
  const std::int64_t per_axis = checked_pow(p, outer_level + inner_level, limit, overflow);
  const std::int64_t count = overflow ? 0 : checked_pow(per_axis, n, limit, overflow);
  if (overflow)
    throw Error(ErrorCode::GridTooLarge,
                "cell count exceeds limit " + std::to_string(max_cells));

  Grid g;
  g.p_ = p;
  g.n_ = n;
  g.M_ = outer_level;
  g.m_ = inner_level;
  g.cells_per_axis_ = per_axis;
  g.cell_count_ = static_cast<std::size_t>(count);
  g.cell_measure_ = std::pow(static_cast<double>(p), -static_cast<double>(inner_level) * n);
  return g;
}

std::int64_t Grid::residue(std::size_t index, int axis) const noexcept {
  auto rest = static_cast<std::int64_t>(index);
  for (int a = n_ - 1; a > axis; --a) rest /= cells_per_axis_;
  return rest % cells_per_axis_;
}

std::size_t cell_index(const Grid& grid, const CellCoords& coords) {
  if (coords.residues.size() != static_cast<std::size_t>(grid.dim()))
    throw Error(ErrorCode::IndexOutOfRange, "coordinate rank does not match grid dimension");
  std::int64_t index = 0;
  for (std::int64_t r : coords.residues) {
    if (r < 0 || r >= grid.cells_per_axis())
      throw Error(ErrorCode::IndexOutOfRange, "residue " + std::to_string(r) + " out of range");
    index = index * grid.cells_per_axis() + r;
  }
  return static_cast<std::size_t>(index);
}

CellCoords cell_coords(const Grid& grid, std::size_t index) {
  if (index >= grid.cell_count())
    throw Error(ErrorCode::IndexOutOfRange, "cell index " + std::to_string(index) + " out of range");
  CellCoords c;
  c.residues.resize(static_cast<std::size_t>(grid.dim()));
  auto rest = static_cast<std::int64_t>(index);
  for (int a = grid.dim() - 1; a >= 0; --a) {
    c.residues[static_cast<std::size_t>(a)] = rest % grid.cells_per_axis();
    rest /= grid.cells_per_axis();
  }
  return c;
}

CellCoords cell_diff(const Grid& grid, std::size_t i, std::size_t j) {
  CellCoords a = cell_coords(grid, i);
  const CellCoords b = cell_coords(grid, j);
  for (std::size_t k = 0; k < a.residues.size(); ++k)
    a.residues[k] = mod_residue(a.residues[k] - b.residues[k], grid.cells_per_axis());
  return a;
}

CellCoords cell_add(const Grid& grid, const CellCoords& a, const CellCoords& b) {
  CellCoords c = a;
  for (std::size_t k = 0; k < c.residues.size(); ++k)
    c.residues[k] = mod_residue(a.residues[k] + b.residues[k], grid.cells_per_axis());
  return c;
}

CellCoords cell_scale_by_p(const Grid& grid, const CellCoords& c, int power) {
  CellCoords out = c;
  const std::int64_t q = grid.cells_per_axis();
  for (auto& r : out.residues) {
    for (int k = 0; k < power && r != 0; ++k) r = (r * grid.p()) % q;
  }
  return out;
}

int valuation(std::int64_t value, int p) noexcept {
  int v = 0;
  while (value != 0 && value % p == 0) {
    value /= p;
    ++v;
  }
  return v;
}

double cell_norm(const Grid& grid, const CellCoords& c) {
  double best = 0.0;
  for (std::int64_t r : c.residues) {
    if (r == 0) continue;
    const double norm = std::pow(static_cast<double>(grid.p()),
                                 static_cast<double>(grid.outer_level() - valuation(r, grid.p())));
    if (norm > best) best = norm;
  }
  return best;
}

std::size_t translate(const Grid& grid, std::size_t source, const CellCoords& displacement) {
  return cell_index(grid, cell_add(grid, cell_coords(grid, source), displacement));
}

void require_same_grid(const Grid& grid, const LatticeFunction& f) {
  if (!(f.grid() == grid) || f.size() != grid.cell_count())
    throw Error(ErrorCode::GridMismatch, "lattice function lives on a different grid");
}

void require_same_grid(const LatticeFunction& f, const LatticeFunction& g) {
  require_same_grid(f.grid(), g);
}

double integrate(const Grid& grid, const LatticeFunction& f) {
  require_same_grid(grid, f);
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * grid.cell_measure();
}

double integrate_abs(const LatticeFunction& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += std::abs(v);
  return sum * f.grid().cell_measure();
}

double integrate_product(const LatticeFunction& f, const LatticeFunction& g) {
  require_same_grid(f, g);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += f[i] * g[i];
  return sum * f.grid().cell_measure();
}

LatticeFunction::LatticeFunction(const Grid& grid, double fill)
    : grid_(grid), values_(grid.cell_count(), fill) {}

LatticeFunction::LatticeFunction(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid.cell_count())
    throw Error(ErrorCode::GridMismatch, "expected " + std::to_string(grid.cell_count()) +
                                             " values, got " + std::to_string(values_.size()));
}

LatticeFunction::LatticeFunction(const Grid& grid, std::initializer_list<double> values)
    : LatticeFunction(grid, std::vector<double>(values)) {}

LatticeFunction& LatticeFunction::operator+=(const LatticeFunction& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

LatticeFunction& LatticeFunction::operator-=(const LatticeFunction& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

LatticeFunction& LatticeFunction::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

bool LatticeFunction::all_finite() const noexcept {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace uscatter

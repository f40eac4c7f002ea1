#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace uscatter {

inline constexpr std::size_t kDefaultMaxCells = 1'000'000;

/// Truncated ultrametric lattice: the ball of radius p^M in Q_p^n cut into
/// balls of radius p^-m. A cell coordinate is an integer residue per axis,
/// taken modulo p^(M+m); the representative point is residue * p^-M.
///
/// Haar measure is normalized so that Z_p^n has measure 1, hence each cell
/// has measure p^(-m n) and the whole domain p^(M n).
class Grid {
 public:
  int p() const noexcept { return p_; }
  int dim() const noexcept { return n_; }
  int outer_level() const noexcept { return M_; }
  int inner_level() const noexcept { return m_; }

  std::int64_t cells_per_axis() const noexcept { return cells_per_axis_; }
  std::size_t cell_count() const noexcept { return cell_count_; }
  double cell_measure() const noexcept { return cell_measure_; }
  double total_measure() const noexcept { return cell_measure_ * static_cast<double>(cell_count_); }

  /// Residue of `index` along `axis` (axis 0 is the most significant digit of
  /// the lexicographic enumeration).
  std::int64_t residue(std::size_t index, int axis) const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  friend Grid build_grid(int, int, int, int, std::size_t);

  int p_ = 2;
  int n_ = 1;
  int M_ = 0;
  int m_ = 0;
  std::int64_t cells_per_axis_ = 1;
  std::size_t cell_count_ = 1;
  double cell_measure_ = 1.0;
};

/// Per-axis residues modulo p^(M+m).
struct CellCoords {
  std::vector<std::int64_t> residues;

  friend bool operator==(const CellCoords&, const CellCoords&) = default;
};

/// One real value per cell of a grid, in canonical enumeration order.
class LatticeFunction {
 public:
  explicit LatticeFunction(const Grid& grid, double fill = 0.0);
  LatticeFunction(const Grid& grid, std::vector<double> values);
  LatticeFunction(const Grid& grid, std::initializer_list<double> values);

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> values() const& noexcept { return values_; }
  std::span<double> values() & noexcept { return values_; }
  /// Takes the storage of a temporary, so `for (v : f(x).values())` is safe.
  std::vector<double> values() && noexcept { return std::move(values_); }

  LatticeFunction& operator+=(const LatticeFunction& other);
  LatticeFunction& operator-=(const LatticeFunction& other);
  LatticeFunction& operator*=(double s) noexcept;

  friend LatticeFunction operator+(LatticeFunction a, const LatticeFunction& b) { return a += b; }
  friend LatticeFunction operator-(LatticeFunction a, const LatticeFunction& b) { return a -= b; }
  friend LatticeFunction operator*(double s, LatticeFunction a) { return a *= s; }

  bool all_finite() const noexcept;

 private:
  Grid grid_;
  std::vector<double> values_;
};

bool is_prime(std::int64_t value) noexcept;

/// Throws NonPrimeP, InvalidArgument, or GridTooLarge.
Grid build_grid(int p, int n, int outer_level, int inner_level,
                std::size_t max_cells = kDefaultMaxCells);

std::size_t cell_index(const Grid& grid, const CellCoords& coords);
CellCoords cell_coords(const Grid& grid, std::size_t index);

/// Exact p-adic subtraction of representatives: (r_i - r_j) mod p^(M+m).
CellCoords cell_diff(const Grid& grid, std::size_t i, std::size_t j);
CellCoords cell_add(const Grid& grid, const CellCoords& a, const CellCoords& b);
/// Multiplies every residue by p^power, i.e. the p-adic scalar p^power.
CellCoords cell_scale_by_p(const Grid& grid, const CellCoords& c, int power);

/// p-adic valuation of a nonzero integer.
int valuation(std::int64_t value, int p) noexcept;

/// Max-norm of the representative; the zero coset has norm 0.
double cell_norm(const Grid& grid, const CellCoords& c);

/// Index of the cell reached from `source` by the displacement `displacement`.
std::size_t translate(const Grid& grid, std::size_t source, const CellCoords& displacement);

double integrate(const Grid& grid, const LatticeFunction& f);
double integrate_abs(const LatticeFunction& f);
double integrate_product(const LatticeFunction& f, const LatticeFunction& g);

void require_same_grid(const Grid& grid, const LatticeFunction& f);
void require_same_grid(const LatticeFunction& f, const LatticeFunction& g);

}  // namespace uscatter

#pragma once

// Small dense factorizations used by the spectral solvers.

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "uscatter/matrix.hpp"

namespace uscatter::detail {

/// LU factorization with partial pivoting, stored in place.
class Lu {
 public:
  explicit Lu(Matrix a) : lu_(std::move(a)), pivot_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t best = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(best, k))) best = i;
      pivot_[k] = best;
      if (best != k)
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(best, j));
      const double d = lu_(k, k);
      if (d == 0.0) {
        singular_ = true;
        continue;
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / d;
        lu_(i, k) = f;
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  bool singular() const noexcept { return singular_; }

  std::vector<double> solve(std::vector<double> b) const {
    const std::size_t n = lu_.rows();
    for (std::size_t k = 0; k < n; ++k) std::swap(b[k], b[pivot_[k]]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) b[i] -= lu_(i, j) * b[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) b[i] -= lu_(i, j) * b[j];
      b[i] /= lu_(i, i);
    }
    return b;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> pivot_;
  bool singular_ = false;
};

/// Lower Cholesky factor of a symmetric positive definite matrix, or nullopt.
inline std::optional<Matrix> cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l(i, k) * b[k];
    b[i] /= l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= l(k, i) * b[k];
    b[i] /= l(i, i);
  }
  return b;
}

}  // namespace uscatter::detail

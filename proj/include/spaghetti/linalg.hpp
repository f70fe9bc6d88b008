#pragma once

// Small dense linear algebra for the fits: the least-squares line and
// symmetric positive-definite solves. Sizes are tiny (one row per data point).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spaghetti/errors.hpp"

namespace spaghetti {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Straight line a + b*x.
struct Line {
  double a = 0.0;  ///< intercept
  double b = 0.0;  ///< slope

  double operator()(double x) const noexcept { return a + b * x; }
};

/// Dense row-major matrix.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> multiply(std::span<const double> v) const {
    std::vector<double> out(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * v[c];
      out[r] = acc;
    }
    return out;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Square symmetric matrix. Writes go through set(), which mirrors the entry,
/// so entry(j,k) == entry(k,j) holds bit for bit.
class SymMatrix {
public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t order) : order_(order), data_(order * order, 0.0) {}

  std::size_t order() const noexcept { return order_; }

  double operator()(std::size_t j, std::size_t k) const noexcept { return data_[j * order_ + k]; }

  void set(std::size_t j, std::size_t k, double value) noexcept {
    data_[j * order_ + k] = value;
    data_[k * order_ + j] = value;
  }

  void add_to_diagonal(double value) noexcept {
    for (std::size_t k = 0; k < order_; ++k) data_[k * order_ + k] += value;
  }

  double trace() const noexcept {
    double t = 0.0;
    for (std::size_t k = 0; k < order_; ++k) t += (*this)(k, k);
    return t;
  }

  std::vector<double> multiply(std::span<const double> v) const {
    std::vector<double> out(order_, 0.0);
    for (std::size_t j = 0; j < order_; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < order_; ++k) acc += (*this)(j, k) * v[k];
      out[j] = acc;
    }
    return out;
  }

  /// v' M v
  double quadratic_form(std::span<const double> v) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < order_; ++j) {
      double row = 0.0;
      for (std::size_t k = 0; k < order_; ++k) row += (*this)(j, k) * v[k];
      acc += v[j] * row;
    }
    return acc;
  }

private:
  std::size_t order_ = 0;
  std::vector<double> data_;
};

/// Least-squares line through the points, solved from the 2x2 normal
/// equations in centered form.
inline Line fit_least_squares_line(std::span<const Point> points) {
  if (points.size() < 2) throw DegenerateInput("least-squares line needs at least 2 points");
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw DegenerateInput("least-squares line: non-finite coordinate");
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(points.size());
  const double xm = sx / n;
  const double ym = sy / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : points) {
    const double dx = p.x - xm;
    sxx += dx * dx;
    sxy += dx * (p.y - ym);
  }
  if (!(sxx > 0.0)) throw DegenerateInput("least-squares line: fewer than 2 distinct x values");
  const double b = sxy / sxx;
  return Line{ym - b * xm, b};
}

/// Lower-triangular Cholesky factor of an SPD matrix.
class Cholesky {
public:
  Cholesky() = default;
  explicit Cholesky(const SymMatrix& m) { factor(m); }

  /// Refactors in place, reusing storage. Throws NotPositiveDefinite.
  void factor(const SymMatrix& m) {
    n_ = m.order();
    if (l_.rows() != n_) l_ = Matrix(n_, n_);
    for (std::size_t j = 0; j < n_; ++j) {
      double d = m(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > 0.0) || !std::isfinite(d))
        throw NotPositiveDefinite("nonpositive pivot at row " + std::to_string(j));
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n_; ++i) {
        double s = m(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / ljj;
      }
    }
  }

  /// Overwrites v (holding the right-hand side) with the solution.
  void solve_in_place(std::span<double> v) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double s = v[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * v[k];
      v[i] = s / l_(i, i);
    }
    for (std::size_t i = n_; i-- > 0;) {
      double s = v[i];
      for (std::size_t k = i + 1; k < n_; ++k) s -= l_(k, i) * v[k];
      v[i] = s / l_(i, i);
    }
  }

  std::vector<double> solve(std::span<const double> rhs) const {
    std::vector<double> v(rhs.begin(), rhs.end());
    solve_in_place(v);
    return v;
  }

private:
  std::size_t n_ = 0;
  Matrix l_;
};

namespace detail {

// One step of iterative refinement against the unperturbed matrix.
inline void refine_once(const SymMatrix& m, const Cholesky& factor, std::span<const double> rhs,
                        std::vector<double>& v) {
  const auto mv = m.multiply(v);
  std::vector<double> r(rhs.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - mv[i];
  const auto dv = factor.solve(r);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += dv[i];
}

}  // namespace detail

/// Solves M v = rhs by Cholesky. Throws NotPositiveDefinite on a bad pivot.
inline std::vector<double> solve_spd(const SymMatrix& m, std::span<const double> rhs) {
  if (rhs.size() != m.order()) throw std::invalid_argument("solve_spd: dimension mismatch");
  const Cholesky factor(m);
  auto v = factor.solve(rhs);
  detail::refine_once(m, factor, rhs, v);
  return v;
}

/// solve_spd, retried once with diagonal jitter 1e-10 * mean diagonal when the
/// first factorization fails. The second failure propagates.
inline std::vector<double> solve_spd_jittered(const SymMatrix& m, std::span<const double> rhs) {
  try {
    return solve_spd(m, rhs);
  } catch (const NotPositiveDefinite&) {
    SymMatrix jittered = m;
    const double mean_diag = m.order() ? m.trace() / static_cast<double>(m.order()) : 0.0;
    jittered.add_to_diagonal(1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0));
    const Cholesky factor(jittered);
    auto v = factor.solve(rhs);
    detail::refine_once(m, factor, rhs, v);
    return v;
  }
}

}  // namespace spaghetti

#pragma once

// Penalized fitting of spaghetti functions.
//
// A spaghetti function is a least-squares line plus a weighted sum of Gaussian
// kernels of one shared width sigma, centered on the data x. For fixed
// (lambda, sigma) the weights minimize
//
//     sum_k (y_k - f(x_k))^2 + lambda * A' Omega A
//
// which is the linear system (K'K + lambda Omega) A = K' r, r being the
// residuals from the line. sigma is searched per lambda; lambda is searched per
// left-out point to minimize the error at that point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spaghetti/errors.hpp"
#include "spaghetti/kernel.hpp"
#include "spaghetti/linalg.hpp"
#include "spaghetti/search.hpp"

namespace spaghetti {

/// Observations sorted by strictly increasing x, at least three of them.
class TimeSeries {
public:
  explicit TimeSeries(std::vector<Point> points) : points_(std::move(points)) {
    for (const auto& p : points_)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateInput("time series: non-finite value");
    std::stable_sort(points_.begin(), points_.end(), [](const Point& l, const Point& r) { return l.x < r.x; });
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (points_[i].x == points_[i - 1].x)
        throw DegenerateInput("time series: duplicate x=" + format_x(points_[i].x));
    if (points_.size() < 3)
      throw DegenerateInput("time series: need at least 3 points, got " + std::to_string(points_.size()));
  }

  std::span<const Point> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Point& operator[](std::size_t i) const noexcept { return points_[i]; }

  double span() const noexcept { return points_.back().x - points_.front().x; }

  double max_abs_y() const noexcept {
    double m = 0.0;
    for (const auto& p : points_) m = std::max(m, std::abs(p.y));
    return m;
  }

  /// All points except index i.
  std::vector<Point> without(std::size_t i) const {
    std::vector<Point> out;
    out.reserve(points_.size() - 1);
    for (std::size_t k = 0; k < points_.size(); ++k)
      if (k != i) out.push_back(points_[k]);
    return out;
  }

private:
  static std::string format_x(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  }

  std::vector<Point> points_;
};

struct SpaghettiFunction {
  std::optional<std::size_t> left_out;  ///< unset for the interpolator comparator
  Line line;
  KernelBasis basis;
  std::vector<double> weights;
  double lambda = 0.0;

  double operator()(double x) const {
    double v = line(x);
    for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * kernel_value(basis, k, x);
    return v;
  }
};

inline double evaluate(const SpaghettiFunction& f, double x) { return f(x); }

/// Integrated squared second derivative of f.
inline double roughness(const SpaghettiFunction& f) {
  return roughness_matrix(f.basis).quadratic_form(f.weights);
}

struct LambdaGrid {
  double lo = 1e-6;
  double hi = 1e6;
  int points_per_decade = 8;
};

/// Sigma is searched in [lo_factor * min adjacent gap, hi_factor * span].
struct SigmaRange {
  double lo_factor = 0.25;
  double hi_factor = 2.0;
};

struct FitConfig {
  LambdaGrid lambda_grid;
  SigmaRange sigma_range;
  int refine_iterations = 40;
  int grid_points = 41;  ///< sigma grid size

  void validate() const {
    if (!(lambda_grid.lo > 0.0) || !(lambda_grid.hi > lambda_grid.lo) || !std::isfinite(lambda_grid.hi))
      throw InvalidConfig("lambda grid needs 0 < lo < hi");
    if (lambda_grid.points_per_decade < 1) throw InvalidConfig("lambda points per decade must be >= 1");
    if (!(sigma_range.lo_factor > 0.0) || !(sigma_range.hi_factor > 0.0) || !std::isfinite(sigma_range.hi_factor))
      throw InvalidConfig("sigma factors must be positive");
    if (refine_iterations < 0) throw InvalidConfig("refine iterations must be >= 0");
    if (grid_points < 2) throw InvalidConfig("sigma grid needs at least 2 points");
  }

  std::vector<double> lambda_candidates() const {
    const double decades = std::log10(lambda_grid.hi / lambda_grid.lo);
    const auto count = static_cast<std::size_t>(std::llround(decades * lambda_grid.points_per_decade)) + 1;
    return detail::log_grid(lambda_grid.lo, lambda_grid.hi, std::max<std::size_t>(count, 2));
  }
};

namespace detail {

// Retained points split into columns, with residuals from their line.
struct Retained {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> residuals;
  Line line;
  double scale = 0.0;  // magnitude of the numbers entering the residuals

  explicit Retained(std::span<const Point> points) {
    if (points.size() < 2) throw DegenerateInput("fit needs at least 2 retained points");
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (k > 0 && !(points[k].x > points[k - 1].x))
        throw DegenerateInput("fit needs distinct x in increasing order");
      xs.push_back(points[k].x);
      ys.push_back(points[k].y);
    }
    line = fit_least_squares_line(points);
    double max_x = 0.0;
    double max_y = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      residuals.push_back(ys[k] - line(xs[k]));
      max_x = std::max(max_x, std::abs(xs[k]));
      max_y = std::max(max_y, std::abs(ys[k]));
    }
    scale = max_y + std::abs(line.a) + std::abs(line.b) * max_x;
  }

  double min_gap() const {
    double g = xs[1] - xs[0];
    for (std::size_t k = 2; k < xs.size(); ++k) g = std::min(g, xs[k] - xs[k - 1]);
    return g;
  }
  double span() const { return xs.back() - xs.front(); }

  // Ties below this are rounding noise in the residuals.
  double noise_floor() const {
    const double e = 1e-12 * scale;
    return static_cast<double>(xs.size()) * e * e;
  }
};

struct PenalizedSolution {
  std::vector<double> weights;
  double objective;
};

// Penalized least squares on fixed retained data, for repeated (sigma, lambda)
// evaluations. Buffers are reused between calls.
class PenalizedSystem {
public:
  explicit PenalizedSystem(const Retained& data)
      : data_(data), m_(data.xs.size()), half_(m_), k_(m_), omega_(m_), normal_(m_), rhs_(m_), weights_(m_), scratch_(m_) {}

  /// Solves for the weights and returns the penalized objective.
  /// Throws NotPositiveDefinite when the jitter retry also fails.
  double solve(double sigma, double lambda) {
    assemble(sigma);
    for (std::size_t j = 0; j < m_; ++j) {
      for (std::size_t c = 0; c <= j; ++c) {
        double kk = 0.0;
        for (std::size_t i = 0; i < m_; ++i) kk += k_(i, j) * k_(i, c);
        normal_.set(j, c, kk + lambda * omega_(j, c));
      }
    }
    for (std::size_t j = 0; j < m_; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m_; ++i) acc += k_(j, i) * data_.residuals[i];
      rhs_[j] = acc;
    }
    try {
      factor_.factor(normal_);
      weights_ = rhs_;
      factor_.solve_in_place(weights_);
      // one refinement step
      for (std::size_t j = 0; j < m_; ++j) {
        double acc = rhs_[j];
        for (std::size_t i = 0; i < m_; ++i) acc -= normal_(j, i) * weights_[i];
        scratch_[j] = acc;
      }
      factor_.solve_in_place(scratch_);
      for (std::size_t j = 0; j < m_; ++j) weights_[j] += scratch_[j];
    } catch (const NotPositiveDefinite&) {
      weights_ = solve_spd_jittered(normal_, rhs_);
    }
    double deviation = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      double fitted = 0.0;
      for (std::size_t j = 0; j < m_; ++j) fitted += k_(i, j) * weights_[j];
      const double d = data_.residuals[i] - fitted;
      deviation += d * d;
    }
    return deviation + lambda * omega_.quadratic_form(weights_);
  }

  const std::vector<double>& weights() const noexcept { return weights_; }

  /// d/dsigma of the minimized objective. At the optimal weights only the
  /// explicit dependence of K and Omega on sigma contributes.
  double gradient(double sigma, double lambda) {
    solve(sigma, lambda);
    const double s2 = sigma * sigma;
    const double c = std::sqrt(std::numbers::pi) / (4.0 * s2 * s2);
    double fit_part = 0.0;
    double penalty_part = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      double fitted = 0.0;
      double dfitted = 0.0;
      for (std::size_t j = 0; j < m_; ++j) {
        const double d = data_.xs[i] - data_.xs[j];
        fitted += k_(i, j) * weights_[j];
        dfitted += k_(i, j) * d * d / (s2 * sigma) * weights_[j];
      }
      fit_part -= 2.0 * (data_.residuals[i] - fitted) * dfitted;
      for (std::size_t j = 0; j < m_; ++j) {
        const double d = data_.xs[i] - data_.xs[j];
        const double t = d * d / (2.0 * s2);
        const double domega = c * (((t - 13.0) * t + 33.0) * t - 9.0) * half_(i, j);
        penalty_part += weights_[i] * weights_[j] * domega;
      }
    }
    return fit_part + lambda * penalty_part;
  }

private:
  // K and Omega share exp(-d^2 / (4 sigma^2)), kept in half_: K is its square.
  void assemble(double sigma) {
    const double c = std::sqrt(std::numbers::pi) / (4.0 * sigma * sigma * sigma);
    for (std::size_t j = 0; j < m_; ++j) {
      for (std::size_t i = 0; i <= j; ++i) {
        const double d = data_.xs[j] - data_.xs[i];
        const double u2 = d * d / (2.0 * sigma * sigma);
        const double e = std::exp(-0.5 * u2);
        half_.set(j, i, e);
        k_.set(j, i, e * e);
        omega_.set(j, i, c * (u2 * u2 - 6.0 * u2 + 3.0) * e);
      }
    }
  }

  const Retained& data_;
  std::size_t m_;
  SymMatrix half_;
  SymMatrix k_;
  SymMatrix omega_;
  SymMatrix normal_;
  Cholesky factor_;
  std::vector<double> rhs_;
  std::vector<double> weights_;
  std::vector<double> scratch_;
};

inline PenalizedSolution penalized_solve(const Retained& data, double sigma, double lambda) {
  PenalizedSystem system(data);
  const double objective = system.solve(sigma, lambda);
  return {system.weights(), objective};
}

inline std::pair<double, double> sigma_bounds(const Retained& data, const FitConfig& cfg) {
  const double lo = cfg.sigma_range.lo_factor * data.min_gap();
  const double hi = cfg.sigma_range.hi_factor * data.span();
  if (!(hi > lo)) throw InvalidConfig("sigma search range is empty for this data");
  return {lo, hi};
}

// The objective is flat at its minimum, so rounding noise in its value hides
// the minimizer to about sqrt(eps) relative. The gradient changes sign
// cleanly, so bisect on it from a small bracket around `sigma`. Returns
// `sigma` unchanged when no sign change is found.
inline double polish_sigma(PenalizedSystem& system, double sigma, double lambda, double lo, double hi) {
  auto grad = [&](double s) {
    try {
      return system.gradient(s, lambda);
    } catch (const NotPositiveDefinite&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  double a = sigma;
  double b = sigma;
  double ga = 0.0;
  double gb = 0.0;
  bool bracketed = false;
  for (double step = 1e-6; step < 10.0 && !bracketed; step *= 4.0) {
    a = std::max(lo, sigma * std::exp(-step));
    b = std::min(hi, sigma * std::exp(step));
    ga = grad(a);
    gb = grad(b);
    if (!std::isfinite(ga) || !std::isfinite(gb)) return sigma;
    bracketed = ga < 0.0 && gb > 0.0;
  }
  if (!bracketed) return sigma;
  // Illinois false position: the stale end's gradient is halved.
  int side = 0;
  double last = sigma;
  for (int it = 0; it < 100; ++it) {
    double m = a - ga * (b - a) / (gb - ga);
    if (!(m > a && m < b)) m = 0.5 * (a + b);
    if (!(m > a && m < b)) break;
    const double gm = grad(m);
    if (!std::isfinite(gm)) return sigma;
    last = m;
    if (gm == 0.0) break;
    if (gm < 0.0) {
      a = m;
      ga = gm;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = m;
      gb = gm;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * b) break;
  }
  return last;
}

// Golden section stalls on a flat minimum once rounding noise in the error
// matches its curvature. The vertex of a parabola through the signed error at
// log-spaced neighbours (1e-3 decades apart) pins the minimum down much more
// tightly. Returns nothing when the fit is not a clean minimum or leaves the
// range.
template <class F>
std::optional<Sample> parabolic_vertex(F&& signed_error, double lambda, double lo, double hi) {
  constexpr double h = 1e-3 * std::numbers::ln10;
  const double t0 = std::log(lambda);
  if (t0 - h < std::log(lo) || t0 + h > std::log(hi)) return std::nullopt;
  const double em = signed_error(std::exp(t0 - h));
  const double e0 = signed_error(lambda);
  const double ep = signed_error(std::exp(t0 + h));
  const double curvature = (ep - 2.0 * e0 + em) * (e0 < 0.0 ? -1.0 : 1.0);
  if (!(curvature > 0.0) || (em < 0.0) != (e0 < 0.0) || (ep < 0.0) != (e0 < 0.0)) return std::nullopt;
  const double offset = -h * (ep - em) / (2.0 * (ep - 2.0 * e0 + em));
  if (!(std::abs(offset) <= h)) return std::nullopt;
  const double t = t0 + offset;
  return Sample{std::exp(t), std::abs(signed_error(std::exp(t)))};
}

/// Grid over sigma then golden refinement around the best grid point.
/// `objective(sigma)` returns +inf for rejected candidates.
template <class F>
double search_sigma(F&& objective, double lo, double hi, const FitConfig& cfg, double tie_floor) {
  const auto grid = log_grid(lo, hi, static_cast<std::size_t>(cfg.grid_points));
  SearchTrace trace;
  std::size_t best_k = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = objective(grid[k]);
    trace.add(grid[k], v);
    if (v <= best_v) {
      best_v = v;
      best_k = k;
    }
  }
  if (!std::isfinite(best_v)) throw NotPositiveDefinite("no admissible sigma in the search range");
  if (cfg.refine_iterations > 0) {
    const auto [a, b] = bracket_around(grid, best_k);
    golden_refine(objective, a, b, cfg.refine_iterations, trace);
  }
  const double min_v = trace.best(0.0)->value;
  return trace.best(1e-12 * std::abs(min_v) + tie_floor)->param;
}

}  // namespace detail

/// Objective sum_k (y_k - f(x_k))^2 + lambda * A' Omega A for the given weights.
inline double penalized_objective(std::span<const Point> retained, const Line& line, double sigma,
                                  std::span<const double> weights, double lambda) {
  std::vector<double> xs;
  for (const auto& p : retained) xs.push_back(p.x);
  const KernelBasis basis(std::move(xs), sigma);
  double deviation = 0.0;
  for (const auto& p : retained) {
    double f = line(p.x);
    for (std::size_t k = 0; k < weights.size(); ++k) f += weights[k] * kernel_value(basis, k, p.x);
    deviation += (p.y - f) * (p.y - f);
  }
  return deviation + lambda * roughness_matrix(basis).quadratic_form(weights);
}

/// Kernel weights minimizing the penalized objective for fixed sigma and
/// lambda, with `line` as the baseline.
inline std::vector<double> solve_weights(std::span<const Point> retained, const Line& line, double sigma,
                                         double lambda) {
  if (!(sigma > 0.0)) throw std::invalid_argument("solve_weights: sigma must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_weights: lambda must be >= 0");
  detail::Retained data(retained);
  data.line = line;
  for (std::size_t k = 0; k < data.xs.size(); ++k) data.residuals[k] = data.ys[k] - line(data.xs[k]);
  return detail::penalized_solve(data, sigma, lambda).weights;
}

/// Best (sigma, weights) for a fixed lambda on the retained points. The
/// returned function carries `lambda` but no left-out index.
inline SpaghettiFunction fit_for_lambda(std::span<const Point> retained, double lambda, const FitConfig& cfg) {
  const detail::Retained data(retained);
  const auto [lo, hi] = detail::sigma_bounds(data, cfg);
  detail::PenalizedSystem system(data);
  auto objective = [&](double sigma) {
    try {
      return system.solve(sigma, lambda);
    } catch (const NotPositiveDefinite&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double sigma = detail::search_sigma(objective, lo, hi, cfg, data.noise_floor());
  if (cfg.refine_iterations > 0) {
    const double polished = detail::polish_sigma(system, sigma, lambda, lo, hi);
    const double j_best = objective(sigma);
    if (objective(polished) <= j_best + 1e-12 * std::abs(j_best) + data.noise_floor()) sigma = polished;
  }
  auto solution = detail::penalized_solve(data, sigma, lambda);
  return SpaghettiFunction{std::nullopt, data.line, KernelBasis(data.xs, sigma), std::move(solution.weights),
                           lambda};
}

/// |y_i - f(x_i)|
inline double loo_error(const TimeSeries& series, const SpaghettiFunction& f, std::size_t i) {
  return std::abs(series[i].y - f(series[i].x));
}

/// Tolerance under which two leave-one-out errors count as equal.
inline double lambda_tie_tolerance(const TimeSeries& series) { return 1e-12 * (1.0 + series.max_abs_y()); }

/// Spaghetti function with point i left out and lambda chosen to predict that
/// point with least absolute error. Ties go to the largest lambda.
///
/// The coarse lambda grid is refined by golden section around every local
/// minimum of the error and by bisection across every sign change of the
/// signed error. Each refinement contributes one candidate, so ties are
/// decided between distinct optima rather than between neighbouring samples
/// of one flat minimum.
inline SpaghettiFunction select_lambda_loo(const TimeSeries& series, std::size_t i, const FitConfig& cfg) {
  cfg.validate();
  if (i >= series.size()) throw std::out_of_range("select_lambda_loo: index out of range");
  const auto retained = series.without(i);
  const Point target = series[i];

  auto signed_error = [&](double lambda) { return fit_for_lambda(retained, lambda, cfg)(target.x) - target.y; };
  auto abs_error = [&](double lambda) { return std::abs(signed_error(lambda)); };

  const auto grid = cfg.lambda_candidates();
  std::vector<double> errs(grid.size());
  detail::SearchTrace trace;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    errs[k] = signed_error(grid[k]);
    trace.add(grid[k], std::abs(errs[k]));
  }

  const double tie = lambda_tie_tolerance(series);
  if (cfg.refine_iterations > 0) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double e = std::abs(errs[k]);
      if (e <= tie) continue;  // already as good as it gets
      const bool left_ok = k == 0 || e <= std::abs(errs[k - 1]);
      const bool right_ok = k + 1 == grid.size() || e < std::abs(errs[k + 1]);
      if (left_ok && right_ok) {
        const auto [a, b] = detail::bracket_around(grid, k);
        detail::SearchTrace local;
        detail::golden_refine(abs_error, a, b, cfg.refine_iterations, local);
        auto found = *local.best(0.0);
        const auto vertex = detail::parabolic_vertex(signed_error, found.param, grid.front(), grid.back());
        if (vertex && vertex->value <= found.value + tie) found = *vertex;
        trace.add(found.param, found.value);
      }
    }
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      if (std::abs(errs[k]) <= tie || std::abs(errs[k + 1]) <= tie) continue;
      if ((errs[k] < 0.0) != (errs[k + 1] < 0.0)) {
        detail::SearchTrace local;
        detail::bisect_refine(signed_error, grid[k], grid[k + 1], errs[k], cfg.refine_iterations, local);
        const auto found = *local.best(0.0);
        trace.add(found.param, found.value);
      }
    }
  }

  const double lambda = trace.best(tie)->param;
  auto f = fit_for_lambda(retained, lambda, cfg);
  f.left_out = i;
  return f;
}

/// Least-squares line of all points (zero roughness, least deviation).
inline Line least_squares_comparator(const TimeSeries& series) { return fit_least_squares_line(series.points()); }

/// Least rough interpolator: the least-squares line plus Gaussian kernels that
/// pass through every point, with sigma minimizing the roughness.
inline SpaghettiFunction least_rough_interpolator(const TimeSeries& series, const FitConfig& cfg) {
  cfg.validate();
  const detail::Retained data(series.points());
  const auto [lo, hi] = detail::sigma_bounds(data, cfg);
  // Candidates that cannot reproduce the data to this level are rejected.
  const double interp_tol = 1e-10 * (1.0 + series.max_abs_y());

  auto solve = [&](double sigma) -> std::optional<std::vector<double>> {
    const KernelBasis basis(data.xs, sigma);
    std::vector<double> weights;
    try {
      weights = solve_spd_jittered(gram_matrix(basis), data.residuals);
    } catch (const NotPositiveDefinite&) {
      return std::nullopt;
    }
    const SpaghettiFunction f{std::nullopt, data.line, basis, weights, 0.0};
    for (std::size_t k = 0; k < data.xs.size(); ++k)
      if (!(std::abs(f(data.xs[k]) - data.ys[k]) <= interp_tol)) return std::nullopt;
    return weights;
  };
  auto objective = [&](double sigma) {
    const auto w = solve(sigma);
    if (!w) return std::numeric_limits<double>::infinity();
    return roughness_matrix(KernelBasis(data.xs, sigma)).quadratic_form(*w);
  };
  const double sigma = detail::search_sigma(objective, lo, hi, cfg, data.noise_floor());
  return SpaghettiFunction{std::nullopt, data.line, KernelBasis(data.xs, sigma), *solve(sigma), 0.0};
}

}  // namespace spaghetti

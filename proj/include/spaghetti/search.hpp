#pragma once

// 1-D searches over a positive parameter on a logarithmic scale: a coarse grid,
// then golden-section or bisection refinement inside grid brackets. Every
// evaluated point is recorded; the winner is the smallest value, ties going to
// the largest parameter.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace spaghetti::detail {

struct Sample {
  double param;
  double value;
};

class SearchTrace {
public:
  void add(double param, double value) { samples_.push_back({param, value}); }

  const std::vector<Sample>& samples() const noexcept { return samples_; }

  /// Smallest value; among values within `tie_tolerance` of it, the largest param.
  std::optional<Sample> best(double tie_tolerance) const {
    double min_value = std::numeric_limits<double>::infinity();
    for (const auto& s : samples_)
      if (s.value < min_value) min_value = s.value;
    if (!std::isfinite(min_value)) return std::nullopt;
    std::optional<Sample> pick;
    for (const auto& s : samples_) {
      if (s.value <= min_value + tie_tolerance && (!pick || s.param > pick->param)) pick = s;
    }
    return pick;
  }

private:
  std::vector<Sample> samples_;
};

/// `count` points evenly spaced in log between lo and hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = std::exp(llo + t * (lhi - llo));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

/// Golden-section minimization of f(exp(t)) for t in [log lo, log hi]. Equal
/// values move the bracket toward the larger parameter.
template <class F>
void golden_refine(F&& f, double lo, double hi, int iterations, SearchTrace& trace) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = std::log(lo);
  double b = std::log(hi);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(std::exp(c));
  double fd = f(std::exp(d));
  trace.add(std::exp(c), fc);
  trace.add(std::exp(d), fd);
  for (int it = 0; it < iterations; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(std::exp(c));
      trace.add(std::exp(c), fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(std::exp(d));
      trace.add(std::exp(d), fd);
    }
  }
}

/// Bisection in log space on a sign change of `signed_f` between lo and hi,
/// recording |signed_f|.
template <class F>
void bisect_refine(F&& signed_f, double lo, double hi, double f_lo, int iterations, SearchTrace& trace) {
  double a = std::log(lo);
  double b = std::log(hi);
  for (int it = 0; it < iterations; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = signed_f(std::exp(m));
    trace.add(std::exp(m), std::abs(fm));
    if (!std::isfinite(fm) || fm == 0.0) return;
    if ((fm < 0.0) == (f_lo < 0.0)) {
      a = m;
      f_lo = fm;
    } else {
      b = m;
    }
  }
}

/// Bracket [grid[k-1], grid[k+1]] around grid index k, clamped at the ends.
inline std::pair<double, double> bracket_around(const std::vector<double>& grid, std::size_t k) {
  const std::size_t lo = k == 0 ? 0 : k - 1;
  const std::size_t hi = k + 1 < grid.size() ? k + 1 : grid.size() - 1;
  return {grid[lo], grid[hi]};
}

}  // namespace spaghetti::detail

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "spaghetti/fit.hpp"

namespace spaghetti {

struct Comparators {
  Line g;               ///< least-squares line of all points
  SpaghettiFunction h;  ///< least rough interpolator of all points
};

/// One leave-one-out spaghetti function per point; functions[i] leaves out point i.
struct Ensemble {
  TimeSeries series;
  std::vector<SpaghettiFunction> functions;
  Comparators comparators;
};

struct PredictionBand {
  std::vector<double> xs;
  std::vector<double> mu;
  std::vector<double> s;  ///< population standard deviation
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> median;
};

enum class Execution { sequential, parallel };

/// Fits the n leave-one-out functions and both comparators. Output does not
/// depend on `exec`.
inline Ensemble build_ensemble(const TimeSeries& series, const FitConfig& cfg,
                               Execution exec = Execution::parallel) {
  cfg.validate();
  const std::size_t n = series.size();
  std::vector<SpaghettiFunction> functions;
  functions.reserve(n);
  if (exec == Execution::parallel) {
    std::vector<std::future<SpaghettiFunction>> pending;
    pending.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      pending.push_back(std::async(std::launch::async, [&series, &cfg, i] { return select_lambda_loo(series, i, cfg); }));
    for (auto& p : pending) functions.push_back(p.get());
  } else {
    for (std::size_t i = 0; i < n; ++i) functions.push_back(select_lambda_loo(series, i, cfg));
  }
  Comparators comparators{least_squares_comparator(series), least_rough_interpolator(series, cfg)};
  return Ensemble{series, std::move(functions), std::move(comparators)};
}

inline std::vector<double> linspace(double start, double end, std::size_t count) {
  if (count < 2) throw std::invalid_argument("linspace: count must be >= 2");
  std::vector<double> xs(count);
  const double step = (end - start) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) xs[k] = start + step * static_cast<double>(k);
  xs.back() = end;
  return xs;
}

/// 401 points over [x_1 - span/2, x_n + span/2].
inline std::vector<double> default_grid(const TimeSeries& series, std::size_t count = 401) {
  const double half = 0.5 * series.span();
  return linspace(series.points().front().x - half, series.points().back().x + half, count);
}

namespace detail {

struct PointStats {
  double mean;
  double sd;
  double median;
};

// Values are sorted first, so the result does not depend on input order.
inline PointStats point_stats(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const double nd = static_cast<double>(n);
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / nd;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return {mean, std::sqrt(ss / nd), median};
}

}  // namespace detail

inline PredictionBand band(const Ensemble& e, std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("band: empty grid");
  if (e.functions.empty()) throw std::invalid_argument("band: empty ensemble");
  PredictionBand out;
  out.xs.assign(xs.begin(), xs.end());
  std::vector<double> values(e.functions.size());
  for (double x : xs) {
    if (!std::isfinite(x)) throw std::invalid_argument("band: non-finite grid point");
    for (std::size_t i = 0; i < e.functions.size(); ++i) values[i] = e.functions[i](x);
    const auto st = detail::point_stats(values);
    out.mu.push_back(st.mean);
    out.s.push_back(st.sd);
    out.lower.push_back(st.mean - st.sd);
    out.upper.push_back(st.mean + st.sd);
    out.median.push_back(st.median);
  }
  return out;
}

/// mu(x) - median(x) on the grid; nonzero where the ensemble is skewed.
inline std::vector<double> asymmetry_report(const Ensemble& e, std::span<const double> xs) {
  const auto b = band(e, xs);
  std::vector<double> out(b.xs.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = b.mu[k] - b.median[k];
  return out;
}

/// Mean of the leave-one-out baseline lines at x.
inline double mean_baseline(const Ensemble& e, double x) {
  double acc = 0.0;
  for (const auto& f : e.functions) acc += f.line(x);
  return acc / static_cast<double>(e.functions.size());
}

}  // namespace spaghetti

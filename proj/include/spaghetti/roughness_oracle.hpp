#pragma once

// Quadrature cross-check for roughness_matrix. Not used by the fits.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spaghetti/kernel.hpp"

namespace spaghetti {

/// Second derivative of the unit Gaussian kernel centered at c.
inline double kernel_second_derivative(double c, double sigma, double x) {
  const double u = (x - c) / sigma;
  return (u * u - 1.0) / (sigma * sigma) * std::exp(-0.5 * u * u);
}

/// Adaptive Gauss-Kronrod integral of g_j'' g_k''. Each factor is below
/// 150 exp(-72) / sigma^2 more than 12 sigma from its center, so only the
/// overlap of the two 12-sigma windows is integrated, in panels one sigma wide.
inline double roughness_quadrature_oracle(const KernelBasis& basis, std::size_t j, std::size_t k) {
  const double sigma = basis.sigma();
  const double cj = basis.center(j);
  const double ck = basis.center(k);
  const double lo = std::max(cj, ck) - 12.0 * sigma;
  const double hi = std::min(cj, ck) + 12.0 * sigma;
  if (!(hi > lo)) return 0.0;
  auto integrand = [&](double x) {
    return kernel_second_derivative(cj, sigma, x) * kernel_second_derivative(ck, sigma, x);
  };
  const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / sigma));
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = lo + (hi - lo) * static_cast<double>(p) / static_cast<double>(panels);
    const double b = p + 1 == panels ? hi : lo + (hi - lo) * static_cast<double>(p + 1) / static_cast<double>(panels);
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, a, b, 10, 1e-15);
  }
  return total;
}

}  // namespace spaghetti

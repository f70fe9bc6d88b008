#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "spaghetti/errors.hpp"
#include "spaghetti/linalg.hpp"

namespace spaghetti {

/// Gaussian kernels exp(-(x - c)^2 / (2 sigma^2)) sharing one width, centered
/// on strictly increasing points.
class KernelBasis {
public:
  KernelBasis() = default;

  KernelBasis(std::vector<double> centers, double sigma) : centers_(std::move(centers)), sigma_(sigma) {
    if (!std::isfinite(sigma_) || !(sigma_ > 0.0))
      throw std::invalid_argument("KernelBasis: sigma must be finite and positive");
    for (std::size_t k = 0; k < centers_.size(); ++k) {
      if (!std::isfinite(centers_[k])) throw std::invalid_argument("KernelBasis: non-finite center");
      if (k > 0 && !(centers_[k] > centers_[k - 1]))
        throw std::invalid_argument("KernelBasis: centers must be strictly increasing");
    }
  }

  std::span<const double> centers() const noexcept { return centers_; }
  double center(std::size_t k) const noexcept { return centers_[k]; }
  double sigma() const noexcept { return sigma_; }
  std::size_t size() const noexcept { return centers_.size(); }

private:
  std::vector<double> centers_;
  double sigma_ = 1.0;
};

inline double kernel_value(const KernelBasis& basis, std::size_t k, double x) {
  const double u = (x - basis.center(k)) / basis.sigma();
  return std::exp(-0.5 * u * u);
}

/// entry(j, k) = kernel k evaluated at xs[j]
inline Matrix design_matrix(const KernelBasis& basis, std::span<const double> xs) {
  Matrix k(xs.size(), basis.size());
  for (std::size_t j = 0; j < xs.size(); ++j)
    for (std::size_t c = 0; c < basis.size(); ++c) k(j, c) = kernel_value(basis, c, xs[j]);
  return k;
}

/// Kernel matrix at the centers themselves. Symmetric, unit diagonal.
inline SymMatrix gram_matrix(const KernelBasis& basis) {
  SymMatrix k(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    k.set(j, j, 1.0);
    for (std::size_t c = 0; c < j; ++c) k.set(j, c, kernel_value(basis, c, basis.center(j)));
  }
  return k;
}

/// Integral over the real line of g_j'' * g_k'' for two unit Gaussians of width
/// sigma whose centers are `separation` apart.
///
/// The integral is the fourth derivative of the autocorrelation
/// sigma*sqrt(pi)*exp(-d^2 / (4 sigma^2)), i.e. a Hermite polynomial times a
/// Gaussian in u^2 = d^2 / (2 sigma^2).
inline double roughness_entry(double separation, double sigma) {
  const double u2 = separation * separation / (2.0 * sigma * sigma);
  const double hermite = u2 * u2 - 6.0 * u2 + 3.0;
  return std::sqrt(std::numbers::pi) / (4.0 * sigma * sigma * sigma) * hermite * std::exp(-0.5 * u2);
}

/// Roughness matrix: Omega(j, k) = integral of g_j'' g_k''. The linear part of a
/// spaghetti function has no second derivative, so A' Omega A is its whole
/// roughness.
inline SymMatrix roughness_matrix(const KernelBasis& basis) {
  SymMatrix omega(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t k = 0; k <= j; ++k)
      omega.set(j, k, roughness_entry(basis.center(j) - basis.center(k), basis.sigma()));
  return omega;
}

}  // namespace spaghetti

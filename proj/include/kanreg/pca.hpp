#pragma once

#include <cstddef>
#include <span>

#include "kanreg/linalg.hpp"

namespace kanreg {

/// Fitted principal-component projection.
struct PcaModel {
  Vector mean;         // d
  Matrix components;   // k x d, orthonormal rows
  Vector eigenvalues;  // d, descending
  std::size_t k = 0;
  double tau = 1.0;

  std::size_t input_dim() const noexcept { return mean.size(); }
};

/// Components below this count are never selected (capped at d).
inline constexpr std::size_t kMinComponents = 64;

/// Cumulative explained-variance ratio of the first k eigenvalues.
double variance_ratio(std::span<const double> eigenvalues, std::size_t k);

/// min(d, max(k_var, 64)), k_var the smallest k whose variance ratio reaches
/// tau. tau >= 1 keeps every dimension. Throws DegenerateDataError for an
/// all-zero spectrum.
std::size_t select_k(std::span<const double> eigenvalues, double tau, std::size_t d);

/// Fits on the rows of `data`. When rows <= cols the spectrum comes from the
/// n x n Gram matrix, which shares the nonzero eigenvalues of the covariance.
PcaModel fit_pca(const Matrix& data, double tau);

/// (data - mean) * componentsᵀ.
Matrix transform(const PcaModel& model, const Matrix& data);

}  // namespace kanreg

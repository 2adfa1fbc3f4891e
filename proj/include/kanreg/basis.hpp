#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kanreg/linalg.hpp"

namespace kanreg {

enum class BasisFamily {
  taylor,
  bspline,
  gaussian_rbf,
  bsrbf,
  chebyshev,
  jacobi,
  hermite,
  wavelet_mexican_hat,
  fourier,
};

std::string_view family_name(BasisFamily family) noexcept;
/// Accepts the canonical names above plus "wavelet" and "rbf".
BasisFamily parse_family(std::string_view name);

inline constexpr BasisFamily kAllFamilies[] = {
    BasisFamily::taylor,    BasisFamily::bspline, BasisFamily::gaussian_rbf,
    BasisFamily::bsrbf,     BasisFamily::chebyshev, BasisFamily::jacobi,
    BasisFamily::hermite,   BasisFamily::wavelet_mexican_hat, BasisFamily::fourier,
};

/// Selects a basis family and carries the hyperparameters of every family;
/// only the fields of `family` are read.
struct BasisSpec {
  BasisFamily family = BasisFamily::taylor;
  // Taylor order, or n_max for chebyshev / jacobi / hermite.
  int order = 2;
  double expansion_point = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  int grid_size = 5;
  int degree = 3;
  // Gaussian RBF centers and bandwidth. For bsrbf the RBF part uses these too.
  Vector centers;
  double bandwidth = 0.0;
  int harmonics = 4;

  /// Family defaults: FastKAN-style 8 centers on [-2, 2] for gaussian_rbf,
  /// grid_size + degree centers on [-1, 1] for the bsrbf RBF half.
  static BasisSpec make(BasisFamily family);

  /// Throws ParameterError when the spec violates its family's constraints.
  void validate() const;

  /// True when layer inputs pass through tanh before evaluation.
  bool squashes_input() const noexcept;

  bool operator==(const BasisSpec&) const = default;
};

struct BasisEval {
  Vector values;
  Vector d_values;  // d/dx at the same point
};

BasisEval eval_taylor(double x, int order, double a);
BasisEval eval_chebyshev(double x, int n_max);
BasisEval eval_jacobi(double x, int n_max, double alpha, double beta);
BasisEval eval_hermite(double x, int n_max);
BasisEval eval_gaussian_rbf(double x, std::span<const double> centers, double h);
BasisEval eval_bspline(double x, int grid_size, int degree);
BasisEval eval_bsrbf(double x, const BasisSpec& spec);
BasisEval eval_fourier(double x, int n_harmonics);

/// Mexican-hat wavelet psi((x - shift) / scale) / sqrt(scale) and its partials.
struct WaveletEval {
  double value;
  double d_x;
  double d_scale;
  double d_shift;
};
WaveletEval eval_wavelet(double x, double scale, double shift);

/// Number of basis functions b carried by each edge.
std::size_t basis_size(const BasisSpec& spec);

/// Allocation-free evaluation used by the layers. `values` and `d_values`
/// must hold basis_size(spec) entries. The wavelet family yields the
/// unit-scale, zero-shift mother wavelet.
void evaluate_basis(const BasisSpec& spec, double x, std::span<double> values,
                    std::span<double> d_values);

}  // namespace kanreg

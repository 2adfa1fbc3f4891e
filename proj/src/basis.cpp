#include "kanreg/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kanreg/errors.hpp"

namespace kanreg {

namespace {

struct FamilyName {
  BasisFamily family;
  std::string_view name;
};

constexpr FamilyName kNames[] = {
    {BasisFamily::taylor, "taylor"},
    {BasisFamily::bspline, "bspline"},
    {BasisFamily::gaussian_rbf, "gaussian_rbf"},
    {BasisFamily::bsrbf, "bsrbf"},
    {BasisFamily::chebyshev, "chebyshev"},
    {BasisFamily::jacobi, "jacobi"},
    {BasisFamily::hermite, "hermite"},
    {BasisFamily::wavelet_mexican_hat, "wavelet_mexican_hat"},
    {BasisFamily::fourier, "fourier"},
};

// 2 / sqrt(3 sqrt(pi))
const double kMexicanHatNorm = 2.0 / std::sqrt(3.0 * std::sqrt(std::numbers::pi));

// P_{n+1} from P_n and P_{n-1}, n >= 1.
double jacobi_next(int n, double a, double b, double x, double pn, double pnm1) {
  const double s = 2.0 * n + a + b;
  const double c1 = 2.0 * (n + 1) * (n + a + b + 1) * s;
  const double c2 = (s + 1) * ((s + 2) * s * x + a * a - b * b);
  const double c3 = 2.0 * (n + a) * (n + b) * (s + 2);
  return (c2 * pn - c3 * pnm1) / c1;
}

double jacobi_p1(double a, double b, double x) {
  return (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0;
}

void fill_taylor(double x, int order, double a, std::span<double> v, std::span<double> dv) {
  const double u = x - a;
  double p = 1.0;
  for (int n = 0; n <= order; ++n) {
    v[n] = p;
    p *= u;
  }
  dv[0] = 0.0;
  for (int n = 1; n <= order; ++n) dv[n] = n * v[n - 1];
}

void fill_chebyshev(double x, int n_max, std::span<double> v, std::span<double> dv) {
  // U_{n-1} rolls alongside T_n for the derivative n * U_{n-1}.
  v[0] = 1.0;
  dv[0] = 0.0;
  if (n_max == 0) return;
  v[1] = x;
  dv[1] = 1.0;
  double u_prev = 1.0;     // U_0
  double u_curr = 2.0 * x; // U_1
  for (int n = 2; n <= n_max; ++n) {
    v[n] = 2.0 * x * v[n - 1] - v[n - 2];
    dv[n] = n * u_curr;
    const double u_next = 2.0 * x * u_curr - u_prev;
    u_prev = u_curr;
    u_curr = u_next;
  }
}

void fill_jacobi(double x, int n_max, double a, double b, std::span<double> v,
                 std::span<double> dv) {
  v[0] = 1.0;
  dv[0] = 0.0;
  if (n_max == 0) return;
  v[1] = jacobi_p1(a, b, x);
  // dP_n/dx = (n + a + b + 1) / 2 * P_{n-1}^{(a+1, b+1)}
  double q_prev = 1.0;  // P_0^{(a+1,b+1)}
  double q_curr = jacobi_p1(a + 1.0, b + 1.0, x);
  dv[1] = (1.0 + a + b + 1.0) / 2.0 * q_prev;
  for (int n = 1; n < n_max; ++n) {
    v[n + 1] = jacobi_next(n, a, b, x, v[n], v[n - 1]);
    dv[n + 1] = (n + 1 + a + b + 1.0) / 2.0 * q_curr;
    const double q_next = jacobi_next(n, a + 1.0, b + 1.0, x, q_curr, q_prev);
    q_prev = q_curr;
    q_curr = q_next;
  }
}

void fill_hermite(double x, int n_max, std::span<double> v, std::span<double> dv) {
  v[0] = 1.0;
  dv[0] = 0.0;
  if (n_max == 0) return;
  v[1] = x;
  dv[1] = 1.0;
  for (int n = 1; n < n_max; ++n) {
    v[n + 1] = x * v[n] - n * v[n - 1];
    dv[n + 1] = (n + 1) * v[n];
  }
}

void fill_rbf(double x, std::span<const double> centers, double h, std::span<double> v,
              std::span<double> dv) {
  const double inv_h = 1.0 / h;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double z = (x - centers[i]) * inv_h;
    const double e = std::exp(-z * z);
    v[i] = e;
    dv[i] = -2.0 * z * inv_h * e;
  }
}

void fill_bspline(double x, int grid_size, int degree, std::span<double> v,
                  std::span<double> dv) {
  const double h = 2.0 / grid_size;
  const int n_knots = grid_size + 2 * degree + 1;
  auto knot = [&](int i) { return -1.0 + (i - degree) * h; };

  thread_local std::vector<double> work;
  const int n_cells = n_knots - 1;
  work.assign(static_cast<std::size_t>(n_cells), 0.0);

  // Degree-0 indicators; the right end of [-1, 1] belongs to the last cell.
  int cell = static_cast<int>(std::floor((x - knot(0)) / h));
  if (x >= 1.0 && x <= 1.0 + 1e-12) cell = degree + grid_size - 1;
  if (cell >= 0 && cell < n_cells) work[cell] = 1.0;

  // work[i] holds B_{i,p}; after the loop p = degree. The p = degree-1
  // values are kept for the derivative.
  std::vector<double>* prev = nullptr;
  thread_local std::vector<double> lower;
  for (int p = 1; p <= degree; ++p) {
    if (p == degree) {
      lower = work;
      prev = &lower;
    }
    const int count = n_cells - p;
    for (int i = 0; i < count; ++i) {
      const double left = (x - knot(i)) / (knot(i + p) - knot(i)) * work[i];
      const double right = (knot(i + p + 1) - x) / (knot(i + p + 1) - knot(i + 1)) * work[i + 1];
      work[i] = left + right;
    }
  }

  const int n_basis = grid_size + degree;
  for (int i = 0; i < n_basis; ++i) v[i] = work[i];
  if (degree == 0) {
    std::fill(dv.begin(), dv.begin() + n_basis, 0.0);
    return;
  }
  const auto& low = *prev;
  for (int i = 0; i < n_basis; ++i) {
    const double a = degree / (knot(i + degree) - knot(i)) * low[i];
    const double b = degree / (knot(i + degree + 1) - knot(i + 1)) * low[i + 1];
    dv[i] = a - b;
  }
}

void fill_fourier(double x, int n_harmonics, std::span<double> v, std::span<double> dv) {
  v[0] = 1.0;
  dv[0] = 0.0;
  const double pi = std::numbers::pi;
  for (int n = 1; n <= n_harmonics; ++n) {
    const double w = n * pi;
    const double c = std::cos(w * x);
    const double s = std::sin(w * x);
    v[2 * n - 1] = c;
    v[2 * n] = s;
    dv[2 * n - 1] = -w * s;
    dv[2 * n] = w * c;
  }
}

BasisEval sized(std::size_t b) { return BasisEval{Vector(b), Vector(b)}; }

}  // namespace

std::string_view family_name(BasisFamily family) noexcept {
  for (const auto& entry : kNames)
    if (entry.family == family) return entry.name;
  return "unknown";
}

BasisFamily parse_family(std::string_view name) {
  for (const auto& entry : kNames)
    if (entry.name == name) return entry.family;
  if (name == "wavelet") return BasisFamily::wavelet_mexican_hat;
  if (name == "rbf") return BasisFamily::gaussian_rbf;
  throw ParameterError("unknown basis family '" + std::string(name) + "'");
}

BasisSpec BasisSpec::make(BasisFamily family) {
  BasisSpec s;
  s.family = family;
  switch (family) {
    case BasisFamily::taylor:
      s.order = 2;
      break;
    case BasisFamily::chebyshev:
    case BasisFamily::jacobi:
    case BasisFamily::hermite:
      s.order = 3;
      break;
    case BasisFamily::gaussian_rbf: {
      constexpr int n = 8;
      for (int i = 0; i < n; ++i) s.centers.push_back(-2.0 + 4.0 * i / (n - 1));
      s.bandwidth = 4.0 / (n - 1);
      break;
    }
    case BasisFamily::bsrbf: {
      const int n = s.grid_size + s.degree;
      for (int i = 0; i < n; ++i) s.centers.push_back(-1.0 + 2.0 * i / (n - 1));
      s.bandwidth = 2.0 / (n - 1);
      break;
    }
    default:
      break;
  }
  return s;
}

void BasisSpec::validate() const {
  switch (family) {
    case BasisFamily::taylor:
    case BasisFamily::chebyshev:
    case BasisFamily::hermite:
      if (order < 0) throw ParameterError("basis order must be >= 0");
      break;
    case BasisFamily::jacobi:
      if (order < 0) throw ParameterError("basis order must be >= 0");
      if (!(alpha > -1.0) || !(beta > -1.0))
        throw ParameterError("jacobi alpha and beta must exceed -1");
      break;
    case BasisFamily::bsrbf:
      if (centers.empty()) throw ParameterError("bsrbf needs at least one RBF center");
      if (!(bandwidth > 0.0)) throw ParameterError("RBF bandwidth must be > 0");
      [[fallthrough]];
    case BasisFamily::bspline:
      if (degree < 0) throw ParameterError("bspline degree must be >= 0");
      if (grid_size < degree + 1 || grid_size < 1)
        throw ParameterError("bspline grid_size must be >= degree + 1");
      break;
    case BasisFamily::gaussian_rbf:
      if (centers.empty()) throw ParameterError("gaussian_rbf needs at least one center");
      if (!(bandwidth > 0.0)) throw ParameterError("RBF bandwidth must be > 0");
      break;
    case BasisFamily::fourier:
      if (harmonics < 0) throw ParameterError("fourier harmonics must be >= 0");
      break;
    case BasisFamily::wavelet_mexican_hat:
      break;
  }
}

bool BasisSpec::squashes_input() const noexcept {
  switch (family) {
    case BasisFamily::chebyshev:
    case BasisFamily::jacobi:
    case BasisFamily::hermite:
    case BasisFamily::fourier:
    case BasisFamily::bspline:
    case BasisFamily::bsrbf:
      return true;
    default:
      return false;
  }
}

std::size_t basis_size(const BasisSpec& spec) {
  switch (spec.family) {
    case BasisFamily::taylor:
    case BasisFamily::chebyshev:
    case BasisFamily::jacobi:
    case BasisFamily::hermite:
      return static_cast<std::size_t>(spec.order) + 1;
    case BasisFamily::fourier:
      return 2 * static_cast<std::size_t>(spec.harmonics) + 1;
    case BasisFamily::bspline:
      return static_cast<std::size_t>(spec.grid_size + spec.degree);
    case BasisFamily::gaussian_rbf:
      return spec.centers.size();
    case BasisFamily::bsrbf:
      return static_cast<std::size_t>(spec.grid_size + spec.degree) + spec.centers.size();
    case BasisFamily::wavelet_mexican_hat:
      return 1;
  }
  return 0;
}

void evaluate_basis(const BasisSpec& spec, double x, std::span<double> v, std::span<double> dv) {
  switch (spec.family) {
    case BasisFamily::taylor:
      fill_taylor(x, spec.order, spec.expansion_point, v, dv);
      break;
    case BasisFamily::chebyshev:
      fill_chebyshev(x, spec.order, v, dv);
      break;
    case BasisFamily::jacobi:
      fill_jacobi(x, spec.order, spec.alpha, spec.beta, v, dv);
      break;
    case BasisFamily::hermite:
      fill_hermite(x, spec.order, v, dv);
      break;
    case BasisFamily::gaussian_rbf:
      fill_rbf(x, spec.centers, spec.bandwidth, v, dv);
      break;
    case BasisFamily::bspline:
      fill_bspline(x, spec.grid_size, spec.degree, v, dv);
      break;
    case BasisFamily::bsrbf: {
      const auto nb = static_cast<std::size_t>(spec.grid_size + spec.degree);
      fill_bspline(x, spec.grid_size, spec.degree, v.first(nb), dv.first(nb));
      fill_rbf(x, spec.centers, spec.bandwidth, v.subspan(nb), dv.subspan(nb));
      break;
    }
    case BasisFamily::fourier:
      fill_fourier(x, spec.harmonics, v, dv);
      break;
    case BasisFamily::wavelet_mexican_hat: {
      const auto w = eval_wavelet(x, 1.0, 0.0);
      v[0] = w.value;
      dv[0] = w.d_x;
      break;
    }
  }
}

BasisEval eval_taylor(double x, int order, double a) {
  if (order < 0) throw ParameterError("taylor order must be >= 0");
  auto e = sized(static_cast<std::size_t>(order) + 1);
  fill_taylor(x, order, a, e.values, e.d_values);
  return e;
}

BasisEval eval_chebyshev(double x, int n_max) {
  if (n_max < 0) throw ParameterError("chebyshev n_max must be >= 0");
  auto e = sized(static_cast<std::size_t>(n_max) + 1);
  fill_chebyshev(x, n_max, e.values, e.d_values);
  return e;
}

BasisEval eval_jacobi(double x, int n_max, double alpha, double beta) {
  if (n_max < 0) throw ParameterError("jacobi n_max must be >= 0");
  if (!(alpha > -1.0) || !(beta > -1.0))
    throw ParameterError("jacobi alpha and beta must exceed -1");
  auto e = sized(static_cast<std::size_t>(n_max) + 1);
  fill_jacobi(x, n_max, alpha, beta, e.values, e.d_values);
  return e;
}

BasisEval eval_hermite(double x, int n_max) {
  if (n_max < 0) throw ParameterError("hermite n_max must be >= 0");
  auto e = sized(static_cast<std::size_t>(n_max) + 1);
  fill_hermite(x, n_max, e.values, e.d_values);
  return e;
}

BasisEval eval_gaussian_rbf(double x, std::span<const double> centers, double h) {
  if (!(h > 0.0)) throw ParameterError("gaussian_rbf bandwidth must be > 0");
  auto e = sized(centers.size());
  fill_rbf(x, centers, h, e.values, e.d_values);
  return e;
}

BasisEval eval_bspline(double x, int grid_size, int degree) {
  BasisSpec s;
  s.family = BasisFamily::bspline;
  s.grid_size = grid_size;
  s.degree = degree;
  s.validate();
  auto e = sized(basis_size(s));
  fill_bspline(x, grid_size, degree, e.values, e.d_values);
  return e;
}

BasisEval eval_bsrbf(double x, const BasisSpec& spec) {
  BasisSpec s = spec;
  s.family = BasisFamily::bsrbf;
  s.validate();
  auto e = sized(basis_size(s));
  evaluate_basis(s, x, e.values, e.d_values);
  return e;
}

BasisEval eval_fourier(double x, int n_harmonics) {
  if (n_harmonics < 0) throw ParameterError("fourier harmonics must be >= 0");
  auto e = sized(2 * static_cast<std::size_t>(n_harmonics) + 1);
  fill_fourier(x, n_harmonics, e.values, e.d_values);
  return e;
}

WaveletEval eval_wavelet(double x, double scale, double shift) {
  if (!(scale > 0.0)) throw ParameterError("wavelet scale must be > 0");
  const double inv_sqrt = 1.0 / std::sqrt(scale);
  const double u = (x - shift) / scale;
  const double g = std::exp(-0.5 * u * u);
  const double psi = kMexicanHatNorm * (1.0 - u * u) * g;
  const double dpsi = kMexicanHatNorm * (u * u * u - 3.0 * u) * g;
  WaveletEval w{};
  w.value = inv_sqrt * psi;
  w.d_x = inv_sqrt * dpsi / scale;
  w.d_shift = -w.d_x;
  w.d_scale = -0.5 * w.value / scale - inv_sqrt * dpsi * u / scale;
  return w;
}

}  // namespace kanreg

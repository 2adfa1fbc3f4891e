#include "kanreg/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kanreg/errors.hpp"

namespace kanreg {

namespace {

void normalize(std::span<double> v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
}

// Gram-Schmidt of `v` against the first `count` rows of `basis`, done twice.
double orthogonalize(std::span<double> v, const Matrix& basis, std::size_t count) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t r = 0; r < count; ++r) {
      auto u = basis.row(r);
      const double proj = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * u[i];
    }
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  return std::sqrt(norm);
}

void fix_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0)
    for (auto& x : v) x = -x;
}

}  // namespace

double variance_ratio(std::span<const double> eigenvalues, std::size_t k) {
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateDataError("variance_ratio: all-zero spectrum");
  k = std::min(k, eigenvalues.size());
  const double head = std::accumulate(eigenvalues.begin(), eigenvalues.begin() + k, 0.0);
  return std::min(1.0, head / total);
}

std::size_t select_k(std::span<const double> eigenvalues, double tau, std::size_t d) {
  if (!(tau > 0.0) || tau > 1.0) throw ParameterError("select_k: tau must be in (0, 1]");
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateDataError("select_k: all-zero eigenvalue spectrum");
  if (tau >= 1.0) return d;

  std::size_t k_var = eigenvalues.size();
  double head = 0.0;
  for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
    head += eigenvalues[k];
    if (head / total >= tau) {
      k_var = k + 1;
      break;
    }
  }
  return std::min(d, std::max(k_var, kMinComponents));
}

PcaModel fit_pca(const Matrix& data, double tau) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (n < 2) throw InsufficientDataError("fit_pca: need at least 2 rows");

  PcaModel model;
  model.tau = tau;
  model.mean = column_stats(data).means;

  Matrix centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = data(r, c) - model.mean[c];

  // Candidate directions in descending eigenvalue order; fewer than d when
  // the Gram route is taken.
  Vector values;
  Matrix directions;
  if (n > d) {
    auto eig = sym_eig(covariance(data));
    values = std::move(eig.values);
    directions = std::move(eig.vectors);
  } else {
    Matrix gram = matmul_transposed(centered, centered);
    for (auto& g : gram.data()) g /= static_cast<double>(n - 1);
    // Exact symmetry for the eigensolver's check.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) gram(j, i) = gram(i, j);
    auto eig = sym_eig(gram);
    values.assign(d, 0.0);
    std::copy(eig.values.begin(), eig.values.end(), values.begin());
    // v = Xcᵀ u / sqrt((n - 1) lambda) for numerically nonzero lambda.
    const double cutoff = std::max(eig.values.front(), 0.0) * 1e-10;
    std::size_t usable = 0;
    while (usable < n && eig.values[usable] > cutoff) ++usable;
    directions = Matrix(usable, d);
    for (std::size_t r = 0; r < usable; ++r) {
      auto u = eig.vectors.row(r);
      auto v = directions.row(r);
      for (std::size_t s = 0; s < n; ++s) {
        const double w = u[s];
        auto x = centered.row(s);
        for (std::size_t c = 0; c < d; ++c) v[c] += w * x[c];
      }
      normalize(v);
    }
  }
  for (auto& v : values)
    if (v < 0.0) v = 0.0;
  model.eigenvalues = values;
  model.k = select_k(values, tau, d);

  model.components = Matrix(model.k, d);
  std::size_t filled = 0;
  for (std::size_t r = 0; r < std::min(model.k, directions.rows()); ++r) {
    auto dst = model.components.row(filled);
    auto src = directions.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    if (orthogonalize(dst, model.components, filled) < 1e-6) continue;
    normalize(dst);
    ++filled;
  }
  // Complete with unit axes orthogonal to what is already there.
  for (std::size_t axis = 0; filled < model.k && axis < d; ++axis) {
    auto dst = model.components.row(filled);
    std::fill(dst.begin(), dst.end(), 0.0);
    dst[axis] = 1.0;
    if (orthogonalize(dst, model.components, filled) < 1e-6) continue;
    normalize(dst);
    ++filled;
  }
  for (std::size_t r = 0; r < model.k; ++r) fix_sign(model.components.row(r));
  return model;
}

Matrix transform(const PcaModel& model, const Matrix& data) {
  if (data.cols() != model.input_dim()) {
    throw ShapeError("pca transform: data has " + std::to_string(data.cols()) +
                     " columns, model expects " + std::to_string(model.input_dim()));
  }
  Matrix centered(data.rows(), data.cols());
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c = 0; c < data.cols(); ++c) centered(r, c) = data(r, c) - model.mean[c];
  return matmul_transposed(centered, model.components);
}

}  // namespace kanreg

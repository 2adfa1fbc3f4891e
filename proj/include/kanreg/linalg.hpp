#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kanreg {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  /// Rows picked by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * bᵀ without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

struct ColumnStats {
  Vector means;
  Vector stds;  // population (divide by n)
};

ColumnStats column_stats(const Matrix& m);

/// Sample covariance (divide by n-1) of the columns of `m`.
Matrix covariance(const Matrix& m);

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // row i is the unit eigenvector of values[i]
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues in
/// [-1e-9, 0) are clamped to zero.
EigenDecomposition sym_eig(const Matrix& m);

/// Deterministic generator: xoshiro256** whose state is filled by splitmix64.
///
/// splitmix64:   z = (s += 0x9e3779b97f4a7c15);
///               z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
///               z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
///               return z ^ (z >> 31);
/// xoshiro256**: r = rotl(s1 * 5, 7) * 9; t = s1 << 17;
///               s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
///               s3 = rotl(s3, 45); return r;
///
/// uniform() = (next() >> 11) * 2^-53. normal() is Box-Muller on two
/// uniforms, using the cosine branch only. below(n) is Lemire's
/// multiply-shift with rejection.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  std::uint64_t below(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace kanreg

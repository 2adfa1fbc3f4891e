#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "kanreg/errors.hpp"
#include "kanreg/linalg.hpp"

using namespace kanreg;

namespace {

Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("matmul") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(Matrix::identity(2), a) == a);
  const Matrix b = Matrix::from_rows({{0}, {1}});
  CHECK(matmul(a, b) == Matrix::from_rows({{2}, {4}}));
  CHECK(matmul(a, Matrix(2, 3)) == Matrix(2, 3));
  CHECK_THROWS_AS(matmul(a, Matrix(3, 1)), ShapeError);
  CHECK(matmul_transposed(a, a) == matmul(a, a.transpose()));
}

TEST_CASE("column stats") {
  const auto s = column_stats(Matrix::from_rows({{1, 5}, {2, 5}, {3, 5}}));
  CHECK(s.means[0] == doctest::Approx(2.0));
  CHECK(s.stds[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.means[1] == 5.0);
  CHECK(s.stds[1] == 0.0);

  const auto one = column_stats(Matrix::from_rows({{7, -1}}));
  CHECK(one.means == Vector{7, -1});
  CHECK(one.stds == Vector{0, 0});
  CHECK_THROWS_AS(column_stats(Matrix()), ShapeError);
}

TEST_CASE("covariance") {
  CHECK(covariance(Matrix::from_rows({{1, 2}, {1, 2}})) == Matrix(2, 2));
  CHECK(covariance(Matrix::from_rows({{0, 0}, {2, 2}})) == Matrix::from_rows({{2, 2}, {2, 2}}));
  CHECK_THROWS_AS(covariance(Matrix::from_rows({{1, 2}})), InsufficientDataError);

  Rng rng(3);
  Matrix m(12, 4);
  for (auto& v : m.data()) v = rng.normal();
  const Matrix c = covariance(m);
  const std::vector<std::size_t> perm = {5, 3, 11, 0, 1, 2, 4, 6, 7, 8, 9, 10};
  const Matrix cp = covariance(m.select_rows(perm));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(c(i, j) == doctest::Approx(c(j, i)).epsilon(1e-14));
      CHECK(cp(i, j) == doctest::Approx(c(i, j)).epsilon(1e-12));
    }
  for (double v : sym_eig(c).values) CHECK(v >= -1e-9);
}

TEST_CASE("sym_eig small cases") {
  auto id = sym_eig(Matrix::identity(3));
  for (double v : id.values) CHECK(v == doctest::Approx(1.0));

  auto d = sym_eig(Matrix::from_rows({{1, 0}, {0, 3}}));
  CHECK(d.values[0] == doctest::Approx(3.0));
  CHECK(d.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(0, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(1, 0)) == doctest::Approx(1.0));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), c = rng.uniform(-2, 2);
    const auto e = sym_eig(Matrix::from_rows({{a, b}, {b, c}}));
    const double mid = (a + c) / 2.0;
    const double rad = std::sqrt((a - c) * (a - c) / 4.0 + b * b);
    CHECK(e.values[0] == doctest::Approx(mid + rad).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(mid - rad).epsilon(1e-12));
  }

  CHECK_THROWS_AS(sym_eig(Matrix::from_rows({{1, 2}, {0, 1}})), ContractError);
  CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), ShapeError);
}

TEST_CASE("sym_eig reconstruction and orthonormality") {
  Rng rng(5);
  for (std::size_t n : {1u, 4u, 17u, 40u}) {
    const Matrix m = random_symmetric(n, rng);
    const auto e = sym_eig(m);
    for (std::size_t i = 1; i < n; ++i) CHECK(e.values[i - 1] >= e.values[i]);
    const Matrix vvt = matmul_transposed(e.vectors, e.vectors);
    double worst_orth = 0.0, worst_rec = 0.0, worst_pair = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        worst_orth = std::max(worst_orth, std::abs(vvt(i, j) - (i == j ? 1.0 : 0.0)));
        double rec = 0.0;
        for (std::size_t k = 0; k < n; ++k) rec += e.vectors(k, i) * e.values[k] * e.vectors(k, j);
        worst_rec = std::max(worst_rec, std::abs(rec - m(i, j)));
      }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        double mv = 0.0;
        for (std::size_t j = 0; j < n; ++j) mv += m(i, j) * e.vectors(k, j);
        worst_pair = std::max(worst_pair, std::abs(mv - e.values[k] * e.vectors(k, i)));
      }
    CHECK(worst_orth < 1e-8);
    CHECK(worst_rec < 1e-7);
    CHECK(worst_pair < 1e-8);
  }
}

TEST_CASE("rng matches the documented update equations") {
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  std::uint64_t sm = 1234;
  auto splitmix = [&] {
    std::uint64_t z = (sm += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s[4];
  for (auto& w : s) w = splitmix();
  Rng rng(1234);
  for (int i = 0; i < 50; ++i) {
    const std::uint64_t r = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    CHECK(rng.next() == r);
  }
}

TEST_CASE("rng streams") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);

  Rng u(9);
  double mean = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = u.normal();
    mean += v;
    sq += v * v;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);

  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(u.below(7) < 7);
  }

  std::vector<int> v = {0, 1, 2, 3, 4, 5, 6, 7};
  Rng s(1);
  s.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

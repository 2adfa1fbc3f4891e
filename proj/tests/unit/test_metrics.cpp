#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kanreg/errors.hpp"
#include "kanreg/linalg.hpp"
#include "kanreg/metrics.hpp"

using namespace kanreg;

namespace {

// Two-pass definitional Pearson correlation.
double pearson_oracle(const Vector& a, const Vector& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

// Quadratic-time average ranks: 1 + #smaller + (#equal - 1) / 2.
Vector rank_oracle(const Vector& v) {
  Vector r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

}  // namespace

TEST_CASE("plcc basics") {
  CHECK(plcc(Vector{1, 2, 3}, Vector{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(plcc(Vector{1, 2, 3}, Vector{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(plcc(Vector{1, 1, 1}, Vector{1, 2, 3}), UndefinedCorrelationError);
  CHECK_THROWS_AS(plcc(Vector{1, 2}, Vector{1, 2}), ShapeError);
  CHECK_THROWS_AS(plcc(Vector{1, 2, 3}, Vector{1, 2}), ShapeError);

  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    Vector x(30);
    for (auto& v : x) v = rng.normal();
    const double a = rng.uniform(0.1, 5), b = rng.uniform(-3, 3);
    Vector y(30), z(30);
    for (std::size_t i = 0; i < 30; ++i) {
      y[i] = a * x[i] + b;
      z[i] = -a * x[i] + b;
    }
    CHECK(std::abs(plcc(x, y) - 1.0) <= 1e-12);
    CHECK(std::abs(plcc(x, z) + 1.0) <= 1e-12);
  }
}

TEST_CASE("plcc and srcc match definitional oracles on random vectors with ties") {
  Rng rng(2);
  double worst_p = 0.0, worst_s = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.below(90);
    Vector a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Rounded values so that ties occur.
      a[i] = std::round(rng.normal() * 4.0) / 4.0;
      b[i] = trial % 2 ? rng.normal() : std::round(rng.uniform(0, 6));
    }
    if (*std::min_element(a.begin(), a.end()) == *std::max_element(a.begin(), a.end())) continue;
    worst_p = std::max(worst_p, std::abs(plcc(a, b) - pearson_oracle(a, b)));
    worst_s = std::max(worst_s, std::abs(srcc(a, b) - pearson_oracle(rank_oracle(a), rank_oracle(b))));
  }
  CHECK(worst_p <= 1e-12);
  CHECK(worst_s <= 1e-12);
}

TEST_CASE("srcc") {
  CHECK(srcc(Vector{1, 2, 3}, Vector{10, 100, 1000}) == doctest::Approx(1.0));
  CHECK(average_ranks(Vector{1, 1, 2}) == Vector{1.5, 1.5, 3});
  CHECK(average_ranks(Vector{5, -1, 5, 5}) == Vector{3, 1, 3, 3});
  const Vector a = {1, 1, 2}, b = {1, 2, 3};
  CHECK(std::abs(srcc(a, b) - pearson_oracle(rank_oracle(a), rank_oracle(b))) <= 1e-12);
  CHECK_THROWS_AS(srcc(Vector{2, 2, 2}, Vector{1, 2, 3}), UndefinedCorrelationError);

  Rng rng(3);
  Vector x(40), y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] + rng.normal();
  }
  Vector fx(40);
  for (std::size_t i = 0; i < 40; ++i) fx[i] = std::exp(3 * x[i]) + x[i];
  CHECK(srcc(fx, y) == doctest::Approx(srcc(x, y)).epsilon(1e-14));
  CHECK(std::abs(srcc(x, y) - plcc(average_ranks(x), average_ranks(y))) <= 1e-12);
}

TEST_CASE("incomplete beta and t distribution against reference values") {
  // Reference values from an independent implementation (SciPy).
  CHECK(incomplete_beta(2.5, 3.0, 0.4) == doctest::Approx(0.4123610068859569).epsilon(1e-12));
  CHECK(incomplete_beta(0.5, 0.5, 0.9) == doctest::Approx(0.7951672353008665).epsilon(1e-12));
  CHECK(incomplete_beta(10, 20, 0.3) == doctest::Approx(0.3640040810719437).epsilon(1e-12));
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  CHECK(student_t_cdf(2.262157, 9) == doctest::Approx(0.9749999933477842).epsilon(1e-10));
  CHECK(student_t_cdf(-1.3, 4) == doctest::Approx(0.13172579823561206).epsilon(1e-10));
  CHECK(student_t_cdf(0.7, 30) == doctest::Approx(0.7553397782501642).epsilon(1e-10));
  CHECK(student_t_cdf(0.0, 7) == doctest::Approx(0.5));
}

TEST_CASE("paired t-test") {
  const Vector a = {1, 2, 3, 4, 5};
  auto r = paired_t_test(a, a);
  CHECK(r.t == 0.0);
  CHECK(r.p == 1.0);
  CHECK_FALSE(r.significant);

  r = paired_t_test(Vector{1, 0, 1, 0}, Vector{0, 1, 0, 1});
  CHECK(r.t == 0.0);
  CHECK_FALSE(r.significant);

  r = paired_t_test(Vector{2, 3, 4}, Vector{1, 2, 3});
  CHECK(std::isinf(r.t));
  CHECK(r.t > 0);
  CHECK(r.p == 0.0);
  CHECK(r.significant);

  // Ten differences built to give t = 2.262157 (two-sided 0.05 at 9 df).
  Vector d = {1, -1, 1, -1, 1, -1, 1, -1, 1, -1};
  const double sd = std::sqrt(10.0 / 9.0);
  const double shift = 2.262157 * sd / std::sqrt(10.0);
  Vector x(10), zero(10, 0.0);
  for (std::size_t i = 0; i < 10; ++i) x[i] = d[i] + shift;
  r = paired_t_test(x, zero);
  CHECK(r.df == 9.0);
  CHECK(r.t == doctest::Approx(2.262157).epsilon(1e-9));
  CHECK(std::abs(r.p - 0.05) <= 1e-3);

  const auto swapped = paired_t_test(zero, x);
  CHECK(swapped.t == doctest::Approx(-r.t));
  CHECK(swapped.p == doctest::Approx(r.p));
  CHECK_THROWS_AS(paired_t_test(Vector{1}, Vector{2}), ShapeError);
  CHECK_THROWS_AS(paired_t_test(Vector{1, 2}, Vector{2}), ShapeError);
}

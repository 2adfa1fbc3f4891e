#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "kanreg/linalg.hpp"

namespace kanreg {

/// Pearson linear correlation. Throws UndefinedCorrelationError when either
/// input is constant, ShapeError on length mismatch or fewer than 3 pairs.
double plcc(std::span<const double> pred, std::span<const double> truth);

/// Spearman rank correlation: Pearson of average-tie ranks.
double srcc(std::span<const double> pred, std::span<const double> truth);

/// 1-based ranks; tied values share the mean of their positions.
Vector average_ranks(std::span<const double> values);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  bool significant = false;  // p < 0.05
};

/// Paired two-sample t-test on a - b, two-sided.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct EvalReport {
  double plcc = 0.0;
  double srcc = 0.0;
  std::size_t n = 0;
  double train_seconds = 0.0;
  std::optional<TTestResult> significance;
};

}  // namespace kanreg

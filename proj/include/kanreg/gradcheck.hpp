#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "kanreg/linalg.hpp"
#include "kanreg/network.hpp"

namespace kanreg {

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t within_tight = 0;  // relative error <= tight
  std::size_t within_loose = 0;  // relative error <= loose
  double worst = 0.0;

  double tight_fraction() const {
    return checked == 0 ? 1.0 : static_cast<double>(within_tight) / static_cast<double>(checked);
  }
};

/// Relative error |a - n| / max(|a|, |n|), with differences below `floor`
/// in absolute terms counted as exact.
inline double relative_error(double analytic, double numeric, double floor = 1e-9) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= floor) return 0.0;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

/// Compares backward() against central differences of the scalar
/// sum_s weights[s] * out_s for every parameter of `net`.
template <typename Net>
GradCheckReport gradient_check(Net& net, const Matrix& batch, const Vector& weights,
                               double step = 1e-5, double tight = 1e-4, double loose = 1e-3) {
  auto objective = [&] {
    const Vector out = predict(net, batch);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * out[i];
    return s;
  };
  const auto fwd = forward(net, batch);
  const GradientSet grads = backward(net, fwd.cache, weights);

  GradCheckReport report;
  auto blocks = net.parameter_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t p = 0; p < blocks[b].size(); ++p) {
      double& param = blocks[b][p];
      const double saved = param;
      param = saved + step;
      const double up = objective();
      param = saved - step;
      const double down = objective();
      param = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(grads.blocks[b][p], numeric);
      ++report.checked;
      report.within_tight += err <= tight;
      report.within_loose += err <= loose;
      report.worst = std::max(report.worst, err);
    }
  }
  return report;
}

}  // namespace kanreg

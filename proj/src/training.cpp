#include "kanreg/training.hpp"

#include <cmath>

namespace kanreg {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ParameterError("lr must be > 0");
  if (patience < 1) throw ParameterError("patience must be >= 1");
  if (max_epochs < 1) throw ParameterError("max_epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (lr_grid.empty()) throw ParameterError("learning-rate grid must not be empty");
  for (double g : lr_grid)
    if (!(g > 0.0)) throw ParameterError("learning rates in the grid must be > 0");
  if (!(l1_lambda >= 0.0)) throw ParameterError("l1 lambda must be >= 0");
}

void adam_step(std::span<const std::span<double>> params, const GradientSet& grads,
               AdamState& state, double lr) {
  if (grads.blocks.size() != params.size())
    throw ShapeError("adam_step: " + std::to_string(grads.blocks.size()) + " gradient blocks for " +
                     std::to_string(params.size()) + " parameter blocks");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads.blocks[i].size() != params[i].size())
      throw ShapeError("adam_step: block " + std::to_string(i) + " size mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameters");
  }

  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    const auto& g = grads.blocks[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  improved_last_ = val_loss < best_;
  if (improved_last_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return false;
  }
  ++since_best_;
  return since_best_ >= patience_;
}

double mean_squared_error(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ShapeError("mean_squared_error: length mismatch or empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double LrTrial::score() const noexcept {
  if (diverged || !std::isfinite(val_plcc) || !std::isfinite(val_srcc))
    return -std::numeric_limits<double>::infinity();
  return val_plcc + val_srcc;
}

}  // namespace kanreg

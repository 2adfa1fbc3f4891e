#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "kanreg/data.hpp"
#include "kanreg/errors.hpp"
#include "kanreg/linalg.hpp"
#include "kanreg/metrics.hpp"
#include "kanreg/network.hpp"

namespace kanreg {

inline const std::vector<double> kDefaultLrGrid = {1e-5, 5e-5, 1e-4, 5e-4,
                                                   1e-3, 5e-3, 1e-2, 5e-2};

struct TrainConfig {
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double lr = 1e-3;
  std::vector<double> lr_grid = kDefaultLrGrid;
  std::size_t batch_size = 128;
  double l1_lambda = 0.0;
  std::uint64_t seed = 42;
  /// Upper bound on concurrently running grid-search trials.
  std::size_t threads = 1;

  void validate() const;
};

struct TrainResult {
  std::vector<Vector> best_params;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  Vector train_loss;
  Vector val_loss;
  double wall_time_seconds = 0.0;
};

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of every parameter block in place. The state
/// is sized on first use.
void adam_step(std::span<const std::span<double>> params, const GradientSet& grads,
               AdamState& state, double lr);

/// Validation-loss patience tracker. Epochs are 1-based.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one epoch; returns true when training should stop.
  bool update(double val_loss);
  bool improved_last() const noexcept { return improved_last_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  std::size_t epochs() const noexcept { return epoch_; }
  double best_loss() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool improved_last_ = false;
};

/// Wall time of `fn()` on the monotonic clock, in seconds.
template <typename Fn>
double measure_time(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::forward<Fn>(fn)();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

template <typename Net>
concept TrainableNetwork = requires(Net& net, const Net& cnet, const Matrix& batch,
                                    std::span<const double> grads) {
  { predict(cnet, batch) } -> std::same_as<Vector>;
  forward(cnet, batch).outputs;
  { backward(cnet, forward(cnet, batch).cache, grads) } -> std::same_as<GradientSet>;
  { net.parameter_blocks() } -> std::same_as<std::vector<std::span<double>>>;
  { cnet.parameter_blocks() } -> std::same_as<std::vector<std::span<const double>>>;
  { cnet.l1_mask() } -> std::same_as<std::vector<bool>>;
  net.project();
};

double mean_squared_error(std::span<const double> pred, std::span<const double> truth);

namespace detail {

template <TrainableNetwork Net>
std::vector<Vector> snapshot(const Net& net) {
  std::vector<Vector> out;
  for (auto block : net.parameter_blocks()) out.emplace_back(block.begin(), block.end());
  return out;
}

template <TrainableNetwork Net>
void restore(Net& net, const std::vector<Vector>& params) {
  auto blocks = net.parameter_blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i)
    std::copy(params[i].begin(), params[i].end(), blocks[i].begin());
}

inline Vector gather(std::span<const double> values, std::span<const std::size_t> idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = values[idx[i]];
  return out;
}

}  // namespace detail

/// Minimizes MSE (+ l1_lambda * sum |edge coefficient|) on splits.train with
/// Adam at config.lr, stopping after `patience` epochs without validation
/// improvement or at max_epochs. The network is left holding, and the result
/// reports, the parameters of the best validation epoch. `features` and
/// `targets` cover all rows; only the split's rows are read.
template <TrainableNetwork Net>
TrainResult train(Net& net, const Matrix& features, std::span<const double> targets,
                  const SplitIndices& splits, const TrainConfig& config) {
  if (features.rows() != targets.size()) throw ShapeError("train: features/targets row mismatch");
  if (splits.train.empty()) throw InsufficientDataError("train: empty training split");
  if (config.max_epochs == 0 || config.patience == 0 || config.batch_size == 0)
    throw ParameterError("train: max_epochs, patience and batch_size must be >= 1");
  if (!(config.lr >= 0.0)) throw ParameterError("train: lr must be >= 0");

  TrainResult result;
  const auto start = std::chrono::steady_clock::now();

  // Without validation rows the training loss drives early stopping.
  const auto& monitor_rows = splits.val.empty() ? splits.train : splits.val;
  const Matrix monitor_x = features.select_rows(monitor_rows);
  const Vector monitor_y = detail::gather(targets, monitor_rows);

  const std::size_t n_train = splits.train.size();
  const std::size_t batch = std::min(config.batch_size, n_train);
  const auto mask = net.l1_mask();
  std::vector<std::size_t> order = splits.train;
  Rng shuffle_rng(config.seed ^ 0x73687566666c6521ULL);
  AdamState adam;
  EarlyStopping stopper(config.patience);
  result.best_params = detail::snapshot(net);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n_train; begin += batch) {
      const std::size_t end = std::min(n_train, begin + batch);
      std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Matrix x = features.select_rows(rows);
      const Vector y = detail::gather(targets, rows);

      GradientSet grads;
      try {
        auto fwd = forward(std::as_const(net), x);
        Vector out_grads(rows.size());
        const double scale = 2.0 / static_cast<double>(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const double err = fwd.outputs[i] - y[i];
          loss_sum += err * err;
          out_grads[i] = scale * err;
        }
        grads = backward(std::as_const(net), fwd.cache, out_grads);
      } catch (const NumericError& e) {
        throw DivergedError(epoch, config.lr,
                            "training diverged at epoch " + std::to_string(epoch) + " (lr " +
                                std::to_string(config.lr) + "): " + e.what());
      }
      auto blocks = net.parameter_blocks();
      if (config.l1_lambda > 0.0) {
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
          if (!mask[bi]) continue;
          for (std::size_t k = 0; k < blocks[bi].size(); ++k) {
            const double w = blocks[bi][k];
            grads.blocks[bi][k] += config.l1_lambda * (w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0));
          }
        }
      }
      adam_step(blocks, grads, adam, config.lr);
      net.project();
    }
    const double train_loss = loss_sum / static_cast<double>(n_train);

    double val_loss = std::numeric_limits<double>::infinity();
    try {
      val_loss = mean_squared_error(predict(net, monitor_x), monitor_y);
    } catch (const NumericError&) {
    }
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw DivergedError(epoch, config.lr,
                          "non-finite loss at epoch " + std::to_string(epoch) + " (lr " +
                              std::to_string(config.lr) + ")");
    }
    result.train_loss.push_back(train_loss);
    result.val_loss.push_back(val_loss);
    const bool stop = stopper.update(val_loss);
    if (stopper.improved_last()) result.best_params = detail::snapshot(net);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.epochs_run = stopper.epochs();
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  detail::restore(net, result.best_params);
  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// One learning rate's outcome within a grid search.
struct LrTrial {
  double lr = 0.0;
  bool diverged = false;
  std::string error;
  double val_plcc = std::numeric_limits<double>::quiet_NaN();
  double val_srcc = std::numeric_limits<double>::quiet_NaN();
  TrainResult result;

  /// PLCC + SRCC, or -inf when the trial produced no usable correlation.
  double score() const noexcept;
};

template <typename Net>
struct GridSearchResult {
  double best_lr = 0.0;
  std::size_t best_index = 0;
  Net best_network;
  std::vector<LrTrial> trials;
};

/// Trains one network per learning rate, each freshly built by `make_network`
/// (which must be deterministic), and keeps the one whose validation
/// predictions maximize PLCC + SRCC. Ties go to the earlier grid entry.
/// Trials run on up to config.threads threads; the selection does not
/// depend on the thread count.
template <typename Factory>
auto grid_search(Factory&& make_network, const Matrix& features, std::span<const double> targets,
                 const SplitIndices& splits, const TrainConfig& config)
    -> GridSearchResult<std::decay_t<decltype(make_network())>> {
  using Net = std::decay_t<decltype(make_network())>;
  static_assert(TrainableNetwork<Net>);
  if (config.lr_grid.empty()) throw ParameterError("grid_search: empty learning-rate grid");

  const auto& score_rows = splits.val.empty() ? splits.train : splits.val;
  const Matrix score_x = features.select_rows(score_rows);
  const Vector score_y = detail::gather(targets, score_rows);

  const std::size_t count = config.lr_grid.size();
  std::vector<LrTrial> trials(count);
  std::vector<Net> nets(count);

  auto run_trial = [&](std::size_t i) {
    LrTrial& trial = trials[i];
    trial.lr = config.lr_grid[i];
    TrainConfig cfg = config;
    cfg.lr = trial.lr;
    Net net = make_network();
    try {
      trial.result = train(net, features, targets, splits, cfg);
      const Vector pred = predict(net, score_x);
      try {
        trial.val_plcc = plcc(pred, score_y);
        trial.val_srcc = srcc(pred, score_y);
      } catch (const UndefinedCorrelationError& e) {
        trial.error = e.what();
      }
      nets[i] = std::move(net);
    } catch (const DivergedError& e) {
      trial.diverged = true;
      trial.error = e.what();
    } catch (const NumericError& e) {
      trial.diverged = true;
      trial.error = e.what();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) run_trial(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < count; i = next++) run_trial(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  GridSearchResult<Net> out;
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < count; ++i) {
    if (trials[i].diverged) continue;
    const double s = trials[i].score();
    if (!found || s > best) {
      best = s;
      out.best_index = i;
      found = true;
    }
  }
  if (!found) {
    std::string msg = "grid_search: every learning rate diverged";
    for (const auto& t : trials) msg += "\n  lr " + std::to_string(t.lr) + ": " + t.error;
    throw Error(msg);
  }
  out.best_lr = trials[out.best_index].lr;
  out.best_network = std::move(nets[out.best_index]);
  out.trials = std::move(trials);
  return out;
}

}  // namespace kanreg

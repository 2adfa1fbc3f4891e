#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "kanreg/training.hpp"

using namespace kanreg;

namespace {

struct Problem {
  Matrix x;
  Vector y;
  SplitIndices splits;
};

// y = sum of per-feature quadratics: exactly representable by a taylor layer.
Problem additive_quadratic(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Problem p{Matrix(n, d), Vector(n, 0.0), split(n, seed)};
  Vector a(d), b(d);
  for (std::size_t j = 0; j < d; ++j) {
    a[j] = rng.uniform(-1, 1);
    b[j] = rng.uniform(-1, 1);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double v = rng.normal() * 0.5;
      p.x(i, j) = v;
      p.y[i] += a[j] * v + b[j] * v * v;
    }
  return p;
}

BasisSpec taylor2() { return BasisSpec::make(BasisFamily::taylor); }

}  // namespace

TEST_CASE("adam first step and zero gradients") {
  Vector p = {1.0};
  std::vector<std::span<double>> blocks = {std::span<double>(p)};
  AdamState state;
  GradientSet g;
  g.blocks = {Vector{1.0}};
  adam_step(blocks, g, state, 0.1);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(state.step == 1);

  Vector q = {0.5, -2.0};
  std::vector<std::span<double>> qb = {std::span<double>(q)};
  AdamState fresh;
  GradientSet zero;
  zero.blocks = {Vector{0.0, 0.0}};
  adam_step(qb, zero, fresh, 0.1);
  CHECK(q == Vector{0.5, -2.0});

  GradientSet wrong;
  wrong.blocks = {Vector{1.0}};
  CHECK_THROWS_AS(adam_step(qb, wrong, fresh, 0.1), ShapeError);
}

TEST_CASE("early stopping on a simulated plateau") {
  EarlyStopping s(4);
  const double losses[] = {5, 4, 3, 3.5, 3.2, 3.1, 2.9, 3, 3, 3, 3, 1};
  std::size_t stopped_at = 0;
  for (double l : losses) {
    if (s.update(l)) {
      stopped_at = s.epochs();
      break;
    }
  }
  CHECK(s.best_epoch() == 7);
  CHECK(stopped_at == 11);
  CHECK(stopped_at == s.best_epoch() + 4);
  CHECK(s.best_loss() == 2.9);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto p = additive_quadratic(60, 3, 1);
  Rng rng(1);
  KanNetwork net = init_network({3, 4, 1}, taylor2(), rng);
  const Vector before = net.layer(0).coeffs;
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.max_epochs = 5;
  const auto r = train(net, p.x, p.y, p.splits, cfg);
  CHECK(net.layer(0).coeffs == before);
  CHECK(r.val_loss.size() == r.epochs_run);
  for (double v : r.val_loss) CHECK(v == r.val_loss.front());
}

TEST_CASE("early stopping bookkeeping and determinism") {
  const auto p = additive_quadratic(120, 4, 2);
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.patience = 5;
  cfg.max_epochs = 200;
  auto run = [&] {
    Rng rng(3);
    KanNetwork net = init_network({4, 6, 1}, taylor2(), rng);
    auto r = train(net, p.x, p.y, p.splits, cfg);
    return std::pair(std::move(net), std::move(r));
  };
  auto [net_a, a] = run();
  auto [net_b, b] = run();
  CHECK(a.epochs_run <= cfg.max_epochs);
  CHECK(a.val_loss.size() == a.epochs_run);
  CHECK(a.train_loss.size() == a.epochs_run);
  if (a.stopped_early) CHECK(a.epochs_run == a.best_epoch + cfg.patience);
  CHECK(a.best_val_loss == *std::min_element(a.val_loss.begin(), a.val_loss.end()));
  CHECK(a.wall_time_seconds >= 0.0);
  CHECK(net_a.layer(0).coeffs == net_b.layer(0).coeffs);
  CHECK(a.val_loss == b.val_loss);
  // The returned network is the best-validation snapshot.
  const auto& rows = p.splits.val;
  Vector y;
  for (auto i : rows) y.push_back(p.y[i]);
  CHECK(mean_squared_error(predict(net_a, p.x.select_rows(rows)), y) == doctest::Approx(a.best_val_loss));
}

TEST_CASE("a tiny full-batch step does not increase the training loss") {
  const auto p = additive_quadratic(50, 3, 4);
  Rng rng(5);
  KanNetwork net = init_network({3, 5, 1}, taylor2(), rng);
  const Matrix x = p.x.select_rows(p.splits.train);
  Vector y;
  for (auto i : p.splits.train) y.push_back(p.y[i]);
  const double before = mean_squared_error(predict(net, x), y);
  TrainConfig cfg;
  cfg.lr = 1e-6;
  cfg.max_epochs = 1;
  cfg.batch_size = p.splits.train.size();
  train(net, p.x, p.y, p.splits, cfg);
  CHECK(mean_squared_error(predict(net, x), y) <= before);
}

TEST_CASE("representable target converges") {
  const auto p = additive_quadratic(300, 4, 6);
  Rng rng(7);
  KanNetwork net = init_network({4, 1}, taylor2(), rng);
  TrainConfig cfg;
  cfg.lr = 0.01;
  const auto r = train(net, p.x, p.y, p.splits, cfg);
  CHECK(r.train_loss[r.best_epoch - 1] < 1e-3);
}

TEST_CASE("l1 penalty shrinks coefficients on noise targets") {
  Rng rng(8);
  Problem p{Matrix(150, 5), Vector(150), split(150, 8)};
  for (auto& v : p.x.data()) v = rng.normal();
  for (auto& v : p.y) v = rng.normal();
  auto median_abs = [&](double lambda) {
    Rng init(9);
    KanNetwork net = init_network({5, 4, 1}, taylor2(), init);
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    cfg.l1_lambda = lambda;
    train(net, p.x, p.y, p.splits, cfg);
    Vector all;
    for (std::size_t l = 0; l < net.layer_count(); ++l)
      for (double c : net.layer(l).coeffs) all.push_back(std::abs(c));
    std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
    return all[all.size() / 2];
  };
  CHECK(median_abs(1.0) < median_abs(0.0));
}

TEST_CASE("grid search") {
  const auto p = additive_quadratic(150, 3, 10);
  auto factory = [] {
    Rng rng(11);
    return init_network({3, 4, 1}, taylor2(), rng);
  };
  TrainConfig cfg;
  cfg.max_epochs = 40;

  cfg.lr_grid = {0.01};
  auto single = grid_search(factory, p.x, p.y, p.splits, cfg);
  CHECK(single.best_lr == 0.01);
  CHECK(single.trials.size() == 1);

  cfg.lr_grid = {1e-5, 1e-2};
  auto planted = grid_search(factory, p.x, p.y, p.splits, cfg);
  CHECK(planted.trials.size() == 2);
  CHECK(planted.best_lr == 1e-2);
  CHECK(planted.trials[1].score() > planted.trials[0].score());

  cfg.lr_grid = kDefaultLrGrid;
  cfg.threads = 1;
  auto serial = grid_search(factory, p.x, p.y, p.splits, cfg);
  cfg.threads = 3;
  auto parallel = grid_search(factory, p.x, p.y, p.splits, cfg);
  CHECK(serial.trials.size() == kDefaultLrGrid.size());
  CHECK(serial.best_index == parallel.best_index);
  CHECK(serial.best_network.layer(0).coeffs == parallel.best_network.layer(0).coeffs);
  for (std::size_t i = 0; i < serial.trials.size(); ++i)
    CHECK(serial.trials[i].result.val_loss == parallel.trials[i].result.val_loss);
}

TEST_CASE("grid search reports when every rate diverges") {
  Problem p{Matrix::from_rows({{1e100}, {2e100}, {3e100}, {1e100}, {5e100}}), Vector{1, 2, 3, 4, 5},
            split(5, 1)};
  auto factory = [] {
    Rng rng(1);
    return init_network({1, 1, 1}, taylor2(), rng);
  };
  TrainConfig cfg;
  cfg.lr_grid = {1e-3, 1e-2};
  try {
    grid_search(factory, p.x, p.y, p.splits, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("every learning rate diverged") != std::string::npos);
  }

  Rng rng(1);
  KanNetwork net = init_network({1, 1, 1}, taylor2(), rng);
  cfg.lr = 1e-3;
  try {
    train(net, p.x, p.y, p.splits, cfg);
    FAIL("expected DivergedError");
  } catch (const DivergedError& e) {
    CHECK(e.epoch() == 1);
    CHECK(e.lr() == 1e-3);
  }
}

TEST_CASE("config validation and timing") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = TrainConfig{};
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = TrainConfig{};
  cfg.lr = -1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);

  double inner = 0.0;
  const double outer = measure_time([&] {
    inner = measure_time([] { std::this_thread::sleep_for(std::chrono::milliseconds(5)); });
  });
  CHECK(inner >= 0.004);
  CHECK(outer >= inner);
}

TEST_CASE("mlp trains through the same loop") {
  const auto p = additive_quadratic(120, 3, 12);
  Rng rng(2);
  MlpNetwork net = init_mlp({3, 16, 1}, rng);
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.max_epochs = 100;
  const auto r = train(net, p.x, p.y, p.splits, cfg);
  CHECK(r.best_val_loss < r.val_loss.front() + 1e-12);
}

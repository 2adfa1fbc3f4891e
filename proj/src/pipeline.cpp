#include "kanreg/pipeline.hpp"

#include <cmath>

namespace kanreg {

LayerDims preset_dims(LayerPreset preset, std::size_t input_dim) {
  if (preset == LayerPreset::six_layer) return {input_dim, 512, 256, 128, 64, 1};
  return auto_configure(input_dim, 1);
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

PipelineResult run_pipeline(const FeatureTable& table, const SplitIndices& splits,
                            const PipelineOptions& options) {
  stage("configure", [&] {
    options.train.validate();
    if (!options.mlp) options.spec.validate();
    if (!(options.tau > 0.0) || options.tau > 1.0) throw ParameterError("tau must be in (0, 1]");
    return 0;
  });

  PipelineResult result;
  ScoreModel& model = result.model;
  model.dataset = table.name;

  model.standardizer = stage("standardize", [&] { return fit_standardizer(table, splits.train); });
  Matrix x = stage("standardize", [&] { return apply_standardizer(model.standardizer, table.features); });

  if (!options.mlp && options.tau < 1.0) {
    model.pca = stage("pca", [&] { return fit_pca(x.select_rows(splits.train), options.tau); });
    x = stage("pca", [&] { return transform(*model.pca, x); });
  }
  result.k = x.cols();

  if (!options.mlp) {
    // Rescale so the training inputs have unit total variance; PCA scores
    // otherwise reach magnitudes where composed monomials blow up.
    const auto stats = column_stats(x.select_rows(splits.train));
    double total = 0.0;
    for (double sd : stats.stds) total += sd * sd;
    if (total > 0.0) {
      model.input_scale = 1.0 / std::sqrt(total);
      for (auto& v : x.data()) v *= model.input_scale;
    }
  }

  // Optimization runs on z-scored targets.
  Vector y = table.scores;
  {
    double mean = 0.0;
    for (auto i : splits.train) mean += table.scores[i];
    mean /= static_cast<double>(splits.train.size());
    double var = 0.0;
    for (auto i : splits.train) var += (table.scores[i] - mean) * (table.scores[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(splits.train.size()));
    model.target_mean = mean;
    model.target_scale = sd > 0.0 ? sd : 1.0;
    for (auto& v : y) v = (v - model.target_mean) / model.target_scale;
  }

  const std::uint64_t init_seed = options.train.seed;
  if (options.mlp) {
    const LayerDims dims = MlpNetwork::default_dims(x.cols());
    auto search = stage("train", [&] {
      return grid_search(
          [&] {
            Rng rng(init_seed);
            return init_mlp(dims, rng);
          },
          x, y, splits, options.train);
    });
    model.network = std::move(search.best_network);
    model.lr = search.best_lr;
    result.trials = std::move(search.trials);
    result.best_trial = search.best_index;
  } else {
    const LayerDims dims = stage("configure", [&] { return preset_dims(options.layers, x.cols()); });
    auto search = stage("train", [&] {
      return grid_search(
          [&] {
            Rng rng(init_seed);
            return init_network(dims, options.spec, rng);
          },
          x, y, splits, options.train);
    });
    model.network = std::move(search.best_network);
    model.lr = search.best_lr;
    result.trials = std::move(search.trials);
    result.best_trial = search.best_index;
  }

  result.test = stage("evaluate", [&] {
    const auto& rows = splits.test.empty() ? splits.val : splits.test;
    return evaluate(model, table, rows);
  });
  result.test.train_seconds = result.best().wall_time_seconds;
  return result;
}

}  // namespace kanreg

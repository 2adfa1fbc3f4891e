#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kanreg/data.hpp"
#include "kanreg/model.hpp"
#include "kanreg/training.hpp"

namespace kanreg {

/// Hidden-layer preset. `automatic` is the four-entry width schedule;
/// `six_layer` is [in, 512, 256, 128, 64, 1].
enum class LayerPreset { automatic, six_layer };

LayerDims preset_dims(LayerPreset preset, std::size_t input_dim);

struct PipelineOptions {
  bool mlp = false;
  BasisSpec spec = BasisSpec::make(BasisFamily::taylor);
  /// tau >= 1 skips PCA entirely.
  double tau = 0.95;
  LayerPreset layers = LayerPreset::automatic;
  TrainConfig train;
};

/// Failure inside one pipeline stage; `stage` names it (load, split, ...).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineResult {
  ScoreModel model;
  EvalReport test;
  std::size_t k = 0;
  std::vector<LrTrial> trials;
  std::size_t best_trial = 0;

  const TrainResult& best() const { return trials.at(best_trial).result; }
};

/// split rows -> z-score (train) -> PCA (train) -> layer dims -> learning-rate
/// grid search -> test-split report. Targets are z-scored on the training
/// rows for optimization and mapped back on prediction.
PipelineResult run_pipeline(const FeatureTable& table, const SplitIndices& splits,
                            const PipelineOptions& options);

}  // namespace kanreg

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include <json.hpp>

#include "kanreg/data.hpp"
#include "kanreg/metrics.hpp"
#include "kanreg/network.hpp"
#include "kanreg/pca.hpp"

namespace kanreg {

/// A trained regressor together with the preprocessing fitted on its
/// training split: z-scoring, optional PCA, and the target scaling the
/// network was trained under.
struct ScoreModel {
  std::string dataset;
  Standardizer standardizer;
  std::optional<PcaModel> pca;
  /// Multiplies the network inputs; fitted so their total training variance is 1.
  double input_scale = 1.0;
  double target_mean = 0.0;
  double target_scale = 1.0;
  double lr = 0.0;
  std::variant<KanNetwork, MlpNetwork> network;

  std::size_t input_dim() const noexcept { return standardizer.means.size(); }
  /// "mlp" or the basis family name.
  std::string basis_name() const;
  const LayerDims& layer_dims() const;

  /// Standardized and projected network inputs for raw feature rows.
  Matrix preprocess(const Matrix& raw) const;
  /// Predicted scores on the original MOS scale.
  Vector predict(const Matrix& raw) const;
};

/// Predicts the listed rows of `table` and scores them against its MOS.
/// Throws ShapeError naming both dimensions when the table does not match.
EvalReport evaluate(const ScoreModel& model, const FeatureTable& table,
                    std::span<const std::size_t> indices);

inline constexpr const char* kModelFormat = "kanreg-model";
inline constexpr int kModelVersion = 1;

nlohmann::json model_to_json(const ScoreModel& model);
ScoreModel model_from_json(const nlohmann::json& doc);

/// Versioned JSON document; numbers are written in shortest round-trip form.
void save_model(const ScoreModel& model, const std::filesystem::path& path);
/// Throws ParseError (with byte offset) for malformed JSON,
/// UnsupportedVersionError for other versions, FormatError for schema errors.
ScoreModel load_model(const std::filesystem::path& path);

nlohmann::json network_to_json(const KanNetwork& net);
KanNetwork kan_from_json(const nlohmann::json& doc);

}  // namespace kanreg

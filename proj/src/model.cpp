#include "kanreg/model.hpp"

#include <algorithm>
#include <cmath>

#include <fstream>
#include <iterator>
#include <sstream>

#include "kanreg/errors.hpp"

namespace kanreg {

using nlohmann::json;

std::string ScoreModel::basis_name() const {
  if (std::holds_alternative<MlpNetwork>(network)) return "mlp";
  return std::string(family_name(std::get<KanNetwork>(network).spec().family));
}

const LayerDims& ScoreModel::layer_dims() const {
  return std::visit([](const auto& net) -> const LayerDims& { return net.layer_dims(); }, network);
}

Matrix ScoreModel::preprocess(const Matrix& raw) const {
  if (raw.cols() != input_dim()) {
    throw ShapeError("feature dimension mismatch: model expects " + std::to_string(input_dim()) +
                     ", table has " + std::to_string(raw.cols()));
  }
  Matrix x = apply_standardizer(standardizer, raw);
  if (pca) x = transform(*pca, x);
  if (input_scale != 1.0)
    for (auto& v : x.data()) v *= input_scale;
  return x;
}

Vector ScoreModel::predict(const Matrix& raw) const {
  const Matrix x = preprocess(raw);
  Vector out = std::visit([&](const auto& net) { return kanreg::predict(net, x); }, network);
  for (auto& v : out) v = v * target_scale + target_mean;
  return out;
}

EvalReport evaluate(const ScoreModel& model, const FeatureTable& table,
                    std::span<const std::size_t> indices) {
  const Matrix rows = table.features.select_rows(indices);
  Vector truth(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) truth[i] = table.scores.at(indices[i]);
  const Vector pred = model.predict(rows);
  EvalReport report;
  report.n = indices.size();
  report.plcc = plcc(pred, truth);
  report.srcc = srcc(pred, truth);
  return report;
}

namespace {

json spec_to_json(const BasisSpec& s) {
  return json{{"order", s.order},         {"expansion_point", s.expansion_point},
              {"alpha", s.alpha},         {"beta", s.beta},
              {"grid_size", s.grid_size}, {"degree", s.degree},
              {"centers", s.centers},     {"bandwidth", s.bandwidth},
              {"harmonics", s.harmonics}};
}

BasisSpec spec_from_json(BasisFamily family, const json& j) {
  BasisSpec s;
  s.family = family;
  s.order = j.at("order").get<int>();
  s.expansion_point = j.at("expansion_point").get<double>();
  s.alpha = j.at("alpha").get<double>();
  s.beta = j.at("beta").get<double>();
  s.grid_size = j.at("grid_size").get<int>();
  s.degree = j.at("degree").get<int>();
  s.centers = j.at("centers").get<Vector>();
  s.bandwidth = j.at("bandwidth").get<double>();
  s.harmonics = j.at("harmonics").get<int>();
  return s;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(Vector(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  return Matrix::from_rows(j.get<std::vector<Vector>>());
}

// [out][in] nested array of the per-edge block `flat` of width `b`.
json edge_tensor(const Vector& flat, std::size_t out, std::size_t in, std::size_t b) {
  json outs = json::array();
  for (std::size_t j = 0; j < out; ++j) {
    json ins = json::array();
    for (std::size_t i = 0; i < in; ++i) {
      const auto* start = flat.data() + (j * in + i) * std::max<std::size_t>(b, 1);
      if (b == 0) {
        ins.push_back(*start);
      } else {
        ins.push_back(Vector(start, start + b));
      }
    }
    outs.push_back(std::move(ins));
  }
  return outs;
}

void read_edge_tensor(const json& j, Vector& flat, std::size_t out, std::size_t in, std::size_t b,
                      const char* what) {
  if (!j.is_array() || j.size() != out) throw FormatError(std::string(what) + ": wrong output count");
  std::size_t pos = 0;
  for (const auto& ins : j) {
    if (!ins.is_array() || ins.size() != in) throw FormatError(std::string(what) + ": wrong input count");
    for (const auto& e : ins) {
      if (b == 0) {
        flat.at(pos++) = e.get<double>();
        continue;
      }
      if (!e.is_array() || e.size() != b) throw FormatError(std::string(what) + ": wrong basis count");
      for (const auto& v : e) flat.at(pos++) = v.get<double>();
    }
  }
}

json standardizer_to_json(const Standardizer& s) {
  return json{{"means", s.means}, {"stds", s.stds}, {"epsilon", s.epsilon}};
}

}  // namespace

json network_to_json(const KanNetwork& net) {
  json doc;
  doc["family"] = std::string(family_name(net.spec().family));
  doc["spec"] = spec_to_json(net.spec());
  doc["layer_dims"] = net.layer_dims();
  json coeffs = json::array();
  json scales = json::array();
  json shifts = json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    coeffs.push_back(edge_tensor(layer.coeffs, layer.out_dim, layer.in_dim, layer.b));
    if (!layer.scales.empty()) {
      scales.push_back(edge_tensor(layer.scales, layer.out_dim, layer.in_dim, 0));
      shifts.push_back(edge_tensor(layer.shifts, layer.out_dim, layer.in_dim, 0));
    }
  }
  doc["coeffs"] = std::move(coeffs);
  if (net.spec().family == BasisFamily::wavelet_mexican_hat) {
    doc["wavelet_scales"] = std::move(scales);
    doc["wavelet_shifts"] = std::move(shifts);
  }
  return doc;
}

KanNetwork kan_from_json(const json& doc) {
  const auto family = parse_family(doc.at("family").get<std::string>());
  KanNetwork net(doc.at("layer_dims").get<LayerDims>(), spec_from_json(family, doc.at("spec")));
  const auto& coeffs = doc.at("coeffs");
  if (!coeffs.is_array() || coeffs.size() != net.layer_count())
    throw FormatError("model: coeffs layer count does not match layer_dims");
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    KanLayer& layer = net.mutable_layer(l);
    read_edge_tensor(coeffs[l], layer.coeffs, layer.out_dim, layer.in_dim, layer.b, "coeffs");
    if (family == BasisFamily::wavelet_mexican_hat) {
      read_edge_tensor(doc.at("wavelet_scales").at(l), layer.scales, layer.out_dim, layer.in_dim, 0,
                       "wavelet_scales");
      read_edge_tensor(doc.at("wavelet_shifts").at(l), layer.shifts, layer.out_dim, layer.in_dim, 0,
                       "wavelet_shifts");
    }
  }
  return net;
}

json model_to_json(const ScoreModel& model) {
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["dataset"] = model.dataset;
  doc["lr"] = model.lr;
  if (const auto* kan = std::get_if<KanNetwork>(&model.network)) {
    doc.update(network_to_json(*kan));
  } else {
    const auto& mlp = std::get<MlpNetwork>(model.network);
    doc["family"] = "mlp";
    doc["layer_dims"] = mlp.layer_dims();
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
      weights.push_back(edge_tensor(mlp.weights(l), mlp.layer_dims()[l + 1], mlp.layer_dims()[l], 0));
      biases.push_back(mlp.biases(l));
    }
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);
  }
  doc["standardization"] = standardizer_to_json(model.standardizer);
  doc["input_scale"] = model.input_scale;
  doc["target"] = json{{"mean", model.target_mean}, {"scale", model.target_scale}};
  if (model.pca) {
    const auto& p = *model.pca;
    doc["pca"] = json{{"mean", p.mean},
                      {"components", matrix_to_json(p.components)},
                      {"eigenvalues", p.eigenvalues},
                      {"k", p.k},
                      {"tau", p.tau}};
  } else {
    doc["pca"] = nullptr;
  }
  return doc;
}

ScoreModel model_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("format", std::string()) != kModelFormat)
    throw FormatError("not a kanreg model document");
  const int version = doc.at("version").get<int>();
  if (version != kModelVersion)
    throw UnsupportedVersionError("unsupported model version " + std::to_string(version) +
                                  " (expected " + std::to_string(kModelVersion) + ")");
  ScoreModel model;
  model.dataset = doc.value("dataset", std::string());
  model.lr = doc.at("lr").get<double>();
  if (doc.at("family").get<std::string>() == "mlp") {
    MlpNetwork mlp(doc.at("layer_dims").get<LayerDims>());
    const auto& dims = mlp.layer_dims();
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
      read_edge_tensor(doc.at("weights").at(l), mlp.mutable_weights(l), dims[l + 1], dims[l], 0,
                       "weights");
      const auto biases = doc.at("biases").at(l).get<Vector>();
      if (biases.size() != dims[l + 1]) throw FormatError("model: bias count mismatch");
      mlp.mutable_biases(l) = biases;
    }
    model.network = std::move(mlp);
  } else {
    model.network = kan_from_json(doc);
  }
  const auto& st = doc.at("standardization");
  model.standardizer.means = st.at("means").get<Vector>();
  model.standardizer.stds = st.at("stds").get<Vector>();
  model.standardizer.epsilon = st.at("epsilon").get<double>();
  if (model.standardizer.means.size() != model.standardizer.stds.size())
    throw FormatError("model: standardization means/stds length mismatch");
  model.input_scale = doc.at("input_scale").get<double>();
  if (!std::isfinite(model.input_scale) || model.input_scale <= 0.0)
    throw FormatError("model: input_scale must be positive");
  model.target_mean = doc.at("target").at("mean").get<double>();
  model.target_scale = doc.at("target").at("scale").get<double>();
  if (const auto& p = doc.at("pca"); !p.is_null()) {
    PcaModel pca;
    pca.mean = p.at("mean").get<Vector>();
    pca.components = matrix_from_json(p.at("components"));
    pca.eigenvalues = p.at("eigenvalues").get<Vector>();
    pca.k = p.at("k").get<std::size_t>();
    pca.tau = p.at("tau").get<double>();
    if (pca.components.rows() != pca.k || pca.components.cols() != pca.mean.size())
      throw FormatError("model: pca component shape mismatch");
    model.pca = std::move(pca);
  }
  const std::size_t expected_in = model.pca ? model.pca->k : model.input_dim();
  if (model.layer_dims().front() != expected_in)
    throw FormatError("model: network input dimension does not match preprocessing");
  return model;
}

void save_model(const ScoreModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw FormatError("failed writing " + path.string());
}

ScoreModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": malformed model file at byte " + std::to_string(e.byte) +
                         ": " + e.what(),
                     e.byte);
  }
  try {
    return model_from_json(doc);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace kanreg

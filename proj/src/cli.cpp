#include "kanreg/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kanreg/data.hpp"
#include "kanreg/errors.hpp"
#include "kanreg/model.hpp"
#include "kanreg/pca.hpp"
#include "kanreg/pipeline.hpp"

namespace kanreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Settings shared by the subcommands.

struct CommonFlags {
  std::string data;
  std::string format = "csv";
  std::uint64_t seed = 42;
  std::string out = "kanreg_out";
  bool no_timing = false;
};

struct ModelFlags {
  std::string basis = "taylor";
  std::optional<int> order;
  double expansion_point = 0.0;
  int harmonics = 4;
  int grid_size = 5;
  int degree = 3;
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 0.95;
  std::optional<double> lr;
  std::string lr_grid = "default";
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  std::size_t batch = 128;
  double l1 = 0.0;
  std::string layers = "auto";
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_data = true) {
  if (with_data) cmd->add_option("--data", f.data, "Feature table path")->required();
  cmd->add_option("--format", f.format, "Table format: csv or bin")
      ->check(CLI::IsMember({"csv", "bin", "binary"}));
  cmd->add_option("--seed", f.seed, "Seed for splitting and initialization");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--no-timing", f.no_timing, "Write NA instead of measured seconds");
}

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--basis", f.basis,
                  "taylor, bspline, gaussian_rbf, bsrbf, chebyshev, jacobi, hermite, "
                  "wavelet_mexican_hat, fourier or mlp");
  cmd->add_option("--order", f.order, "Taylor order or polynomial n_max");
  cmd->add_option("--expansion-point", f.expansion_point, "Taylor expansion point");
  cmd->add_option("--harmonics", f.harmonics, "Fourier harmonics N");
  cmd->add_option("--grid-size", f.grid_size, "B-spline grid intervals");
  cmd->add_option("--degree", f.degree, "B-spline degree");
  cmd->add_option("--alpha", f.alpha, "Jacobi alpha");
  cmd->add_option("--beta", f.beta, "Jacobi beta");
  cmd->add_option("--tau", f.tau, "PCA variance ratio in (0, 1]; 1 disables PCA");
  cmd->add_option("--lr", f.lr, "Single learning rate (replaces the grid)");
  cmd->add_option("--lr-grid", f.lr_grid, "'default' or comma-separated learning rates");
  cmd->add_option("--max-epochs", f.max_epochs, "Epoch cap");
  cmd->add_option("--patience", f.patience, "Early-stopping patience");
  cmd->add_option("--batch", f.batch, "Mini-batch size");
  cmd->add_option("--l1", f.l1, "L1 penalty on edge coefficients");
  cmd->add_option("--layers", f.layers, "Layer preset: auto or 6")->check(CLI::IsMember({"auto", "6"}));
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ParameterError("cannot parse '" + item + "' as a number");
    values.push_back(v);
  }
  if (values.empty()) throw ParameterError("empty number list '" + text + "'");
  return values;
}

std::size_t env_threads() {
  if (const char* v = std::getenv("KANREG_THREADS")) {
    try {
      const long n = std::stol(v);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

PipelineOptions pipeline_options(const ModelFlags& f, std::uint64_t seed) {
  PipelineOptions o;
  o.mlp = f.basis == "mlp";
  if (!o.mlp) {
    o.spec = BasisSpec::make(parse_family(f.basis));
    if (f.order) o.spec.order = *f.order;
    o.spec.expansion_point = f.expansion_point;
    o.spec.harmonics = f.harmonics;
    o.spec.alpha = f.alpha;
    o.spec.beta = f.beta;
    if (o.spec.grid_size != f.grid_size || o.spec.degree != f.degree) {
      o.spec.grid_size = f.grid_size;
      o.spec.degree = f.degree;
      if (o.spec.family == BasisFamily::bsrbf) {
        // Keep one RBF center per spline basis function.
        const int n = f.grid_size + f.degree;
        o.spec.centers.clear();
        for (int i = 0; i < n; ++i) o.spec.centers.push_back(n == 1 ? 0.0 : -1.0 + 2.0 * i / (n - 1));
        o.spec.bandwidth = n == 1 ? 1.0 : 2.0 / (n - 1);
      }
    }
    o.spec.validate();
  }
  o.tau = f.tau;
  o.layers = f.layers == "6" ? LayerPreset::six_layer : LayerPreset::automatic;
  o.train.max_epochs = f.max_epochs;
  o.train.patience = f.patience;
  o.train.batch_size = f.batch;
  o.train.l1_lambda = f.l1;
  o.train.seed = seed;
  o.train.threads = env_threads();
  if (f.lr) {
    o.train.lr_grid = {*f.lr};
  } else if (f.lr_grid != "default") {
    o.train.lr_grid = parse_number_list(f.lr_grid);
  }
  o.train.lr = o.train.lr_grid.front();
  o.train.validate();
  return o;
}

json options_json(const PipelineOptions& o) {
  json j;
  j["basis"] = o.mlp ? std::string("mlp") : std::string(family_name(o.spec.family));
  if (!o.mlp) {
    j["order"] = o.spec.order;
    j["expansion_point"] = o.spec.expansion_point;
    j["harmonics"] = o.spec.harmonics;
    j["grid_size"] = o.spec.grid_size;
    j["degree"] = o.spec.degree;
    j["alpha"] = o.spec.alpha;
    j["beta"] = o.spec.beta;
  }
  j["tau"] = o.tau;
  j["layers"] = o.layers == LayerPreset::six_layer ? "6" : "auto";
  j["lr_grid"] = o.train.lr_grid;
  j["max_epochs"] = o.train.max_epochs;
  j["patience"] = o.train.patience;
  j["batch"] = o.train.batch_size;
  j["l1"] = o.train.l1_lambda;
  j["seed"] = o.train.seed;
  j["threads"] = o.train.threads;
  return j;
}

// ---------------------------------------------------------------------------
// Formatting and file output.

std::string num(double v, int precision = 6) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string gnum(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string dims_text(const LayerDims& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(dims[i]);
  }
  return s;
}

std::string seconds_text(double s, bool no_timing) { return no_timing ? "NA" : num(s, 4); }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "unreadable";
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

/// Collects output files and writes them together at the end of a command.
class OutputWriter {
 public:
  explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) const { return dir_ / name; }
  void add(const std::string& name, std::string contents) {
    files_.emplace_back(name, std::move(contents));
  }
  void write_now(const std::string& name, const std::string& contents) const {
    fs::create_directories(dir_);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw FormatError("cannot write " + (dir_ / name).string());
    out << contents;
  }
  void flush() {
    for (const auto& [name, contents] : files_) write_now(name, contents);
    files_.clear();
  }
  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& f : files_) n.push_back((dir_ / f.first).string());
    return n;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

void write_manifest(const OutputWriter& writer, const std::string& command,
                    const std::vector<std::string>& args, const json& config, std::uint64_t seed,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["args"] = args;
  m["config"] = config;
  m["seed"] = seed;
  json hashes = json::object();
  for (const auto& in : inputs) hashes[in] = file_hash(in);
  m["input_hashes"] = hashes;
  m["outputs"] = outputs;
  m["timestamp"] = utc_timestamp();
  writer.write_now("manifest.json", m.dump(2) + "\n");
}

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

FeatureTable load_stage(const CommonFlags& c) {
  return stage("load", [&] { return load_table(c.data, parse_table_format(c.format)); });
}

constexpr const char* kReportHeader = "dataset,basis,tau,k,layers,lr,plcc,srcc,seconds,epochs\n";

std::string report_row(const PipelineResult& r, const PipelineOptions& o, bool no_timing) {
  std::ostringstream row;
  row << r.model.dataset << ',' << r.model.basis_name() << ',' << num(o.mlp ? 1.0 : o.tau, 2) << ','
      << r.k << ',' << dims_text(r.model.layer_dims()) << ',' << gnum(r.model.lr) << ','
      << num(r.test.plcc) << ',' << num(r.test.srcc) << ','
      << seconds_text(r.best().wall_time_seconds, no_timing) << ',' << r.best().epochs_run << '\n';
  return row.str();
}

std::string lr_sweep_csv(const PipelineResult& r, bool no_timing) {
  std::ostringstream csv;
  csv << "lr,status,val_plcc,val_srcc,val_sum,best_epoch,epochs,seconds,selected\n";
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto& t = r.trials[i];
    csv << gnum(t.lr) << ',' << (t.diverged ? "diverged" : (t.error.empty() ? "ok" : "undefined"))
        << ',' << num(t.val_plcc) << ',' << num(t.val_srcc) << ','
        << num(t.diverged ? std::nan("") : t.val_plcc + t.val_srcc) << ',' << t.result.best_epoch
        << ',' << t.result.epochs_run << ','
        << (t.diverged ? "NA" : seconds_text(t.result.wall_time_seconds, no_timing)) << ','
        << (i == r.best_trial ? 1 : 0) << '\n';
  }
  return csv.str();
}

std::string loss_curve_csv(const TrainResult& t) {
  std::ostringstream csv;
  csv << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (std::size_t e = 0; e < t.val_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", e + 1, t.train_loss[e], t.val_loss[e]);
    csv << buf;
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_train(const CommonFlags& c, const ModelFlags& m, const std::vector<std::string>& args,
              std::ostream& out) {
  const auto options = stage("configure", [&] { return pipeline_options(m, c.seed); });
  const auto table = load_stage(c);
  const auto splits = stage("split", [&] { return split(table.size(), c.seed); });

  OutputWriter writer(c.out);
  write_manifest(writer, "train", args, options_json(options), c.seed, {c.data},
                 {writer.path("model.json").string(), writer.path("report.csv").string(),
                  writer.path("lr_sweep.csv").string(), writer.path("loss_curve.csv").string()});

  const auto result = run_pipeline(table, splits, options);
  stage("write", [&] {
    save_model(result.model, writer.path("model.json"));
    writer.add("report.csv", std::string(kReportHeader) + report_row(result, options, c.no_timing));
    writer.add("lr_sweep.csv", lr_sweep_csv(result, c.no_timing));
    writer.add("loss_curve.csv", loss_curve_csv(result.best()));
    writer.flush();
    return 0;
  });
  out << kReportHeader << report_row(result, options, c.no_timing);
  return 0;
}

int cmd_cross(const CommonFlags& c, const std::string& model_path,
              const std::vector<std::string>& args, std::ostream& out) {
  const auto model = stage("load", [&] { return load_model(model_path); });
  const auto table = load_stage(c);
  OutputWriter writer(c.out);
  write_manifest(writer, "cross", args, json{{"model", model_path}}, c.seed, {model_path, c.data},
                 {writer.path("cross.csv").string()});
  if (table.dim() != model.input_dim()) {
    throw StageError("evaluate", "feature-dimension mismatch: model expects " +
                                     std::to_string(model.input_dim()) + ", target table has " +
                                     std::to_string(table.dim()));
  }
  std::vector<std::size_t> all(table.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto report = stage("evaluate", [&] { return evaluate(model, table, all); });
  std::ostringstream csv;
  csv << "source,target,basis,n,plcc,srcc\n"
      << model.dataset << ',' << table.name << ',' << model.basis_name() << ',' << report.n << ','
      << num(report.plcc) << ',' << num(report.srcc) << '\n';
  writer.add("cross.csv", csv.str());
  stage("write", [&] {
    writer.flush();
    return 0;
  });
  out << csv.str();
  return 0;
}

int cmd_pca(const CommonFlags& c, const std::string& taus_text, const std::vector<std::string>& args,
            std::ostream& out) {
  const auto taus = stage("configure", [&] {
    auto t = parse_number_list(taus_text);
    for (double v : t)
      if (!(v > 0.0) || v > 1.0) throw ParameterError("tau values must be in (0, 1]");
    std::sort(t.begin(), t.end(), std::greater<>());
    return t;
  });
  const auto table = load_stage(c);
  const auto splits = stage("split", [&] { return split(table.size(), c.seed); });
  OutputWriter writer(c.out);
  write_manifest(writer, "pca", args, json{{"taus", taus}}, c.seed, {c.data},
                 {writer.path("pca_report.csv").string(), writer.path("pca_spectrum.csv").string()});

  const auto standardizer = stage("standardize", [&] { return fit_standardizer(table, splits.train); });
  const Matrix train = apply_standardizer(standardizer, table.features.select_rows(splits.train));
  // One fit provides the spectrum; k for each tau follows from it.
  const auto model = stage("pca", [&] { return fit_pca(train, taus.front()); });
  const std::size_t d = table.dim();

  std::ostringstream report;
  report << "tau,k,d,reduction_pct\n";
  for (double tau : taus) {
    const std::size_t k = stage("pca", [&] { return select_k(model.eigenvalues, tau, d); });
    report << num(tau, 2) << ',' << k << ',' << d << ','
           << num(100.0 * (1.0 - static_cast<double>(k) / static_cast<double>(d)), 3) << '\n';
  }
  std::ostringstream spectrum;
  spectrum << "component,eigenvalue,cumulative_ratio\n";
  char buf[96];
  double total = 0.0;
  for (double v : model.eigenvalues) total += v;
  double head = 0.0;
  for (std::size_t i = 0; i < model.eigenvalues.size(); ++i) {
    head += model.eigenvalues[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10f\n", i + 1, model.eigenvalues[i],
                  total > 0.0 ? head / total : 0.0);
    spectrum << buf;
  }
  writer.add("pca_report.csv", report.str());
  writer.add("pca_spectrum.csv", spectrum.str());
  stage("write", [&] {
    writer.flush();
    return 0;
  });
  out << report.str();
  return 0;
}

int cmd_sweep_order(const CommonFlags& c, ModelFlags m, const std::string& orders_text,
                    const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  m.basis = "taylor";
  const auto orders = stage("configure", [&] {
    std::vector<int> o;
    for (double v : parse_number_list(orders_text)) {
      if (v < 0 || v != std::floor(v)) throw ParameterError("orders must be nonnegative integers");
      o.push_back(static_cast<int>(v));
    }
    return o;
  });
  const auto base = stage("configure", [&] { return pipeline_options(m, c.seed); });
  const auto table = load_stage(c);
  const auto splits = stage("split", [&] { return split(table.size(), c.seed); });
  OutputWriter writer(c.out);
  json cfg = options_json(base);
  cfg["orders"] = orders;
  write_manifest(writer, "sweep-order", args, cfg, c.seed, {c.data},
                 {writer.path("sweep_order.csv").string()});

  std::ostringstream csv;
  csv << "order,b,params,forward_cost,k,layers,lr,plcc,srcc,seconds,epochs,status\n";
  bool failed = false;
  for (int order : orders) {
    PipelineOptions o = base;
    o.spec.order = order;
    try {
      const auto r = run_pipeline(table, splits, o);
      const auto& net = std::get<KanNetwork>(r.model.network);
      csv << order << ',' << basis_size(o.spec) << ',' << net.parameter_count() << ','
          << estimate_forward_cost(net.layer_dims(), o.spec) << ',' << r.k << ','
          << dims_text(net.layer_dims()) << ',' << gnum(r.model.lr) << ',' << num(r.test.plcc) << ','
          << num(r.test.srcc) << ',' << seconds_text(r.best().wall_time_seconds, c.no_timing) << ','
          << r.best().epochs_run << ",ok\n";
    } catch (const std::exception& e) {
      failed = true;
      err << "order " << order << ": " << e.what() << '\n';
      csv << order << ',' << basis_size(o.spec) << ",NA,NA,NA,NA,NA,NA,NA,NA,NA,failed\n";
    }
  }
  writer.add("sweep_order.csv", csv.str());
  stage("write", [&] {
    writer.flush();
    return 0;
  });
  out << csv.str();
  return failed ? 1 : 0;
}

struct LayerRow {
  int layers;
  double tau;
};

std::vector<LayerRow> parse_layer_rows(const std::string& text) {
  std::vector<LayerRow> rows;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ParameterError("layer rows look like 6:1.0,4:0.95");
    LayerRow r{};
    r.layers = std::stoi(item.substr(0, colon));
    r.tau = std::stod(item.substr(colon + 1));
    if (r.layers != 4 && r.layers != 6) throw ParameterError("layer presets are 4 and 6");
    if (!(r.tau > 0.0) || r.tau > 1.0) throw ParameterError("tau must be in (0, 1]");
    rows.push_back(r);
  }
  if (rows.empty()) throw ParameterError("no layer rows given");
  return rows;
}

int cmd_sweep_layers(const CommonFlags& c, const ModelFlags& m, const std::string& rows_text,
                     const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto rows = stage("configure", [&] { return parse_layer_rows(rows_text); });
  const auto base = stage("configure", [&] { return pipeline_options(m, c.seed); });
  const auto table = load_stage(c);
  const auto splits = stage("split", [&] { return split(table.size(), c.seed); });
  OutputWriter writer(c.out);
  json cfg = options_json(base);
  cfg["rows"] = rows_text;
  write_manifest(writer, "sweep-layers", args, cfg, c.seed, {c.data},
                 {writer.path("sweep_layers.csv").string()});

  struct Outcome {
    LayerRow row;
    bool ok = false;
    std::size_t k = 0;
    LayerDims dims;
    double lr = 0, plcc = 0, srcc = 0, seconds = 0;
    std::size_t epochs = 0;
  };
  std::vector<Outcome> outcomes;
  bool failed = false;
  for (const auto& row : rows) {
    PipelineOptions o = base;
    o.tau = row.tau;
    o.layers = row.layers == 6 ? LayerPreset::six_layer : LayerPreset::automatic;
    Outcome oc;
    oc.row = row;
    try {
      const auto r = run_pipeline(table, splits, o);
      oc.ok = true;
      oc.k = r.k;
      oc.dims = r.model.layer_dims();
      oc.lr = r.model.lr;
      oc.plcc = r.test.plcc;
      oc.srcc = r.test.srcc;
      oc.seconds = r.best().wall_time_seconds;
      oc.epochs = r.best().epochs_run;
    } catch (const std::exception& e) {
      failed = true;
      err << "row " << row.layers << ":" << row.tau << ": " << e.what() << '\n';
    }
    outcomes.push_back(oc);
  }

  // Baseline: the (6, 1.00) row when present, else the first row.
  const Outcome* baseline = &outcomes.front();
  for (const auto& oc : outcomes)
    if (oc.row.layers == 6 && oc.row.tau >= 1.0) baseline = &oc;

  std::ostringstream csv;
  csv << "L,tau,k,layers,lr,plcc,srcc,seconds,speedup,plcc_delta,epochs,status\n";
  for (const auto& oc : outcomes) {
    csv << oc.row.layers << ',' << num(oc.row.tau, 2) << ',';
    if (!oc.ok) {
      csv << "NA,NA,NA,NA,NA,NA,NA,NA,NA,failed\n";
      continue;
    }
    const bool timing = !c.no_timing && baseline->ok && oc.seconds > 0.0;
    csv << oc.k << ',' << dims_text(oc.dims) << ',' << gnum(oc.lr) << ',' << num(oc.plcc) << ','
        << num(oc.srcc) << ',' << seconds_text(oc.seconds, c.no_timing) << ','
        << (timing ? num(baseline->seconds / oc.seconds, 3) : std::string("NA")) << ','
        << (baseline->ok ? num(oc.plcc - baseline->plcc) : std::string("NA")) << ',' << oc.epochs
        << ",ok\n";
  }
  writer.add("sweep_layers.csv", csv.str());
  stage("write", [&] {
    writer.flush();
    return 0;
  });
  out << csv.str();
  return failed ? 1 : 0;
}

int cmd_compare(const CommonFlags& c, const std::string& model_a_path,
                const std::string& model_b_path, const std::string& rows_mode,
                const std::vector<std::string>& args, std::ostream& out) {
  const auto model_a = stage("load", [&] { return load_model(model_a_path); });
  const auto model_b = stage("load", [&] { return load_model(model_b_path); });
  const auto table = load_stage(c);
  std::vector<std::size_t> rows;
  if (rows_mode == "all") {
    rows.resize(table.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    rows = stage("split", [&] { return split(table.size(), c.seed); }).test;
  }
  OutputWriter writer(c.out);
  write_manifest(writer, "compare", args, json{{"rows", rows_mode}}, c.seed,
                 {model_a_path, model_b_path, c.data}, {writer.path("compare.csv").string()});

  // A constant predictor has no correlation; it is reported as NA and still tested.
  auto eval_or_na = [&](const ScoreModel& m) {
    try {
      return evaluate(m, table, rows);
    } catch (const UndefinedCorrelationError&) {
      EvalReport r;
      r.n = rows.size();
      r.plcc = r.srcc = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
  };
  const auto ra = stage("evaluate", [&] { return eval_or_na(model_a); });
  const auto rb = stage("evaluate", [&] { return eval_or_na(model_b); });
  const auto sig = stage("evaluate", [&] {
    const Matrix x = table.features.select_rows(rows);
    return paired_t_test(model_a.predict(x), model_b.predict(x));
  });
  std::ostringstream csv;
  csv << "model_a,model_b,n,plcc_a,srcc_a,plcc_b,srcc_b,t,p,significant\n"
      << fs::path(model_a_path).filename().string() << ',' << fs::path(model_b_path).filename().string()
      << ',' << rows.size() << ',' << num(ra.plcc) << ',' << num(ra.srcc) << ','
      << num(rb.plcc) << ',' << num(rb.srcc) << ',' << gnum(sig.t) << ',' << gnum(sig.p) << ',' << (sig.significant ? 1 : 0)
      << '\n';
  writer.add("compare.csv", csv.str());
  stage("write", [&] {
    writer.flush();
    return 0;
  });
  out << csv.str();
  return 0;
}

int cmd_hist(const CommonFlags& c, std::size_t bins, const std::vector<std::string>& args,
             std::ostream& out) {
  const auto table = load_stage(c);
  OutputWriter writer(c.out);
  write_manifest(writer, "hist", args, json{{"bins", bins}}, c.seed, {c.data},
                 {writer.path("hist.csv").string()});
  const auto h = stage("histogram", [&] { return mos_histogram(table, bins); });
  std::ostringstream csv;
  csv << "bin,lower,upper,count\n";
  char buf[128];
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%zu\n", i, h.edges[i], h.edges[i + 1],
                  h.counts[i]);
    csv << buf;
  }
  writer.add("hist.csv", csv.str());
  stage("write", [&] {
    writer.flush();
    return 0;
  });
  out << csv.str();
  return 0;
}

struct SynthFlags {
  std::size_t n = 500;
  std::size_t d = 2048;
  std::size_t rank = 8;
  double noise = 0.0;
  std::string target = "quadratic";
  std::optional<std::uint64_t> structure_seed;
  std::string output;
};

int cmd_synth(const CommonFlags& c, const SynthFlags& s, std::ostream& out) {
  SyntheticOptions o;
  o.n = s.n;
  o.d = s.d;
  o.intrinsic_rank = s.rank;
  o.noise_sigma = s.noise;
  o.target = stage("configure", [&] { return parse_synthetic_target(s.target); });
  o.seed = c.seed;
  o.structure_seed = s.structure_seed;
  const auto table = stage("generate", [&] { return make_synthetic(o); });
  stage("write", [&] {
    const fs::path p(s.output);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    save_table(table, p, parse_table_format(c.format));
    return 0;
  });
  out << "wrote " << table.size() << "x" << table.dim() << " table to " << s.output << '\n';
  return 0;
}

// `--config FILE` holds key=value lines; each key becomes `--key value`
// unless the command line already sets it.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (config_path.empty()) return args;
  std::ifstream in(config_path);
  if (!in) throw ParameterError("cannot open config file " + config_path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(config_path + ":" + std::to_string(line_no) + ": expected key=value", line_no, true);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (value == "true" || value == "false") {
      if (value == "true") extra.push_back(flag);
      continue;
    }
    extra.push_back(flag);
    extra.push_back(value);
  }
  if (args.empty()) return extra;
  // Options belong after the subcommand name.
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kolmogorov-Arnold network score regression", "kanreg"};
  app.require_subcommand(1);

  CommonFlags common;
  ModelFlags model;
  std::string model_path, model_a, model_b, rows_mode = "test";
  std::string taus = "1.0,0.99,0.98,0.95,0.9,0.85,0.8";
  std::string orders = "1,2,3,4";
  std::string layer_rows = "6:1.0,4:1.0,4:0.95";
  std::size_t bins = 100;
  SynthFlags synth;

  auto* train = app.add_subcommand("train", "Full pipeline with learning-rate grid search");
  add_common(train, common);
  add_model_flags(train, model);

  auto* cross = app.add_subcommand("cross", "Evaluate a saved model on another table");
  add_common(cross, common);
  cross->add_option("--model", model_path, "Model file from train")->required();

  auto* pca = app.add_subcommand("pca", "Retained components per variance ratio");
  add_common(pca, common);
  pca->add_option("--taus", taus, "Comma-separated variance ratios");

  auto* sweep_order = app.add_subcommand("sweep-order", "Taylor order ablation");
  add_common(sweep_order, common);
  add_model_flags(sweep_order, model);
  sweep_order->add_option("--orders", orders, "Comma-separated Taylor orders");

  auto* sweep_layers = app.add_subcommand("sweep-layers", "Layer count / PCA efficiency ablation");
  add_common(sweep_layers, common);
  add_model_flags(sweep_layers, model);
  sweep_layers->add_option("--rows", layer_rows, "Comma-separated L:tau rows");

  auto* compare = app.add_subcommand("compare", "Paired t-test between two models");
  add_common(compare, common);
  compare->add_option("--model-a", model_a, "First model file")->required();
  compare->add_option("--model-b", model_b, "Second model file")->required();
  compare->add_option("--rows", rows_mode, "test (split by --seed) or all")
      ->check(CLI::IsMember({"test", "all"}));

  auto* hist = app.add_subcommand("hist", "MOS histogram data");
  add_common(hist, common);
  hist->add_option("--bins", bins, "Number of bins")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("synth", "Write a synthetic feature table");
  add_common(gen, common, false);
  gen->add_option("--n", synth.n, "Rows");
  gen->add_option("--d", synth.d, "Feature dimension");
  gen->add_option("--rank", synth.rank, "Intrinsic rank");
  gen->add_option("--noise", synth.noise, "Feature noise sigma");
  gen->add_option("--target", synth.target, "linear, quadratic or mixed");
  gen->add_option("--structure-seed", synth.structure_seed, "Seed of the shared latent structure");
  gen->add_option("--output", synth.output, "Output table path")->required();

  std::vector<std::string> args;
  try {
    args = merge_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*train) return cmd_train(common, model, args, out);
    if (*cross) return cmd_cross(common, model_path, args, out);
    if (*pca) return cmd_pca(common, taus, args, out);
    if (*sweep_order) return cmd_sweep_order(common, model, orders, args, out, err);
    if (*sweep_layers) return cmd_sweep_layers(common, model, layer_rows, args, out, err);
    if (*compare) return cmd_compare(common, model_a, model_b, rows_mode, args, out);
    if (*hist) return cmd_hist(common, bins, args, out);
    if (*gen) return cmd_synth(common, synth, out);
  } catch (const StageError& e) {
    err << "error in stage " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace kanreg

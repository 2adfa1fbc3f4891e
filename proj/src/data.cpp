#include "kanreg/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "kanreg/errors.hpp"

namespace kanreg {

namespace {

constexpr char kMagic[4] = {'K', 'A', 'N', 'F'};
constexpr std::uint16_t kBinaryVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

static_assert(std::endian::native == std::endian::little,
              "binary tables are read and written as native little-endian");

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell, std::size_t line, std::size_t col) {
  cell = trim(cell);
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || cell.empty() || !std::isfinite(value)) {
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col + 1) +
                         ": cannot parse '" + std::string(cell) + "' as a finite number",
                     line, true);
  }
  return value;
}

FeatureTable load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 1, true);
  const auto header = split_fields(trim(line));
  if (header.size() < 2 || trim(header.back()) != "mos") {
    throw ParseError(path.string() + ": header must be f0,...,f{d-1},mos", 1, true);
  }
  const std::size_t d = header.size() - 1;

  std::vector<double> features;
  Vector scores;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split_fields(body);
    if (fields.size() != d + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no, true);
    }
    for (std::size_t c = 0; c < d; ++c) features.push_back(parse_cell(fields[c], line_no, c));
    scores.push_back(parse_cell(fields[d], line_no, d));
  }
  if (scores.empty()) throw ParseError(path.string() + ": no data rows", line_no, true);
  FeatureTable table;
  table.features = Matrix(scores.size(), d, std::move(features));
  table.scores = std::move(scores);
  table.name = path.stem().string();
  return table;
}

template <typename T>
T read_le(const std::vector<char>& bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

FeatureTable load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) throw FormatError(path.string() + ": file shorter than header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError(path.string() + ": bad magic");
  const auto version = read_le<std::uint16_t>(bytes, 4);
  if (version != kBinaryVersion)
    throw UnsupportedVersionError(path.string() + ": unsupported table version " + std::to_string(version));
  const auto n = read_le<std::uint32_t>(bytes, 6);
  const auto d = read_le<std::uint32_t>(bytes, 10);
  const std::uint64_t expected =
      kHeaderBytes + (static_cast<std::uint64_t>(n) * d + n) * sizeof(double);
  if (bytes.size() != expected) {
    throw FormatError(path.string() + ": declared " + std::to_string(n) + "x" + std::to_string(d) +
                      " needs " + std::to_string(expected) + " bytes, file has " +
                      std::to_string(bytes.size()));
  }
  if (n == 0 || d == 0) throw FormatError(path.string() + ": empty table");
  FeatureTable table;
  table.features = Matrix(n, d);
  table.scores.resize(n);
  std::memcpy(table.features.data().data(), bytes.data() + kHeaderBytes,
              static_cast<std::size_t>(n) * d * sizeof(double));
  std::memcpy(table.scores.data(), bytes.data() + kHeaderBytes + static_cast<std::size_t>(n) * d * 8,
              n * sizeof(double));
  for (double v : table.features.data())
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite feature value");
  for (double v : table.scores)
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite score");
  table.name = path.stem().string();
  return table;
}

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.write(buf, ptr - buf);
}

}  // namespace

TableFormat parse_table_format(std::string_view name) {
  if (name == "csv") return TableFormat::csv;
  if (name == "bin" || name == "binary") return TableFormat::binary;
  throw ParameterError("unknown table format '" + std::string(name) + "'");
}

FeatureTable load_table(const std::filesystem::path& path, TableFormat format) {
  return format == TableFormat::csv ? load_csv(path) : load_binary(path);
}

void save_table(const FeatureTable& table, const std::filesystem::path& path, TableFormat format) {
  if (table.scores.size() != table.size()) throw ShapeError("save_table: score count mismatch");
  if (format == TableFormat::csv) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (std::size_t c = 0; c < table.dim(); ++c) out << 'f' << c << ',';
    out << "mos\n";
    for (std::size_t r = 0; r < table.size(); ++r) {
      for (double v : table.features.row(r)) {
        write_double(out, v);
        out << ',';
      }
      write_double(out, table.scores[r]);
      out << '\n';
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(table.size());
  const auto d = static_cast<std::uint32_t>(table.dim());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kBinaryVersion), sizeof(kBinaryVersion));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(table.features.data().data()),
            static_cast<std::streamsize>(table.features.data().size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(table.scores.data()),
            static_cast<std::streamsize>(table.scores.size() * sizeof(double)));
}

SplitIndices split(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw InsufficientDataError("split: need at least 3 rows, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  // Integer arithmetic so 0.7 * n never rounds below its floor.
  const std::size_t n_train = n * 70 / 100;
  const std::size_t n_val = n * 15 / 100;
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

Standardizer fit_standardizer(const Matrix& features, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InsufficientDataError("fit_standardizer: no rows selected");
  const auto stats = column_stats(features.select_rows(indices));
  return Standardizer{stats.means, stats.stds, 1e-8};
}

Standardizer fit_standardizer(const FeatureTable& table, std::span<const std::size_t> indices) {
  return fit_standardizer(table.features, indices);
}

Matrix apply_standardizer(const Standardizer& s, const Matrix& features) {
  if (features.cols() != s.means.size()) {
    throw ShapeError("apply_standardizer: features have " + std::to_string(features.cols()) +
                     " columns, standardizer has " + std::to_string(s.means.size()));
  }
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (std::size_t c = 0; c < features.cols(); ++c)
      out(r, c) = (features(r, c) - s.means[c]) / (s.stds[c] + s.epsilon);
  return out;
}

SyntheticTarget parse_synthetic_target(std::string_view name) {
  if (name == "linear") return SyntheticTarget::linear;
  if (name == "quadratic") return SyntheticTarget::quadratic;
  if (name == "mixed") return SyntheticTarget::mixed;
  throw ParameterError("unknown synthetic target '" + std::string(name) + "'");
}

FeatureTable make_synthetic(const SyntheticOptions& o) {
  if (o.intrinsic_rank == 0 || o.intrinsic_rank > o.d)
    throw ParameterError("make_synthetic: intrinsic_rank must be in [1, d]");
  if (o.n == 0) throw ParameterError("make_synthetic: n must be >= 1");
  if (o.noise_sigma < 0.0) throw ParameterError("make_synthetic: noise_sigma must be >= 0");
  const std::size_t r = o.intrinsic_rank;

  Rng structure(o.structure_seed.value_or(o.seed) ^ 0x5354525543545552ULL);
  Matrix loading(r, o.d);
  for (auto& w : loading.data()) w = structure.normal();
  Vector lin(r), quad(r), wave(r);
  for (auto& a : lin) a = structure.normal();
  for (auto& q : quad) q = structure.normal();
  for (auto& s : wave) s = structure.normal();

  Rng sample(o.seed);
  Matrix latent(o.n, r);
  for (auto& z : latent.data()) z = sample.normal();
  FeatureTable table;
  table.features = matmul(latent, loading);
  if (o.noise_sigma > 0.0)
    for (auto& x : table.features.data()) x += o.noise_sigma * sample.normal();

  Vector raw(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    auto z = latent.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      s += lin[j] * z[j];
      if (o.target != SyntheticTarget::linear) s += quad[j] * z[j] * z[j];
      if (o.target == SyntheticTarget::mixed) s += wave[j] * std::sin(3.14159265358979323846 * z[j] / 2.0);
    }
    if (o.target == SyntheticTarget::mixed && r >= 2) s += z[0] * z[1];
    raw[i] = s;
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double span = *hi - *lo;
  table.scores.resize(o.n);
  for (std::size_t i = 0; i < o.n; ++i)
    table.scores[i] = span > 0.0 ? 100.0 * (raw[i] - *lo) / span : 50.0;
  table.name = "synthetic";
  return table;
}

Histogram mos_histogram(const FeatureTable& table, std::size_t bins) {
  if (bins == 0) throw ParameterError("mos_histogram: bins must be >= 1");
  if (table.scores.empty()) throw InsufficientDataError("mos_histogram: empty table");
  const auto [lo_it, hi_it] = std::minmax_element(table.scores.begin(), table.scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Histogram h;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;
  for (double s : table.scores) {
    std::size_t bin = 0;
    if (width > 0.0) {
      bin = static_cast<std::size_t>((s - lo) / width);
      bin = std::min(bin, bins - 1);
    }
    ++h.counts[bin];
  }
  return h;
}

}  // namespace kanreg

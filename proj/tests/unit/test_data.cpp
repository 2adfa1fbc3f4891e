#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "kanreg/data.hpp"
#include "kanreg/errors.hpp"
#include "kanreg/metrics.hpp"

using namespace kanreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kanreg_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

FeatureTable small_table() {
  FeatureTable t;
  t.features = Matrix::from_rows({{0.1, -2.5}, {1e-300, 3.0}, {12345.678, 1.0 / 3.0}});
  t.scores = {1.5, 2.25, 4.0};
  t.name = "small";
  return t;
}

}  // namespace

TEST_CASE("csv load") {
  const auto p = scratch("three.csv");
  write_text(p, "f0,f1,mos\n1,2,3.5\n4,5,1\n-1,0.5,2\n");
  const auto t = load_table(p, TableFormat::csv);
  CHECK(t.size() == 3);
  CHECK(t.dim() == 2);
  CHECK(t.features(2, 1) == 0.5);
  CHECK(t.scores == Vector{3.5, 1, 2});
  CHECK(t.name == "three");
}

TEST_CASE("csv errors carry positions") {
  const auto ragged = scratch("ragged.csv");
  write_text(ragged, "f0,f1,mos\n1,2,3\n4,5\n");
  try {
    (void)load_table(ragged, TableFormat::csv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.is_line());
    CHECK(e.offset() == 3);
  }

  const auto bad = scratch("bad_cell.csv");
  write_text(bad, "f0,f1,mos\n1,2,3\n4,abc,1\n");
  try {
    (void)load_table(bad, TableFormat::csv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("column 2") != std::string::npos);
  }

  const auto header = scratch("bad_header.csv");
  write_text(header, "a,b,score\n1,2,3\n");
  CHECK_THROWS_AS(load_table(header, TableFormat::csv), ParseError);
  CHECK_THROWS_AS(load_table(scratch("missing.csv"), TableFormat::csv), FormatError);
}

TEST_CASE("round trips") {
  const auto t = small_table();
  for (auto fmt : {TableFormat::csv, TableFormat::binary}) {
    const auto p = scratch(fmt == TableFormat::csv ? "rt.csv" : "rt.bin");
    save_table(t, p, fmt);
    const auto back = load_table(p, fmt);
    CHECK(back.features == t.features);
    CHECK(back.scores == t.scores);
  }
}

TEST_CASE("binary validation") {
  const auto t = small_table();
  const auto p = scratch("v.bin");
  save_table(t, p, TableFormat::binary);
  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(bytes.size() == 14 + 8 * (6 + 3));
  CHECK(bytes.substr(0, 4) == "KANF");

  auto mutate = [&](const std::string& name, std::string data) {
    const auto q = scratch(name);
    write_text(q, data);
    return q;
  };
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(load_table(mutate("m.bin", magic), TableFormat::binary), FormatError);
  CHECK_THROWS_AS(load_table(mutate("s.bin", bytes.substr(0, 10)), TableFormat::binary), FormatError);
  CHECK_THROWS_AS(load_table(mutate("t.bin", bytes.substr(0, bytes.size() - 8)), TableFormat::binary),
                  FormatError);
  CHECK_THROWS_AS(load_table(mutate("x.bin", bytes + "12345678"), TableFormat::binary), FormatError);
  std::string version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(load_table(mutate("ver.bin", version), TableFormat::binary), UnsupportedVersionError);
}

TEST_CASE("format names") {
  CHECK(parse_table_format("csv") == TableFormat::csv);
  CHECK(parse_table_format("bin") == TableFormat::binary);
  CHECK_THROWS_AS(parse_table_format("xlsx"), ParameterError);
}

TEST_CASE("split sizes and determinism") {
  auto s = split(100, 7);
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 15);
  CHECK(s.test.size() == 15);
  s = split(10, 7);
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);

  const auto a = split(57, 3), b = split(57, 3), c = split(57, 4);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);

  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 57);
  CHECK(*all.rbegin() == 56);
  CHECK_THROWS_AS(split(2, 1), InsufficientDataError);
}

TEST_CASE("standardizer") {
  const Matrix m = Matrix::from_rows({{1, 5, 100}, {2, 5, 0}, {3, 5, -7}});
  const std::vector<std::size_t> rows = {0, 1, 2};
  const auto st = fit_standardizer(m, rows);
  const Matrix z = apply_standardizer(st, m);
  CHECK(z(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z(1, 0) == doctest::Approx(0.0));
  CHECK(z(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
  for (std::size_t r = 0; r < 3; ++r) CHECK(z(r, 1) == 0.0);
  const auto stats = column_stats(z);
  for (double mu : stats.means) CHECK(std::abs(mu) < 1e-8);

  // Only listed rows feed the statistics.
  const std::vector<std::size_t> first = {0, 1};
  const auto part = fit_standardizer(m, first);
  CHECK(part.means[0] == 1.5);
  CHECK(part.means[2] == 50.0);
  CHECK_THROWS_AS(fit_standardizer(m, std::vector<std::size_t>{}), InsufficientDataError);
  CHECK_THROWS_AS(apply_standardizer(st, Matrix(1, 2)), ShapeError);
}

TEST_CASE("synthetic tables") {
  SyntheticOptions o;
  o.n = 200;
  o.d = 30;
  o.intrinsic_rank = 4;
  o.target = SyntheticTarget::linear;
  o.seed = 5;
  const auto a = make_synthetic(o);
  const auto b = make_synthetic(o);
  CHECK(a.features == b.features);
  CHECK(a.scores == b.scores);
  CHECK(*std::min_element(a.scores.begin(), a.scores.end()) == doctest::Approx(0.0));
  CHECK(*std::max_element(a.scores.begin(), a.scores.end()) == doctest::Approx(100.0));

  // Noiseless linear target: least squares on the features recovers it.
  const Matrix x = a.features;
  Matrix xtx = matmul(x.transpose(), x);
  for (std::size_t i = 0; i < 30; ++i) xtx(i, i) += 1e-9;
  const auto eig = sym_eig(xtx);
  Vector xty(30, 0.0);
  double ymean = 0.0;
  for (double s : a.scores) ymean += s;
  ymean /= a.size();
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t j = 0; j < 30; ++j) xty[j] += x(r, j) * (a.scores[r] - ymean);
  Vector w(30, 0.0);
  for (std::size_t k = 0; k < 30; ++k) {
    if (eig.values[k] < 1e-6 * eig.values[0]) continue;
    double proj = 0.0;
    for (std::size_t j = 0; j < 30; ++j) proj += eig.vectors(k, j) * xty[j];
    for (std::size_t j = 0; j < 30; ++j) w[j] += proj / eig.values[k] * eig.vectors(k, j);
  }
  Vector pred(a.size(), 0.0);
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t j = 0; j < 30; ++j) pred[r] += x(r, j) * w[j];
  CHECK(plcc(pred, a.scores) > 0.999);

  SyntheticOptions other = o;
  other.seed = 6;
  other.structure_seed = 5;
  const auto c = make_synthetic(other);
  CHECK(!(c.features == a.features));

  o.intrinsic_rank = 31;
  CHECK_THROWS_AS(make_synthetic(o), ParameterError);
  CHECK(parse_synthetic_target("mixed") == SyntheticTarget::mixed);
  CHECK_THROWS_AS(parse_synthetic_target("cubic"), ParameterError);
}

TEST_CASE("histogram") {
  FeatureTable t;
  t.features = Matrix(5, 1);
  t.scores = {3, 3, 3, 3, 3};
  auto h = mos_histogram(t);
  CHECK(h.counts.size() == 100);
  CHECK(h.edges.size() == 101);
  std::size_t nonzero = 0, total = 0;
  for (auto c : h.counts) {
    nonzero += c > 0;
    total += c;
  }
  CHECK(nonzero == 1);
  CHECK(total == 5);

  Rng rng(2);
  FeatureTable u;
  u.features = Matrix(20000, 1);
  for (int i = 0; i < 20000; ++i) u.scores.push_back(rng.uniform(0.0, 100.0));
  h = mos_histogram(u, 20);
  total = 0;
  double chi2 = 0.0;
  for (auto c : h.counts) {
    total += c;
    chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  }
  CHECK(total == 20000);
  // 19 degrees of freedom; 60 is far beyond the 0.999 quantile.
  CHECK(chi2 < 60.0);
  CHECK(h.edges.front() == *std::min_element(u.scores.begin(), u.scores.end()));
  CHECK(h.edges.back() == *std::max_element(u.scores.begin(), u.scores.end()));
  CHECK_THROWS_AS(mos_histogram(u, 0), ParameterError);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kanreg/linalg.hpp"

namespace kanreg {

/// n x d quality features with one subjective score per row.
struct FeatureTable {
  Matrix features;
  Vector scores;
  std::string name;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

enum class TableFormat { csv, binary };

TableFormat parse_table_format(std::string_view name);

/// CSV: header f0,...,f{d-1},mos then one row per sample.
/// Binary: "KANF", u16 version 1, u32 n, u32 d, n*d f64 features row-major,
/// n f64 scores; all little-endian.
FeatureTable load_table(const std::filesystem::path& path, TableFormat format);
void save_table(const FeatureTable& table, const std::filesystem::path& path, TableFormat format);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Shuffles 0..n-1 with Rng(seed); the first floor(0.7 n) go to train, the
/// next floor(0.15 n) to validation, the rest to test.
SplitIndices split(std::size_t n, std::uint64_t seed);

struct Standardizer {
  Vector means;
  Vector stds;
  double epsilon = 1e-8;
};

/// Statistics from the listed rows only.
Standardizer fit_standardizer(const Matrix& features, std::span<const std::size_t> indices);
Standardizer fit_standardizer(const FeatureTable& table, std::span<const std::size_t> indices);
/// (x - mean) / (std + epsilon)
Matrix apply_standardizer(const Standardizer& standardizer, const Matrix& features);

enum class SyntheticTarget { linear, quadratic, mixed };

SyntheticTarget parse_synthetic_target(std::string_view name);

struct SyntheticOptions {
  std::size_t n = 500;
  std::size_t d = 2048;
  std::size_t intrinsic_rank = 8;
  double noise_sigma = 0.0;
  SyntheticTarget target = SyntheticTarget::quadratic;
  std::uint64_t seed = 0;
  /// Seed of the loading matrix and target coefficients; defaults to `seed`.
  /// Tables sharing it share their latent structure.
  std::optional<std::uint64_t> structure_seed;
};

/// Rows are z * W + noise with z ~ N(0, I_r) and a Gaussian loading W; the
/// score is the chosen function of z mapped affinely onto [0, 100].
FeatureTable make_synthetic(const SyntheticOptions& options);

struct Histogram {
  Vector edges;                      // bins + 1
  std::vector<std::size_t> counts;   // bins
};

Histogram mos_histogram(const FeatureTable& table, std::size_t bins = 100);

}  // namespace kanreg

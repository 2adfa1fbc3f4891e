#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kanreg/basis.hpp"
#include "kanreg/linalg.hpp"

namespace kanreg {

using LayerDims = std::vector<std::size_t>;

/// Gradient tensors in the order of the owning network's parameter_blocks().
struct GradientSet {
  std::vector<Vector> blocks;

  bool all_zero() const noexcept;
};

/// One layer of learnable edge functions. The edge from input i to output j
/// is sum_k coeffs[(j * in_dim + i) * b + k] * basis_k(x_i). Wavelet layers
/// additionally carry a scale and shift per edge, indexed j * in_dim + i.
struct KanLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t b = 0;
  Vector coeffs;
  Vector scales;
  Vector shifts;

  double& coeff(std::size_t out, std::size_t in, std::size_t k) noexcept {
    return coeffs[(out * in_dim + in) * b + k];
  }
  double coeff(std::size_t out, std::size_t in, std::size_t k) const noexcept {
    return coeffs[(out * in_dim + in) * b + k];
  }
};

class KanNetwork {
 public:
  KanNetwork() = default;
  /// Zero-initialized network. dims must have at least two entries, all >= 1.
  KanNetwork(LayerDims dims, BasisSpec spec);

  const LayerDims& layer_dims() const noexcept { return dims_; }
  const BasisSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const KanLayer& layer(std::size_t i) const { return layers_.at(i); }
  /// Any mutable access invalidates outstanding forward caches.
  KanLayer& mutable_layer(std::size_t i) {
    ++generation_;
    return layers_.at(i);
  }
  std::size_t parameter_count() const noexcept;

  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;
  /// True for blocks holding edge coefficients (L1 applies to these).
  std::vector<bool> l1_mask() const;
  /// Restores constraints after an optimizer step (wavelet scale > 0).
  void project();

  std::uint64_t generation() const noexcept { return generation_; }

 private:
  LayerDims dims_;
  BasisSpec spec_;
  std::vector<KanLayer> layers_;
  std::uint64_t generation_ = 0;
};

/// Intermediates of a KAN forward pass needed by backward().
struct KanCache {
  const KanNetwork* owner = nullptr;
  std::uint64_t generation = 0;
  std::size_t batch = 0;
  struct Layer {
    Matrix inputs;     // n x in, pre-squash
    Vector basis;      // n x in x b
    Vector d_basis;    // n x in x b, already multiplied by the squash derivative
  };
  std::vector<Layer> layers;
};

struct KanForward {
  Vector outputs;
  KanCache cache;
};

/// Throws ShapeError on a column mismatch and NumericError naming the layer
/// when any intermediate is non-finite.
KanForward forward(const KanNetwork& net, const Matrix& batch);
Vector predict(const KanNetwork& net, const Matrix& batch);
/// Reverse-mode gradients of sum_s output_grads[s] * out_s. Throws
/// ContractError when the cache does not belong to the network's current state.
GradientSet backward(const KanNetwork& net, const KanCache& cache,
                     std::span<const double> output_grads);

/// Four-entry width schedule keyed on the input dimension.
LayerDims auto_configure(std::size_t input_dim, std::size_t output_dim);

/// Sum over layers of d_l * b * d_{l+1}.
std::size_t estimate_forward_cost(const LayerDims& dims, const BasisSpec& spec);

/// Coefficients i.i.d. uniform in +-sqrt(6 / (in_dim * b + out_dim)); wavelet
/// scales 1, shifts 0.
KanNetwork init_network(const LayerDims& dims, const BasisSpec& spec, Rng& rng);

/// Affine layers with rectifier hidden activations and a linear head.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  explicit MlpNetwork(LayerDims dims);

  /// [input_dim, 1024, 512, 256, 128, 1]; input_dim is 2048 for ResNet-50 features.
  static LayerDims default_dims(std::size_t input_dim = 2048);

  const LayerDims& layer_dims() const noexcept { return dims_; }
  std::size_t layer_count() const noexcept { return weights_.size(); }
  // weights[l] is out x in row-major.
  const Vector& weights(std::size_t l) const { return weights_.at(l); }
  const Vector& biases(std::size_t l) const { return biases_.at(l); }
  Vector& mutable_weights(std::size_t l) {
    ++generation_;
    return weights_.at(l);
  }
  Vector& mutable_biases(std::size_t l) {
    ++generation_;
    return biases_.at(l);
  }
  std::size_t parameter_count() const noexcept;

  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;
  std::vector<bool> l1_mask() const;
  void project() {}

  std::uint64_t generation() const noexcept { return generation_; }

 private:
  LayerDims dims_;
  std::vector<Vector> weights_;
  std::vector<Vector> biases_;
  std::uint64_t generation_ = 0;
};

struct MlpCache {
  const MlpNetwork* owner = nullptr;
  std::uint64_t generation = 0;
  // activations[l] is the input of layer l (post-rectifier for l > 0).
  std::vector<Matrix> activations;
};

struct MlpForward {
  Vector outputs;
  MlpCache cache;
};

MlpForward forward(const MlpNetwork& net, const Matrix& batch);
Vector predict(const MlpNetwork& net, const Matrix& batch);
GradientSet backward(const MlpNetwork& net, const MlpCache& cache,
                     std::span<const double> output_grads);
/// He-uniform weights, zero biases.
MlpNetwork init_mlp(const LayerDims& dims, Rng& rng);

}  // namespace kanreg

#include "kanreg/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kanreg/errors.hpp"

namespace kanreg {

namespace {

// Four independent partial sums; fixed association order keeps results
// reproducible while letting the compiler pipeline the loop.
double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void check_finite(std::span<const double> values, std::size_t layer) {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError(layer, "non-finite activation");
}

void check_dims(const LayerDims& dims) {
  if (dims.size() < 2) throw ShapeError("network needs at least an input and an output dimension");
  for (auto d : dims)
    if (d == 0) throw ShapeError("network dimensions must be >= 1");
}

bool is_wavelet(const BasisSpec& spec) {
  return spec.family == BasisFamily::wavelet_mexican_hat;
}

// Forward through one layer; `record` receives basis tables when non-null.
Matrix layer_forward(const KanLayer& layer, const BasisSpec& spec, const Matrix& in,
                     KanCache::Layer* record) {
  const std::size_t n = in.rows();
  const std::size_t b = layer.b;
  const std::size_t width = layer.in_dim * b;
  Matrix out(n, layer.out_dim);

  if (is_wavelet(spec)) {
    for (std::size_t s = 0; s < n; ++s) {
      auto x = in.row(s);
      auto y = out.row(s);
      for (std::size_t j = 0; j < layer.out_dim; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < layer.in_dim; ++i) {
          const std::size_t e = j * layer.in_dim + i;
          acc += layer.coeffs[e] * eval_wavelet(x[i], layer.scales[e], layer.shifts[e]).value;
        }
        y[j] = acc;
      }
    }
    if (record) record->inputs = in;
    return out;
  }

  const bool squash = spec.squashes_input();
  Vector basis(width);
  Vector d_basis(width);
  if (record) {
    record->inputs = in;
    record->basis.assign(n * width, 0.0);
    record->d_basis.assign(n * width, 0.0);
  }
  for (std::size_t s = 0; s < n; ++s) {
    auto x = in.row(s);
    for (std::size_t i = 0; i < layer.in_dim; ++i) {
      double u = x[i];
      double du = 1.0;
      if (squash) {
        u = std::tanh(u);
        du = 1.0 - u * u;
      }
      std::span<double> v(basis.data() + i * b, b);
      std::span<double> dv(d_basis.data() + i * b, b);
      evaluate_basis(spec, u, v, dv);
      if (squash)
        for (auto& d : dv) d *= du;
    }
    auto y = out.row(s);
    for (std::size_t j = 0; j < layer.out_dim; ++j)
      y[j] = dot(layer.coeffs.data() + j * width, basis.data(), width);
    if (record) {
      std::copy(basis.begin(), basis.end(), record->basis.begin() + s * width);
      std::copy(d_basis.begin(), d_basis.end(), record->d_basis.begin() + s * width);
    }
  }
  return out;
}

}  // namespace

bool GradientSet::all_zero() const noexcept {
  for (const auto& block : blocks)
    for (double g : block)
      if (g != 0.0) return false;
  return true;
}

KanNetwork::KanNetwork(LayerDims dims, BasisSpec spec) : dims_(std::move(dims)), spec_(std::move(spec)) {
  check_dims(dims_);
  spec_.validate();
  const std::size_t b = basis_size(spec_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    KanLayer layer;
    layer.in_dim = dims_[l];
    layer.out_dim = dims_[l + 1];
    layer.b = b;
    layer.coeffs.assign(layer.in_dim * layer.out_dim * b, 0.0);
    if (is_wavelet(spec_)) {
      layer.scales.assign(layer.in_dim * layer.out_dim, 1.0);
      layer.shifts.assign(layer.in_dim * layer.out_dim, 0.0);
    }
    layers_.push_back(std::move(layer));
  }
}

std::size_t KanNetwork::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l.coeffs.size() + l.scales.size() + l.shifts.size();
  return total;
}

std::vector<std::span<double>> KanNetwork::parameter_blocks() {
  ++generation_;
  std::vector<std::span<double>> blocks;
  for (auto& l : layers_) {
    blocks.emplace_back(l.coeffs);
    if (is_wavelet(spec_)) {
      blocks.emplace_back(l.scales);
      blocks.emplace_back(l.shifts);
    }
  }
  return blocks;
}

std::vector<std::span<const double>> KanNetwork::parameter_blocks() const {
  std::vector<std::span<const double>> blocks;
  for (const auto& l : layers_) {
    blocks.emplace_back(l.coeffs);
    if (is_wavelet(spec_)) {
      blocks.emplace_back(l.scales);
      blocks.emplace_back(l.shifts);
    }
  }
  return blocks;
}

std::vector<bool> KanNetwork::l1_mask() const {
  std::vector<bool> mask;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    mask.push_back(true);
    if (is_wavelet(spec_)) {
      mask.push_back(false);
      mask.push_back(false);
    }
  }
  return mask;
}

void KanNetwork::project() {
  if (!is_wavelet(spec_)) return;
  ++generation_;
  for (auto& l : layers_)
    for (auto& s : l.scales) s = std::max(s, 1e-3);
}

KanForward forward(const KanNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.layer_dims().front()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " + std::to_string(net.layer_dims().front()));
  }
  check_finite(batch.data(), 0);
  KanForward result;
  result.cache.owner = &net;
  result.cache.generation = net.generation();
  result.cache.batch = batch.rows();
  result.cache.layers.resize(net.layer_count());

  Matrix current = batch;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    current = layer_forward(net.layer(l), net.spec(), current, &result.cache.layers[l]);
    check_finite(current.data(), l);
  }
  result.outputs.assign(current.data().begin(), current.data().end());
  return result;
}

Vector predict(const KanNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.layer_dims().front()) {
    throw ShapeError("predict: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " + std::to_string(net.layer_dims().front()));
  }
  Matrix current = batch;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    current = layer_forward(net.layer(l), net.spec(), current, nullptr);
    check_finite(current.data(), l);
  }
  return Vector(current.data().begin(), current.data().end());
}

GradientSet backward(const KanNetwork& net, const KanCache& cache,
                     std::span<const double> output_grads) {
  if (cache.owner != &net || cache.generation != net.generation() ||
      cache.layers.size() != net.layer_count()) {
    throw ContractError("backward: cache does not match the network's current parameters");
  }
  if (output_grads.size() != cache.batch) {
    throw ShapeError("backward: expected " + std::to_string(cache.batch) + " output gradients");
  }
  const bool wavelet = is_wavelet(net.spec());
  const std::size_t n = cache.batch;

  std::vector<Vector> coeff_grads(net.layer_count());
  std::vector<Vector> scale_grads(net.layer_count());
  std::vector<Vector> shift_grads(net.layer_count());

  // Upstream gradient w.r.t. the current layer's outputs, n x out.
  Matrix upstream(n, 1);
  std::copy(output_grads.begin(), output_grads.end(), upstream.data().begin());

  for (std::size_t li = net.layer_count(); li-- > 0;) {
    const KanLayer& layer = net.layer(li);
    const auto& rec = cache.layers[li];
    const std::size_t b = layer.b;
    const std::size_t width = layer.in_dim * b;
    Vector& gc = coeff_grads[li];
    gc.assign(layer.coeffs.size(), 0.0);
    Matrix down(n, layer.in_dim);

    if (wavelet) {
      Vector& gs = scale_grads[li];
      Vector& gh = shift_grads[li];
      gs.assign(layer.scales.size(), 0.0);
      gh.assign(layer.shifts.size(), 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        auto x = rec.inputs.row(s);
        auto g = upstream.row(s);
        auto dx = down.row(s);
        for (std::size_t j = 0; j < layer.out_dim; ++j) {
          if (g[j] == 0.0) continue;
          for (std::size_t i = 0; i < layer.in_dim; ++i) {
            const std::size_t e = j * layer.in_dim + i;
            const auto w = eval_wavelet(x[i], layer.scales[e], layer.shifts[e]);
            const double c = layer.coeffs[e];
            gc[e] += g[j] * w.value;
            gs[e] += g[j] * c * w.d_scale;
            gh[e] += g[j] * c * w.d_shift;
            dx[i] += g[j] * c * w.d_x;
          }
        }
      }
    } else {
      Vector g_basis(width);
      for (std::size_t s = 0; s < n; ++s) {
        const double* basis = rec.basis.data() + s * width;
        const double* d_basis = rec.d_basis.data() + s * width;
        auto g = upstream.row(s);
        std::fill(g_basis.begin(), g_basis.end(), 0.0);
        for (std::size_t j = 0; j < layer.out_dim; ++j) {
          if (g[j] == 0.0) continue;
          axpy(g[j], basis, gc.data() + j * width, width);
          if (li > 0) axpy(g[j], layer.coeffs.data() + j * width, g_basis.data(), width);
        }
        if (li == 0) continue;  // input gradients are not needed
        auto dx = down.row(s);
        for (std::size_t i = 0; i < layer.in_dim; ++i)
          dx[i] = dot(g_basis.data() + i * b, d_basis + i * b, b);
      }
    }
    upstream = std::move(down);
  }

  GradientSet grads;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    grads.blocks.push_back(std::move(coeff_grads[l]));
    if (wavelet) {
      grads.blocks.push_back(std::move(scale_grads[l]));
      grads.blocks.push_back(std::move(shift_grads[l]));
    }
  }
  return grads;
}

LayerDims auto_configure(std::size_t input_dim, std::size_t output_dim) {
  if (input_dim == 0 || output_dim == 0)
    throw ParameterError("auto_configure: dimensions must be >= 1");
  if (input_dim <= 64) return {input_dim, 64, 16, output_dim};
  if (input_dim <= 128) return {input_dim, 128, 32, output_dim};
  if (input_dim <= 256) return {input_dim, 256, 64, output_dim};
  return {input_dim, 512, 128, output_dim};
}

std::size_t estimate_forward_cost(const LayerDims& dims, const BasisSpec& spec) {
  const std::size_t b = basis_size(spec);
  std::size_t cost = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) cost += dims[l] * b * dims[l + 1];
  return cost;
}

KanNetwork init_network(const LayerDims& dims, const BasisSpec& spec, Rng& rng) {
  KanNetwork net(dims, spec);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    KanLayer& layer = net.mutable_layer(l);
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.in_dim * layer.b + layer.out_dim));
    for (auto& c : layer.coeffs) c = rng.uniform(-bound, bound);
  }
  return net;
}

// --- MLP -------------------------------------------------------------------

MlpNetwork::MlpNetwork(LayerDims dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.emplace_back(dims_[l] * dims_[l + 1], 0.0);
    biases_.emplace_back(dims_[l + 1], 0.0);
  }
}

LayerDims MlpNetwork::default_dims(std::size_t input_dim) {
  return {input_dim, 1024, 512, 256, 128, 1};
}

std::size_t MlpNetwork::parameter_count() const noexcept {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) total += weights_[l].size() + biases_[l].size();
  return total;
}

std::vector<std::span<double>> MlpNetwork::parameter_blocks() {
  ++generation_;
  std::vector<std::span<double>> blocks;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    blocks.emplace_back(weights_[l]);
    blocks.emplace_back(biases_[l]);
  }
  return blocks;
}

std::vector<std::span<const double>> MlpNetwork::parameter_blocks() const {
  std::vector<std::span<const double>> blocks;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    blocks.emplace_back(weights_[l]);
    blocks.emplace_back(biases_[l]);
  }
  return blocks;
}

std::vector<bool> MlpNetwork::l1_mask() const {
  std::vector<bool> mask;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    mask.push_back(true);
    mask.push_back(false);
  }
  return mask;
}

namespace {

Matrix mlp_layer(const MlpNetwork& net, std::size_t l, const Matrix& in) {
  const std::size_t n_in = net.layer_dims()[l];
  const std::size_t n_out = net.layer_dims()[l + 1];
  const bool hidden = l + 1 < net.layer_count();
  const Vector& w = net.weights(l);
  const Vector& bias = net.biases(l);
  Matrix out(in.rows(), n_out);
  for (std::size_t s = 0; s < in.rows(); ++s) {
    const double* x = in.row(s).data();
    auto y = out.row(s);
    for (std::size_t j = 0; j < n_out; ++j) {
      double v = bias[j] + dot(w.data() + j * n_in, x, n_in);
      y[j] = hidden ? std::max(v, 0.0) : v;
    }
  }
  check_finite(out.data(), l);
  return out;
}

}  // namespace

MlpForward forward(const MlpNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.layer_dims().front())
    throw ShapeError("mlp forward: batch has " + std::to_string(batch.cols()) + " columns, expected " +
                     std::to_string(net.layer_dims().front()));
  MlpForward result;
  result.cache.owner = &net;
  result.cache.generation = net.generation();
  result.cache.activations.push_back(batch);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Matrix next = mlp_layer(net, l, result.cache.activations.back());
    if (l + 1 == net.layer_count()) {
      result.outputs.assign(next.data().begin(), next.data().end());
    } else {
      result.cache.activations.push_back(std::move(next));
    }
  }
  return result;
}

Vector predict(const MlpNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.layer_dims().front())
    throw ShapeError("mlp predict: batch has " + std::to_string(batch.cols()) + " columns, expected " +
                     std::to_string(net.layer_dims().front()));
  Matrix current = batch;
  for (std::size_t l = 0; l < net.layer_count(); ++l) current = mlp_layer(net, l, current);
  return Vector(current.data().begin(), current.data().end());
}

GradientSet backward(const MlpNetwork& net, const MlpCache& cache,
                     std::span<const double> output_grads) {
  if (cache.owner != &net || cache.generation != net.generation() ||
      cache.activations.size() != net.layer_count()) {
    throw ContractError("mlp backward: cache does not match the network's current parameters");
  }
  const std::size_t n = cache.activations.front().rows();
  if (output_grads.size() != n) throw ShapeError("mlp backward: output gradient count mismatch");

  std::vector<Vector> wg(net.layer_count());
  std::vector<Vector> bg(net.layer_count());
  Matrix upstream(n, 1);
  std::copy(output_grads.begin(), output_grads.end(), upstream.data().begin());

  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const std::size_t n_in = net.layer_dims()[l];
    const std::size_t n_out = net.layer_dims()[l + 1];
    const Matrix& in = cache.activations[l];
    const Vector& w = net.weights(l);
    wg[l].assign(w.size(), 0.0);
    bg[l].assign(n_out, 0.0);
    Matrix down(n, n_in);
    for (std::size_t s = 0; s < n; ++s) {
      auto g = upstream.row(s);
      const double* x = in.row(s).data();
      double* dx = down.row(s).data();
      for (std::size_t j = 0; j < n_out; ++j) {
        if (g[j] == 0.0) continue;
        bg[l][j] += g[j];
        axpy(g[j], x, wg[l].data() + j * n_in, n_in);
        if (l > 0) axpy(g[j], w.data() + j * n_in, dx, n_in);
      }
      // Rectifier derivative of the layer below: its output is this input.
      if (l > 0)
        for (std::size_t i = 0; i < n_in; ++i)
          if (x[i] <= 0.0) dx[i] = 0.0;
    }
    upstream = std::move(down);
  }

  GradientSet grads;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    grads.blocks.push_back(std::move(wg[l]));
    grads.blocks.push_back(std::move(bg[l]));
  }
  return grads;
}

MlpNetwork init_mlp(const LayerDims& dims, Rng& rng) {
  MlpNetwork net(dims);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l]));
    for (auto& w : net.mutable_weights(l)) w = rng.uniform(-bound, bound);
  }
  return net;
}

}  // namespace kanreg

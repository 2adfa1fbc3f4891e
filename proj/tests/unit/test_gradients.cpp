#include <doctest.h>

#include "kanreg/gradcheck.hpp"

using namespace kanreg;

namespace {

Matrix random_batch(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

Vector random_weights(std::size_t n, Rng& rng) {
  Vector w(n);
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace

TEST_CASE("kan gradients match central differences for every family") {
  for (auto family : kAllFamilies) {
    CAPTURE(family_name(family));
    Rng rng(100 + static_cast<int>(family));
    const auto spec = BasisSpec::make(family);
    KanNetwork net = init_network({5, 8, 4, 1}, spec, rng);
    if (family == BasisFamily::wavelet_mexican_hat) {
      for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& layer = net.mutable_layer(l);
        for (auto& s : layer.scales) s = rng.uniform(0.6, 1.6);
        for (auto& s : layer.shifts) s = rng.uniform(-0.5, 0.5);
      }
    }
    const Matrix batch = random_batch(16, 5, rng);
    const auto report = gradient_check(net, batch, random_weights(16, rng));
    CHECK(report.checked == net.parameter_count());
    CHECK(report.tight_fraction() >= 0.99);
    CHECK(report.within_loose == report.checked);
  }
}

TEST_CASE("kan gradients with higher orders and a shifted expansion point") {
  Rng rng(9);
  auto spec = BasisSpec::make(BasisFamily::taylor);
  spec.order = 4;
  spec.expansion_point = 0.25;
  KanNetwork net = init_network({3, 4, 1}, spec, rng);
  const auto report = gradient_check(net, random_batch(8, 3, rng), random_weights(8, rng));
  CHECK(report.within_loose == report.checked);
  CHECK(report.tight_fraction() >= 0.99);
}

TEST_CASE("mlp gradients match central differences") {
  Rng rng(12);
  MlpNetwork net = init_mlp({6, 10, 7, 1}, rng);
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (auto& b : net.mutable_biases(l)) b = rng.uniform(-0.1, 0.1);
  const auto report = gradient_check(net, random_batch(16, 6, rng), random_weights(16, rng));
  CHECK(report.tight_fraction() >= 0.99);
  CHECK(report.within_loose == report.checked);
}

TEST_CASE("zero output gradients give a zero gradient set") {
  Rng rng(1);
  KanNetwork net = init_network({3, 2, 1}, BasisSpec::make(BasisFamily::chebyshev), rng);
  const auto fwd = forward(net, random_batch(4, 3, rng));
  CHECK(backward(net, fwd.cache, Vector(4, 0.0)).all_zero());
}

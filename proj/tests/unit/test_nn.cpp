#include <doctest.h>

#include <cmath>

#include "kancql/nn.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace kancql;

namespace {

// Checks d(sum(out ⊙ R))/d(everything) for a single layer against central differences.
void check_layer_gradients(Layer layer, const Matrix& x_in, Rng& rng, double tol) {
  Matrix x = x_in;
  const Matrix out = layer_forward(layer, x, nullptr);
  const Matrix R = gaussian_sample(rng, out.rows(), out.cols());
  auto loss = [&] { return hadamard(layer_forward(layer, x, nullptr), R).sum(); };

  LayerTape tape;
  (void)layer_forward(layer, x, &tape);
  std::vector<Matrix> grads;
  for (const Matrix* p : layer_parameters(std::as_const(layer))) grads.emplace_back(p->rows(), p->cols());
  const Matrix dx = layer_backward(layer, tape, R, grads);

  const auto params = layer_parameters(layer);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix num = oracle::numeric_gradient(loss, *params[i]);
    CHECK(oracle::max_relative_error(grads[i], num) < tol);
  }
  CHECK(oracle::max_relative_error(dx, oracle::numeric_gradient(loss, x)) < tol);
}

}  // namespace

TEST_CASE("linear forward") {
  LinearLayer id(3, 3);
  id.weight = Matrix::identity(3);
  Rng rng(1);
  const Matrix x = gaussian_sample(rng, 4, 3);
  CHECK(linear_forward(id, x, nullptr) == x);

  LinearLayer l(2, 1);
  l.weight = Matrix::from_rows({{1, 1}});
  l.bias = Matrix::from_rows({{3}});
  CHECK(linear_forward(l, Matrix::from_rows({{2, 5}}), nullptr) == Matrix::from_rows({{10}}));
}

TEST_CASE("linear gradients") {
  Rng rng(2);
  LinearLayer l(3, 2);
  init_linear(l, rng);
  for (double& b : l.bias.values()) b = rng.normal();
  const Matrix x = gaussian_sample(rng, 5, 3);
  check_layer_gradients(l, x, rng, 1e-6);

  SUBCASE("weight gradient is upstream^T x") {
    LayerTape tape;
    (void)linear_forward(l, x, &tape);
    const Matrix up = gaussian_sample(rng, 5, 2);
    std::vector<Matrix> g{Matrix(2, 3), Matrix(2, 1)};
    (void)linear_backward(l, tape, up, g);
    CHECK(oracle::max_relative_error(g[0], oracle::matmul(transpose(up), x), 1.0) < 1e-12);
  }
  SUBCASE("zero upstream gives zero gradients") {
    LayerTape tape;
    (void)linear_forward(l, x, &tape);
    std::vector<Matrix> g{Matrix(2, 3), Matrix(2, 1)};
    const Matrix dx = linear_backward(l, tape, Matrix(5, 2), g);
    CHECK(g[0] == Matrix(2, 3));
    CHECK(g[1] == Matrix(2, 1));
    CHECK(dx == Matrix(5, 3));
  }
}

TEST_CASE("KAN forward special cases") {
  Rng rng(3);
  const Matrix x = uniform_sample(rng, 6, 3, -0.9, 0.9);

  SUBCASE("spline path zeroed leaves SiLU") {
    KanLayer k(3, 3);
    k.base_weight = Matrix::identity(3);
    k.scaler = gaussian_sample(rng, 3, 3);
    const Matrix y = kan_forward(k, x, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(oracle::silu(x[i])).epsilon(1e-14));
  }
  SUBCASE("constant spline weights collapse by partition of unity") {
    KanLayer k(3, 2);
    k.spline_weight.fill(0.7);
    const Matrix y = kan_forward(k, x, nullptr);
    for (double v : y.values()) CHECK(std::abs(v - 0.7 * 3) < 1e-12);
  }
  SUBCASE("matches an edge-by-edge oracle") {
    KanLayer k(3, 2);
    init_kan(k, rng);
    Layer layer = k;
    fixture::scramble(layer_parameters(layer), rng);
    const auto& kl = std::get<KanLayer>(layer);
    const Matrix y = kan_forward(kl, x, nullptr);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t o = 0; o < 2; ++o) {
        double want = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
          double spline = 0.0;
          for (int b = 0; b < 8; ++b) {
            spline += kl.spline_weight(o, i * 8 + b) * oracle::bspline(b, 3, x(r, i), 5, 3, -1, 1);
          }
          want += kl.base_weight(o, i) * oracle::silu(x(r, i)) + kl.scaler(o, i) * spline;
        }
        CHECK(std::abs(y(r, o) - want) < 1e-12);
      }
    }
  }
}

TEST_CASE("KAN gradients on a 3x4 -> 2 layer") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Layer layer = KanLayer(4, 2);
    init_kan(std::get<KanLayer>(layer), rng);
    fixture::scramble(layer_parameters(layer), rng);
    check_layer_gradients(layer, uniform_sample(rng, 3, 4, -1.3, 1.3), rng, 1e-6);
  }
}

TEST_CASE("composed networks") {
  for (auto kind : {BackboneKind::Mlp, BackboneKind::Kan}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Rng rng(seed + 100);
      Network net;
      if (kind == BackboneKind::Mlp) {
        LinearLayer a(3, 5), b(5, 2);
        init_linear(a, rng);
        init_linear(b, rng);
        net.add(a, Activation::Tanh);
        net.add(b, Activation::Identity);
      } else {
        KanLayer a(3, 4), b(4, 2);
        init_kan(a, rng);
        init_kan(b, rng);
        net.add(a, Activation::Identity);
        net.add(b, Activation::Identity);
      }
      fixture::scramble(net.parameters(), rng, 0.3);
      Matrix x = gaussian_sample(rng, 4, 3);
      const Matrix R = gaussian_sample(rng, 4, 2);
      auto loss = [&] { return hadamard(net.forward(x), R).sum(); };
      NetTape tape;
      (void)net.forward(x, &tape);
      auto grads = net.zero_grads();
      const Matrix dx = net.backward(tape, R, grads);
      const auto params = net.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(oracle::max_relative_error(grads[i], oracle::numeric_gradient(loss, *params[i])) < 1e-6);
      }
      CHECK(oracle::max_relative_error(dx, oracle::numeric_gradient(loss, x)) < 1e-6);
    }
  }
}

TEST_CASE("backward without forward is a state error") {
  Network net;
  net.add(LinearLayer(2, 2), Activation::ReLU);
  CHECK_THROWS_AS(net.backward(NetTape{}, Matrix(1, 2)), StateError);
}

TEST_CASE("activations") {
  CHECK(activate(Activation::ReLU, -1.0) == 0.0);
  CHECK(activate(Activation::ReLU, 2.0) == 2.0);
  CHECK(activate(Activation::SiLU, 1.5) == doctest::Approx(oracle::silu(1.5)));
  for (auto a : {Activation::SiLU, Activation::Tanh}) {
    for (double x : {-2.0, -0.3, 0.4, 3.0}) {
      const double fd = (activate(a, x + 1e-6) - activate(a, x - 1e-6)) / 2e-6;
      CHECK(activate_derivative(a, x) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("init") {
  Rng a(5), b(5);
  KanLayer k1(4, 3), k2(4, 3);
  init_kan(k1, a);
  init_kan(k2, b);
  CHECK(k1.spline_weight == k2.spline_weight);
  CHECK(k1.scaler == Matrix(3, 4, 1.0));
  LinearLayer l(16, 4);
  init_linear(l, a);
  for (double w : l.weight.values()) CHECK(std::abs(w) <= 0.25);
  CHECK(l.bias == Matrix(4, 1));
}

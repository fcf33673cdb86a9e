#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kancql/bspline.hpp"
#include "kancql/config.hpp"
#include "kancql/matrix.hpp"
#include "kancql/rng.hpp"

namespace kancql {

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Activation { ReLU, SiLU, Tanh, Identity };

double activate(Activation kind, double x);
double activate_derivative(Activation kind, double x);
Matrix apply_activation(Activation kind, const Matrix& x);

// y = x Wᵀ + b
struct LinearLayer {
  LinearLayer() = default;
  LinearLayer(std::size_t n_in, std::size_t n_out) : weight(n_out, n_in), bias(n_out, 1) {}

  std::size_t n_in() const { return weight.cols(); }
  std::size_t n_out() const { return weight.rows(); }
  std::size_t num_params() const { return weight.size() + bias.size(); }

  Matrix weight;  // (n_out, n_in)
  Matrix bias;    // (n_out, 1)
};

// Efficient-KAN layer. Edge (o, i) computes
//   base_weight[o,i] * SiLU(x_i) + scaler[o,i] * sum_b spline_weight[o,i,b] * B_b(x_i)
// and node o sums its incoming edges. No bias.
struct KanLayer {
  KanLayer() = default;
  KanLayer(std::size_t n_in, std::size_t n_out, SplineGrid g = SplineGrid{})
      : grid(g),
        base_weight(n_out, n_in),
        spline_weight(n_out, n_in * g.num_basis()),
        scaler(n_out, n_in, 1.0) {}

  std::size_t n_in() const { return base_weight.cols(); }
  std::size_t n_out() const { return base_weight.rows(); }
  std::size_t num_params() const {
    return base_weight.size() + spline_weight.size() + scaler.size();
  }

  SplineGrid grid;
  Matrix base_weight;    // (n_out, n_in)
  Matrix spline_weight;  // (n_out, n_in * (G+k)), column i*(G+k) + b
  Matrix scaler;         // (n_out, n_in)
};

using Layer = std::variant<LinearLayer, KanLayer>;

// Forward intermediates for one layer.
struct LayerTape {
  bool recorded = false;
  Matrix input;
  // KAN only.
  Matrix silu;
  Matrix basis;
  Matrix basis_deriv;
  Matrix scaled_spline;  // scaler ⊙ spline_weight, (n_out, n_in * (G+k))
};

// Gradients are accumulated (+=) into `param_grads`, one entry per parameter
// tensor in the layer's parameter order; pass an empty span to skip them.
Matrix linear_forward(const LinearLayer& layer, const Matrix& x, LayerTape* tape);
Matrix linear_backward(const LinearLayer& layer, const LayerTape& tape, const Matrix& upstream,
                       std::span<Matrix> param_grads);
Matrix kan_forward(const KanLayer& layer, const Matrix& x, LayerTape* tape);
Matrix kan_backward(const KanLayer& layer, const LayerTape& tape, const Matrix& upstream,
                    std::span<Matrix> param_grads);

Matrix layer_forward(const Layer& layer, const Matrix& x, LayerTape* tape);
Matrix layer_backward(const Layer& layer, const LayerTape& tape, const Matrix& upstream,
                      std::span<Matrix> param_grads);

std::size_t layer_num_params(const Layer& layer);
std::vector<Matrix*> layer_parameters(Layer& layer);
std::vector<const Matrix*> layer_parameters(const Layer& layer);
std::vector<std::string> layer_parameter_names(const Layer& layer);

struct NetTape {
  bool recorded = false;
  std::vector<LayerTape> layers;
  std::vector<Matrix> pre_activation;
};

// A stack of layers with an activation after each one.
class Network {
 public:
  struct Stage {
    Layer layer;
    Activation activation;
  };

  void add(Layer layer, Activation after);

  std::size_t n_in() const;
  std::size_t n_out() const;
  const std::vector<Stage>& stages() const { return stages_; }
  std::vector<Stage>& stages() { return stages_; }

  Matrix forward(const Matrix& x, NetTape* tape = nullptr) const;
  // Input gradient; parameter gradients are accumulated into `grads` when it
  // is non-empty (layout of parameters()).
  Matrix backward(const NetTape& tape, const Matrix& upstream,
                  std::span<Matrix> grads = {}) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t num_params() const;
  std::vector<Matrix> zero_grads() const;

  bool operator==(const Network& o) const;

 private:
  std::vector<Stage> stages_;
};

struct ParamCounts {
  std::size_t actor = 0;
  std::size_t critic = 0;
};

// Closed-form parameter totals for one actor and one critic.
ParamCounts count_params(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim);
ParamCounts count_params(std::string_view config_name, std::size_t obs_dim, std::size_t act_dim);

// Kaiming-uniform (bound 1/sqrt(fan_in)) weights, zero bias.
void init_linear(LinearLayer& layer, Rng& rng);
// Kaiming-uniform base weights, N(0, (0.1/G)^2) spline coefficients, unit scaler.
void init_kan(KanLayer& layer, Rng& rng);

}  // namespace kancql

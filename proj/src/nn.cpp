#include "kancql/nn.hpp"

#include <cmath>

namespace kancql {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_input(const Matrix& x, std::size_t n_in, const char* what) {
  if (x.cols() != n_in) {
    throw ShapeError(std::string(what) + ": input " + x.shape_string() + " expects " +
                     std::to_string(n_in) + " columns");
  }
}

void check_upstream(const LayerTape& tape, const Matrix& upstream, std::size_t n_out,
                    const char* what) {
  if (!tape.recorded) throw StateError(std::string(what) + ": backward called before forward");
  if (upstream.rows() != tape.input.rows() || upstream.cols() != n_out) {
    throw ShapeError(std::string(what) + ": upstream " + upstream.shape_string() +
                     " does not match output (" + std::to_string(tape.input.rows()) + "x" +
                     std::to_string(n_out) + ")");
  }
}

// Accumulates an (n_out, 1) bias gradient from upstream column sums.
void accumulate_column_sums(const Matrix& upstream, Matrix& out) {
  for (std::size_t r = 0; r < upstream.rows(); ++r) {
    const auto row = upstream.row(r);
    for (std::size_t c = 0; c < upstream.cols(); ++c) out[c] += row[c];
  }
}

std::size_t linear_count(std::size_t n_in, std::size_t n_out) { return n_in * n_out + n_out; }

std::size_t kan_count(std::size_t n_in, std::size_t n_out) {
  const SplineGrid g;
  return n_in * n_out * (g.num_basis() + 2);
}

// Widths from input to output through `hidden` layers of size `width`.
std::vector<std::size_t> widths(std::size_t in, std::size_t hidden, std::size_t width,
                                std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < hidden; ++i) w.push_back(width);
  w.push_back(out);
  return w;
}

std::size_t backbone_count(BackboneKind kind, const std::vector<std::size_t>& w) {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    total += kind == BackboneKind::Mlp ? linear_count(w[i], w[i + 1]) : kan_count(w[i], w[i + 1]);
  }
  return total;
}

}  // namespace

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::SiLU: return x * sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::SiLU: {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

Matrix apply_activation(Activation kind, const Matrix& x) {
  if (kind == Activation::Identity) return x;
  Matrix out = x;
  for (double& v : out.values()) v = activate(kind, v);
  return out;
}

Matrix linear_forward(const LinearLayer& layer, const Matrix& x, LayerTape* tape) {
  check_input(x, layer.n_in(), "linear_forward");
  Matrix out = matmul_nt(x, layer.weight);
  add_row_broadcast(out, layer.bias);
  if (tape) {
    tape->input = x;
    tape->recorded = true;
  }
  return out;
}

Matrix linear_backward(const LinearLayer& layer, const LayerTape& tape, const Matrix& upstream,
                       std::span<Matrix> param_grads) {
  check_upstream(tape, upstream, layer.n_out(), "linear_backward");
  if (!param_grads.empty()) {
    matmul_tn_acc(upstream, tape.input, param_grads[0]);
    accumulate_column_sums(upstream, param_grads[1]);
  }
  return matmul(upstream, layer.weight);
}

Matrix kan_forward(const KanLayer& layer, const Matrix& x, LayerTape* tape) {
  check_input(x, layer.n_in(), "kan_forward");
  const std::size_t nb = layer.grid.num_basis();
  const std::size_t n_in = layer.n_in();
  const std::size_t n_out = layer.n_out();

  Matrix scaled(n_out, n_in * nb);
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t i = 0; i < n_in; ++i) {
      const double s = layer.scaler(o, i);
      for (std::size_t b = 0; b < nb; ++b)
        scaled(o, i * nb + b) = s * layer.spline_weight(o, i * nb + b);
    }

  Matrix silu = apply_activation(Activation::SiLU, x);
  Matrix basis;
  Matrix basis_deriv;
  if (tape) {
    basis = Matrix(x.rows(), n_in * nb);
    basis_deriv = Matrix(x.rows(), n_in * nb);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t i = 0; i < n_in; ++i)
        layer.grid.eval_with_derivative(x(r, i), &basis(r, i * nb), &basis_deriv(r, i * nb));
  } else {
    basis = basis_values(layer.grid, x);
  }

  Matrix out = matmul_nt(silu, layer.base_weight);
  out += matmul_nt(basis, scaled);

  if (tape) {
    tape->input = x;
    tape->silu = std::move(silu);
    tape->basis = std::move(basis);
    tape->basis_deriv = std::move(basis_deriv);
    tape->scaled_spline = std::move(scaled);
    tape->recorded = true;
  }
  return out;
}

Matrix kan_backward(const KanLayer& layer, const LayerTape& tape, const Matrix& upstream,
                    std::span<Matrix> param_grads) {
  check_upstream(tape, upstream, layer.n_out(), "kan_backward");
  const std::size_t nb = layer.grid.num_basis();
  const std::size_t n_in = layer.n_in();
  const std::size_t n_out = layer.n_out();

  if (!param_grads.empty()) {
    matmul_tn_acc(upstream, tape.silu, param_grads[0]);
    const Matrix d_scaled = matmul_tn(upstream, tape.basis);
    Matrix& d_spline = param_grads[1];
    Matrix& d_scaler = param_grads[2];
    for (std::size_t o = 0; o < n_out; ++o)
      for (std::size_t i = 0; i < n_in; ++i) {
        const double s = layer.scaler(o, i);
        double acc = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
          const std::size_t c = i * nb + b;
          d_spline(o, c) += d_scaled(o, c) * s;
          acc += d_scaled(o, c) * layer.spline_weight(o, c);
        }
        d_scaler(o, i) += acc;
      }
  }

  Matrix dx = matmul(upstream, layer.base_weight);
  const Matrix d_basis = matmul(upstream, tape.scaled_spline);
  for (std::size_t r = 0; r < dx.rows(); ++r)
    for (std::size_t i = 0; i < n_in; ++i) {
      double acc = dx(r, i) * activate_derivative(Activation::SiLU, tape.input(r, i));
      for (std::size_t b = 0; b < nb; ++b) {
        acc += d_basis(r, i * nb + b) * tape.basis_deriv(r, i * nb + b);
      }
      dx(r, i) = acc;
    }
  return dx;
}

Matrix layer_forward(const Layer& layer, const Matrix& x, LayerTape* tape) {
  return std::visit(
      [&](const auto& l) -> Matrix {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, LinearLayer>) {
          return linear_forward(l, x, tape);
        } else {
          return kan_forward(l, x, tape);
        }
      },
      layer);
}

Matrix layer_backward(const Layer& layer, const LayerTape& tape, const Matrix& upstream,
                      std::span<Matrix> param_grads) {
  return std::visit(
      [&](const auto& l) -> Matrix {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, LinearLayer>) {
          return linear_backward(l, tape, upstream, param_grads);
        } else {
          return kan_backward(l, tape, upstream, param_grads);
        }
      },
      layer);
}

std::size_t layer_num_params(const Layer& layer) {
  return std::visit([](const auto& l) { return l.num_params(); }, layer);
}

std::vector<Matrix*> layer_parameters(Layer& layer) {
  if (auto* l = std::get_if<LinearLayer>(&layer)) return {&l->weight, &l->bias};
  auto& k = std::get<KanLayer>(layer);
  return {&k.base_weight, &k.spline_weight, &k.scaler};
}

std::vector<const Matrix*> layer_parameters(const Layer& layer) {
  if (const auto* l = std::get_if<LinearLayer>(&layer)) return {&l->weight, &l->bias};
  const auto& k = std::get<KanLayer>(layer);
  return {&k.base_weight, &k.spline_weight, &k.scaler};
}

std::vector<std::string> layer_parameter_names(const Layer& layer) {
  if (std::holds_alternative<LinearLayer>(layer)) return {"weight", "bias"};
  return {"base_weight", "spline_weight", "scaler"};
}

void Network::add(Layer layer, Activation after) {
  if (!stages_.empty()) {
    const std::size_t prev = n_out();
    const std::size_t next = std::visit([](const auto& l) { return l.n_in(); }, layer);
    if (prev != next) {
      throw ShapeError("Network::add: layer expects " + std::to_string(next) +
                       " inputs, previous layer emits " + std::to_string(prev));
    }
  }
  stages_.push_back(Stage{std::move(layer), after});
}

std::size_t Network::n_in() const {
  if (stages_.empty()) return 0;
  return std::visit([](const auto& l) { return l.n_in(); }, stages_.front().layer);
}

std::size_t Network::n_out() const {
  if (stages_.empty()) return 0;
  return std::visit([](const auto& l) { return l.n_out(); }, stages_.back().layer);
}

Matrix Network::forward(const Matrix& x, NetTape* tape) const {
  if (tape) {
    tape->layers.assign(stages_.size(), LayerTape{});
    tape->pre_activation.assign(stages_.size(), Matrix{});
    tape->recorded = false;
  }
  Matrix h = x;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    Matrix z = layer_forward(stages_[i].layer, h, tape ? &tape->layers[i] : nullptr);
    if (stages_[i].activation == Activation::Identity) {
      h = std::move(z);
    } else {
      h = apply_activation(stages_[i].activation, z);
      if (tape) tape->pre_activation[i] = std::move(z);
    }
  }
  if (tape) tape->recorded = true;
  return h;
}

Matrix Network::backward(const NetTape& tape, const Matrix& upstream,
                         std::span<Matrix> grads) const {
  if (!tape.recorded || tape.layers.size() != stages_.size()) {
    throw StateError("Network::backward called without a matching forward");
  }
  if (!grads.empty() && grads.size() != parameters().size()) {
    throw ShapeError("Network::backward: gradient list does not match parameters");
  }
  // Offsets of each layer's tensors in the flat gradient list.
  std::vector<std::size_t> offsets(stages_.size() + 1, 0);
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    offsets[i + 1] = offsets[i] + layer_parameters(stages_[i].layer).size();
  }

  Matrix g = upstream;
  for (std::size_t idx = stages_.size(); idx-- > 0;) {
    const auto& stage = stages_[idx];
    if (stage.activation != Activation::Identity) {
      const Matrix& z = tape.pre_activation[idx];
      require_same_shape(g, z, "Network::backward");
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= activate_derivative(stage.activation, z[j]);
    }
    std::span<Matrix> pg;
    if (!grads.empty()) pg = grads.subspan(offsets[idx], offsets[idx + 1] - offsets[idx]);
    g = layer_backward(stage.layer, tape.layers[idx], g, pg);
  }
  return g;
}

std::vector<Matrix*> Network::parameters() {
  std::vector<Matrix*> out;
  for (auto& s : stages_) {
    auto p = layer_parameters(s.layer);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<const Matrix*> Network::parameters() const {
  std::vector<const Matrix*> out;
  for (const auto& s : stages_) {
    auto p = layer_parameters(s.layer);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    for (const auto& n : layer_parameter_names(stages_[i].layer)) {
      out.push_back("layer" + std::to_string(i) + "." + n);
    }
  }
  return out;
}

std::size_t Network::num_params() const {
  std::size_t total = 0;
  for (const auto& s : stages_) total += layer_num_params(s.layer);
  return total;
}

std::vector<Matrix> Network::zero_grads() const {
  std::vector<Matrix> out;
  for (const Matrix* p : parameters()) out.emplace_back(p->rows(), p->cols());
  return out;
}

bool Network::operator==(const Network& o) const {
  if (stages_.size() != o.stages_.size()) return false;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (stages_[i].activation != o.stages_[i].activation) return false;
    if (stages_[i].layer.index() != o.stages_[i].layer.index()) return false;
  }
  const auto a = parameters();
  const auto b = o.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

ParamCounts count_params(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim) {
  ParamCounts counts;
  if (cfg.actor_kind == BackboneKind::Mlp) {
    counts.actor = backbone_count(
        BackboneKind::Mlp, widths(obs_dim, cfg.actor_hidden_layers, cfg.actor_hidden_size, 2 * act_dim));
  } else {
    counts.actor = backbone_count(
                       BackboneKind::Kan,
                       widths(obs_dim, cfg.actor_hidden_layers, cfg.actor_hidden_size, act_dim)) +
                   linear_count(act_dim, act_dim);
  }
  counts.critic = backbone_count(
      cfg.critic_kind,
      widths(obs_dim + act_dim, cfg.critic_hidden_layers, cfg.critic_hidden_size, 1));
  return counts;
}

ParamCounts count_params(std::string_view config_name, std::size_t obs_dim, std::size_t act_dim) {
  return count_params(find_config(config_name), obs_dim, act_dim);
}

void init_linear(LinearLayer& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.n_in()));
  for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  layer.bias.fill(0.0);
}

void init_kan(KanLayer& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.n_in()));
  for (double& w : layer.base_weight.values()) w = rng.uniform(-bound, bound);
  const double noise_std = 0.1 / static_cast<double>(layer.grid.grid_size());
  for (double& w : layer.spline_weight.values()) w = noise_std * rng.normal();
  layer.scaler.fill(1.0);
}

}  // namespace kancql

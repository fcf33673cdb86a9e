#include "kancql/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kancql {

namespace {

Network make_backbone(BackboneKind kind, std::size_t in, std::size_t hidden_layers,
                      std::size_t width, std::size_t out, Rng& rng) {
  Network net;
  std::size_t prev = in;
  for (std::size_t i = 0; i <= hidden_layers; ++i) {
    const bool last = i == hidden_layers;
    const std::size_t next = last ? out : width;
    if (kind == BackboneKind::Mlp) {
      LinearLayer l(prev, next);
      init_linear(l, rng);
      net.add(std::move(l), last ? Activation::Identity : Activation::ReLU);
    } else {
      // KAN edges carry their own nonlinearity.
      KanLayer l(prev, next);
      init_kan(l, rng);
      net.add(std::move(l), Activation::Identity);
    }
    prev = next;
  }
  return net;
}

Matrix clamp_log_std(const Matrix& raw) {
  Matrix out = raw;
  for (double& v : out.values()) v = std::clamp(v, kLogStdMin, kLogStdMax);
  return out;
}

}  // namespace

ActorNet::ActorNet(BackboneKind kind, std::size_t obs_dim, std::size_t act_dim, Network backbone,
                   Network std_head)
    : kind_(kind),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      backbone_(std::move(backbone)),
      std_head_(std::move(std_head)) {
  const std::size_t expected_out = kind == BackboneKind::Mlp ? 2 * act_dim : act_dim;
  if (backbone_.n_in() != obs_dim || backbone_.n_out() != expected_out) {
    throw ShapeError("ActorNet: backbone widths do not match obs/act dims");
  }
  if (kind == BackboneKind::Kan && (std_head_.n_in() != act_dim || std_head_.n_out() != act_dim)) {
    throw ShapeError("ActorNet: KAN std head must map act_dim -> act_dim");
  }
}

ActorOutput ActorNet::forward(const Matrix& obs, ActorTape* tape) const {
  Matrix out = backbone_.forward(obs, tape ? &tape->backbone : nullptr);
  ActorOutput result;
  Matrix raw;
  if (kind_ == BackboneKind::Mlp) {
    result.mean = col_slice(out, 0, act_dim_);
    raw = col_slice(out, act_dim_, act_dim_);
  } else {
    raw = std_head_.forward(out, tape ? &tape->std_head : nullptr);
    result.mean = std::move(out);
  }
  result.log_std = clamp_log_std(raw);
  if (tape) tape->raw_log_std = std::move(raw);
  return result;
}

void ActorNet::backward(const ActorTape& tape, const Matrix& d_mean, const Matrix& d_log_std,
                        std::vector<Matrix>& grads) const {
  Matrix d_raw = d_log_std;
  require_same_shape(d_raw, tape.raw_log_std, "ActorNet::backward");
  for (std::size_t i = 0; i < d_raw.size(); ++i) {
    const double v = tape.raw_log_std[i];
    if (v < kLogStdMin || v > kLogStdMax) d_raw[i] = 0.0;
  }

  const std::size_t n_backbone = backbone_.parameters().size();
  if (grads.size() != n_backbone + std_head_.parameters().size()) {
    throw ShapeError("ActorNet::backward: gradient list does not match parameters");
  }
  const std::span<Matrix> all(grads);
  if (kind_ == BackboneKind::Mlp) {
    backbone_.backward(tape.backbone, hstack(d_mean, d_raw), all);
  } else {
    Matrix d_out = d_mean;
    d_out += std_head_.backward(tape.std_head, d_raw, all.subspan(n_backbone));
    backbone_.backward(tape.backbone, d_out, all.first(n_backbone));
  }
}

std::vector<Matrix*> ActorNet::parameters() {
  auto out = backbone_.parameters();
  auto head = std_head_.parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::vector<const Matrix*> ActorNet::parameters() const {
  auto out = backbone_.parameters();
  auto head = std_head_.parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::vector<std::string> ActorNet::parameter_names() const {
  auto out = backbone_.parameter_names();
  for (auto& n : std_head_.parameter_names()) out.push_back("std_head." + n);
  return out;
}

std::size_t ActorNet::num_params() const { return backbone_.num_params() + std_head_.num_params(); }

std::vector<Matrix> ActorNet::zero_grads() const {
  std::vector<Matrix> out;
  for (const Matrix* p : parameters()) out.emplace_back(p->rows(), p->cols());
  return out;
}

CriticNet::CriticNet(std::size_t obs_dim, std::size_t act_dim, Network net)
    : obs_dim_(obs_dim), act_dim_(act_dim), net_(std::move(net)) {
  if (net_.n_in() != obs_dim + act_dim || net_.n_out() != 1) {
    throw ShapeError("CriticNet: network must map obs_dim + act_dim -> 1");
  }
}

ActorNet make_actor(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Rng& rng) {
  if (cfg.actor_kind == BackboneKind::Mlp) {
    return ActorNet(BackboneKind::Mlp, obs_dim, act_dim,
                    make_backbone(BackboneKind::Mlp, obs_dim, cfg.actor_hidden_layers,
                                  cfg.actor_hidden_size, 2 * act_dim, rng),
                    Network{});
  }
  Network backbone = make_backbone(BackboneKind::Kan, obs_dim, cfg.actor_hidden_layers,
                                   cfg.actor_hidden_size, act_dim, rng);
  Network head;
  LinearLayer std_layer(act_dim, act_dim);
  init_linear(std_layer, rng);
  head.add(std::move(std_layer), Activation::Identity);
  return ActorNet(BackboneKind::Kan, obs_dim, act_dim, std::move(backbone), std::move(head));
}

CriticNet make_critic(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Rng& rng) {
  return CriticNet(obs_dim, act_dim,
                   make_backbone(cfg.critic_kind, obs_dim + act_dim, cfg.critic_hidden_layers,
                                 cfg.critic_hidden_size, 1, rng));
}

NetworkSet build(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Rng& rng) {
  Rng actor_rng = rng.split("actor");
  Rng q1_rng = rng.split("q1");
  Rng q2_rng = rng.split("q2");
  NetworkSet set;
  set.actor = make_actor(cfg, obs_dim, act_dim, actor_rng);
  set.q1 = make_critic(cfg, obs_dim, act_dim, q1_rng);
  set.q2 = make_critic(cfg, obs_dim, act_dim, q2_rng);
  set.q1_target = set.q1;
  set.q2_target = set.q2;
  return set;
}

SquashedSample squashed_gaussian(const Matrix& mean, const Matrix& log_std, const Matrix& noise) {
  require_same_shape(mean, log_std, "squashed_gaussian(mean, log_std)");
  require_same_shape(mean, noise, "squashed_gaussian(mean, noise)");
  constexpr double half_log_2pi = 0.91893853320467274178;  // 0.5 * log(2*pi)
  SquashedSample s{Matrix(mean.rows(), mean.cols()), Matrix(mean.rows(), 1)};
  for (std::size_t r = 0; r < mean.rows(); ++r) {
    double lp = 0.0;
    for (std::size_t d = 0; d < mean.cols(); ++d) {
      const double eps = noise(r, d);
      const double ls = log_std(r, d);
      const double u = mean(r, d) + std::exp(ls) * eps;
      const double a = std::tanh(u);
      s.action(r, d) = a;
      lp += -0.5 * eps * eps - ls - half_log_2pi - std::log(1.0 - a * a + kTanhEps);
    }
    s.log_prob(r, 0) = lp;
  }
  return s;
}

void squashed_gaussian_backward(const Matrix& log_std, const Matrix& noise,
                                const SquashedSample& sample, const Matrix& d_action,
                                const Matrix& d_log_prob, Matrix& d_mean, Matrix& d_log_std) {
  require_same_shape(d_action, sample.action, "squashed_gaussian_backward(d_action)");
  if (d_log_prob.rows() != sample.action.rows() || d_log_prob.cols() != 1) {
    throw ShapeError("squashed_gaussian_backward: d_log_prob must be (batch, 1)");
  }
  d_mean = Matrix(log_std.rows(), log_std.cols());
  d_log_std = Matrix(log_std.rows(), log_std.cols());
  for (std::size_t r = 0; r < log_std.rows(); ++r) {
    const double g_lp = d_log_prob(r, 0);
    for (std::size_t d = 0; d < log_std.cols(); ++d) {
      const double a = sample.action(r, d);
      const double sech2 = 1.0 - a * a;
      // d/du of -log(1 - tanh(u)^2 + eps)
      const double dlp_du = 2.0 * a * sech2 / (sech2 + kTanhEps);
      const double d_u = d_action(r, d) * sech2 + g_lp * dlp_du;
      d_mean(r, d) = d_u;
      d_log_std(r, d) = d_u * std::exp(log_std(r, d)) * noise(r, d) - g_lp;
    }
  }
}

SquashedSample sample_action(const ActorNet& actor, const Matrix& obs, Rng& rng, PolicyTape* tape) {
  const Matrix noise = gaussian_sample(rng, obs.rows(), actor.act_dim());
  return sample_action_with_noise(actor, obs, noise, tape);
}

SquashedSample sample_action_with_noise(const ActorNet& actor, const Matrix& obs,
                                        const Matrix& noise, PolicyTape* tape) {
  ActorOutput out = actor.forward(obs, tape ? &tape->actor : nullptr);
  SquashedSample s = squashed_gaussian(out.mean, out.log_std, noise);
  if (tape) {
    tape->log_std = std::move(out.log_std);
    tape->noise = noise;
    tape->sample = s;
  }
  return s;
}

void policy_backward(const ActorNet& actor, const PolicyTape& tape, const Matrix& d_action,
                     const Matrix& d_log_prob, std::vector<Matrix>& grads) {
  Matrix d_mean;
  Matrix d_log_std;
  squashed_gaussian_backward(tape.log_std, tape.noise, tape.sample, d_action, d_log_prob, d_mean,
                             d_log_std);
  actor.backward(tape.actor, d_mean, d_log_std, grads);
}

Matrix deterministic_action(const ActorNet& actor, const Matrix& obs) {
  Matrix a = actor.forward(obs).mean;
  for (double& v : a.values()) v = std::tanh(v);
  return a;
}

Matrix q_value(const CriticNet& critic, const Matrix& obs, const Matrix& action, NetTape* tape) {
  if (obs.cols() != critic.obs_dim() || action.cols() != critic.act_dim() ||
      obs.rows() != action.rows()) {
    throw ShapeError("q_value: obs " + obs.shape_string() + " / action " + action.shape_string() +
                     " do not match critic dims (" + std::to_string(critic.obs_dim()) + ", " +
                     std::to_string(critic.act_dim()) + ")");
  }
  return critic.network().forward(hstack(obs, action), tape);
}

Matrix q_backward(const CriticNet& critic, const NetTape& tape, const Matrix& d_q,
                  std::span<Matrix> grads) {
  return critic.network().backward(tape, d_q, grads);
}

}  // namespace kancql

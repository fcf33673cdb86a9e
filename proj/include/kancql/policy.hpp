#pragma once

#include <cstddef>
#include <vector>

#include "kancql/config.hpp"
#include "kancql/matrix.hpp"
#include "kancql/nn.hpp"
#include "kancql/rng.hpp"

namespace kancql {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEps = 1e-6;

struct ActorTape {
  NetTape backbone;
  NetTape std_head;
  Matrix raw_log_std;  // before clamping
};

struct ActorOutput {
  Matrix mean;     // (batch, act_dim), pre-tanh
  Matrix log_std;  // (batch, act_dim), clamped to [kLogStdMin, kLogStdMax]
};

// Gaussian policy head squashed by tanh.
//
// MLP actors: hidden Linear+ReLU layers, then one Linear to 2*act_dim split
// into (mean | log_std). KAN actors: a KAN stack to act_dim giving the mean,
// then a Linear act_dim -> act_dim mapping the mean to log_std.
class ActorNet {
 public:
  ActorNet() = default;
  ActorNet(BackboneKind kind, std::size_t obs_dim, std::size_t act_dim, Network backbone,
           Network std_head);

  BackboneKind kind() const { return kind_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t act_dim() const { return act_dim_; }
  const Network& backbone() const { return backbone_; }
  const Network& std_head() const { return std_head_; }

  ActorOutput forward(const Matrix& obs, ActorTape* tape = nullptr) const;
  // Accumulates parameter gradients (layout of parameters()) given gradients
  // w.r.t. the clamped outputs.
  void backward(const ActorTape& tape, const Matrix& d_mean, const Matrix& d_log_std,
                std::vector<Matrix>& grads) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t num_params() const;
  std::vector<Matrix> zero_grads() const;

  bool operator==(const ActorNet& o) const = default;

 private:
  BackboneKind kind_ = BackboneKind::Mlp;
  std::size_t obs_dim_ = 0;
  std::size_t act_dim_ = 0;
  Network backbone_;
  Network std_head_;  // empty for MLP actors
};

// Q(s, a) over the concatenated [s | a] input, single output node.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(std::size_t obs_dim, std::size_t act_dim, Network net);

  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t act_dim() const { return act_dim_; }
  std::size_t input_width() const { return net_.n_in(); }
  const Network& network() const { return net_; }
  Network& network() { return net_; }

  std::vector<Matrix*> parameters() { return net_.parameters(); }
  std::vector<const Matrix*> parameters() const { return net_.parameters(); }
  std::size_t num_params() const { return net_.num_params(); }
  std::vector<Matrix> zero_grads() const { return net_.zero_grads(); }

  bool operator==(const CriticNet& o) const = default;

 private:
  std::size_t obs_dim_ = 0;
  std::size_t act_dim_ = 0;
  Network net_;
};

ActorNet make_actor(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Rng& rng);
CriticNet make_critic(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Rng& rng);

struct NetworkSet {
  ActorNet actor;
  CriticNet q1;
  CriticNet q2;
  CriticNet q1_target;
  CriticNet q2_target;
};

// Actor, twin critics, and target critics copied from the live ones.
NetworkSet build(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Rng& rng);

// Squashed Gaussian draw with fixed standard-normal noise:
//   u = mean + exp(log_std) * noise, a = tanh(u),
//   logp = sum_d [log N(u_d; mean_d, std_d) - log(1 - a_d^2 + 1e-6)].
struct SquashedSample {
  Matrix action;    // (batch, act_dim)
  Matrix log_prob;  // (batch, 1)
};

SquashedSample squashed_gaussian(const Matrix& mean, const Matrix& log_std, const Matrix& noise);
// Chain rule through squashed_gaussian for fixed noise.
void squashed_gaussian_backward(const Matrix& log_std, const Matrix& noise,
                                const SquashedSample& sample, const Matrix& d_action,
                                const Matrix& d_log_prob, Matrix& d_mean, Matrix& d_log_std);

struct PolicyTape {
  ActorTape actor;
  Matrix log_std;
  Matrix noise;
  SquashedSample sample;
};

// Reparameterized sample. When `tape` is given, policy_backward can push
// gradients of the action and log-probability into the actor.
SquashedSample sample_action(const ActorNet& actor, const Matrix& obs, Rng& rng,
                             PolicyTape* tape = nullptr);
SquashedSample sample_action_with_noise(const ActorNet& actor, const Matrix& obs,
                                        const Matrix& noise, PolicyTape* tape = nullptr);
void policy_backward(const ActorNet& actor, const PolicyTape& tape, const Matrix& d_action,
                     const Matrix& d_log_prob, std::vector<Matrix>& grads);

// tanh(mean), no sampling.
Matrix deterministic_action(const ActorNet& actor, const Matrix& obs);

// (batch, 1) Q-values.
Matrix q_value(const CriticNet& critic, const Matrix& obs, const Matrix& action,
               NetTape* tape = nullptr);
// Gradient w.r.t. [obs | action] input; parameter grads accumulated if non-empty.
Matrix q_backward(const CriticNet& critic, const NetTape& tape, const Matrix& d_q,
                  std::span<Matrix> grads = {});

}  // namespace kancql

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kancql/adam.hpp"
#include "kancql/config.hpp"
#include "kancql/dataset.hpp"
#include "kancql/policy.hpp"
#include "kancql/rng.hpp"

namespace kancql {

enum class PenaltyMode {
  // Difference of expectations under the policy and the data, plus a
  // KL(pi || Unif) estimate from the sampled actions.
  PaperLiteral,
  // CQL(H): log-mean-exp over policy and uniform actions with importance
  // weights, minus the data Q.
  LogSumExp,
};

enum class Alpha1Mode { Fixed, Lagrange };

std::string_view to_string(PenaltyMode mode);
PenaltyMode parse_penalty_mode(std::string_view name);

struct CqlHyperparams {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 3e-4;

  double alpha1 = 5.0;
  Alpha1Mode alpha1_mode = Alpha1Mode::Fixed;
  double alpha1_target_gap = 5.0;
  double alpha1_lr = 3e-4;

  double alpha2_lr = 3e-4;
  double initial_alpha2 = 1.0;
  // Defaults to -act_dim.
  std::optional<double> target_entropy;

  std::size_t batch_size = 256;
  std::size_t n_policy_actions = 10;
  std::size_t n_random_actions = 10;
  PenaltyMode penalty_mode = PenaltyMode::LogSumExp;
  std::size_t steps_per_epoch = 1000;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
  double entropy_target(std::size_t act_dim) const {
    return target_entropy.value_or(-static_cast<double>(act_dim));
  }
};

struct TrainState {
  NetworkConfig config;
  ActorNet actor;
  CriticNet q1;
  CriticNet q2;
  CriticNet q1_target;
  CriticNet q2_target;
  std::vector<AdamState> actor_opt{};
  std::vector<AdamState> q1_opt{};
  std::vector<AdamState> q2_opt{};
  Matrix log_alpha2{1, 1};
  AdamState alpha2_opt{};
  Matrix log_alpha1{1, 1};
  AdamState alpha1_opt{};
  std::uint64_t step = 0;
  Rng rng{0};

  double alpha2() const { return std::exp(log_alpha2[0]); }
  double alpha1(const CqlHyperparams& hp) const;
};

TrainState make_train_state(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim,
                            const CqlHyperparams& hp, std::uint64_t seed);

// r + gamma * (1 - done) * (min_j Q'_j(s', a') - alpha2 * log pi(a'|s')), with
// a' drawn from `next_noise` (batch, act_dim). No gradient.
Matrix td_target(const Batch& batch, const ActorNet& actor, const CriticNet& q1_target,
                 const CriticNet& q2_target, double alpha2, double gamma, const Matrix& next_noise);

// Every random quantity one critic update consumes.
struct CriticSamples {
  Matrix td_target;        // (B, 1)
  Matrix policy_actions;   // (B*N, act_dim), N consecutive rows per state
  Matrix policy_log_prob;  // (B*N, 1)
  Matrix random_actions;   // (B*M, act_dim), uniform in [-1, 1]
};

CriticSamples draw_critic_samples(const Batch& batch, const TrainState& state,
                                  const CqlHyperparams& hp, Rng& rng);

struct CriticLoss {
  double loss = 0.0;
  double bellman = 0.0;      // 1/2 E[(Q - target)^2]
  double penalty = 0.0;      // the bracket multiplied by alpha1
  double regularizer = 0.0;  // R(pi); paper-literal mode only, constant in the critic
  double mean_q_data = 0.0;
  double mean_q_pi = 0.0;
  double gap() const { return mean_q_pi - mean_q_data; }
  std::vector<Matrix> grads;  // empty unless requested
};

CriticLoss critic_loss(const CriticNet& critic, const Batch& batch, const CriticSamples& samples,
                       double alpha1, const CqlHyperparams& hp, bool with_grads = true);

struct ActorLoss {
  double loss = 0.0;
  double mean_log_prob = 0.0;
  double mean_min_q = 0.0;
  std::vector<Matrix> grads;
};

// E[-min_j Q_j(s, a) + alpha2 * log pi(a|s)] with a reparameterized from
// `noise` (batch, act_dim). Critics are read-only.
ActorLoss actor_loss(const ActorNet& actor, const CriticNet& q1, const CriticNet& q2,
                     const Batch& batch, double alpha2, const Matrix& noise,
                     bool with_grads = true);

struct TemperatureLoss {
  double loss;
  double grad;  // d loss / d log_alpha
};

// -log_alpha2 * (mean_log_prob + target_entropy)
TemperatureLoss alpha2_objective(double log_alpha2, double mean_log_prob, double target_entropy);
// One Adam step on log_alpha2; returns the new value.
double alpha2_update(TrainState& state, double mean_log_prob, const CqlHyperparams& hp);
// Lagrange step: -alpha1 * (penalty - target_gap), gradient w.r.t. log_alpha1.
TemperatureLoss alpha1_objective(double log_alpha1, double penalty, double target_gap);

// target <- tau * live + (1 - tau) * target
void soft_update(const CriticNet& live, CriticNet& target, double tau);

struct StepReport {
  std::uint64_t step = 0;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double conservative_gap = 0.0;
  double mean_q_data = 0.0;
  double mean_q_pi = 0.0;

  bool operator==(const StepReport&) const = default;
};

// Critics, then actor, then temperatures, then targets, on one batch.
StepReport train_step(TrainState& state, const Dataset& dataset, const CqlHyperparams& hp);

struct EvalSummary {
  double return_mean = 0.0;
  double return_std = 0.0;
  double normalized_score = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha2 = 0.0;
  double conservative_gap = 0.0;
  double mean_q_data = 0.0;
  double mean_q_pi = 0.0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double normalized_score = 0.0;
  double wall_seconds = 0.0;
};

using EvalHook = std::function<EvalSummary(const TrainState&, std::size_t epoch)>;

struct TrainOptions {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> metrics_csv;
  std::optional<std::filesystem::path> checkpoint;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochMetrics> metrics;
};

// epochs * steps_per_epoch steps; the hook runs after every epoch.
TrainResult train(const NetworkConfig& cfg, const Dataset& dataset, const CqlHyperparams& hp,
                  std::size_t epochs, const EvalHook& eval_hook, const TrainOptions& options = {});

// Column order: epoch, critic1_loss, critic2_loss, actor_loss, alpha2,
// conservative_gap, mean_q_data, mean_q_pi, eval_return_mean,
// eval_return_std, normalized_score, wall_seconds.
std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

// KCQL checkpoint holding the actor, both critics and their targets.
void save_train_checkpoint(const std::filesystem::path& path, const TrainState& state,
                           const std::string& env_name);
struct LoadedPolicy {
  NetworkConfig config;
  std::string env_name;
  std::size_t obs_dim;
  std::size_t act_dim;
  ActorNet actor;
  CriticNet q1;
  CriticNet q2;
};
LoadedPolicy load_train_checkpoint(const std::filesystem::path& path);

}  // namespace kancql

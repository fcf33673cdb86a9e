#include "kancql/cql.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "kancql/checkpoint.hpp"

namespace kancql {

namespace {

constexpr double kAlpha1Max = 1e6;

std::vector<AdamState> make_opts(const std::vector<const Matrix*>& params, double lr) {
  std::vector<AdamState> out;
  out.reserve(params.size());
  for (const Matrix* p : params) out.emplace_back(*p, AdamConfig{.lr = lr});
  return out;
}

void apply_adam(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                std::vector<AdamState>& opts) {
  for (std::size_t i = 0; i < params.size(); ++i) adam_update(*params[i], grads[i], opts[i]);
}

Matrix min_q(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a[i], b[i]);
  return out;
}

void require_nonempty(const Batch& batch, const char* what) {
  if (batch.size() == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}

// Every step allocates and frees the same multi-megabyte activations. glibc
// serves those with mmap by default, and the page faults cost ~20% of a step.
void keep_large_blocks_in_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string_view to_string(PenaltyMode mode) {
  return mode == PenaltyMode::PaperLiteral ? "paper-literal" : "logsumexp";
}

PenaltyMode parse_penalty_mode(std::string_view name) {
  if (name == "paper-literal") return PenaltyMode::PaperLiteral;
  if (name == "logsumexp") return PenaltyMode::LogSumExp;
  throw std::invalid_argument("unknown penalty mode '" + std::string(name) + "'");
}

void CqlHyperparams::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("CqlHyperparams: " + m); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must be in (0, 1]");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0) || !(alpha2_lr > 0.0) || !(alpha1_lr > 0.0)) {
    fail("learning rates must be positive");
  }
  if (!(alpha1 >= 0.0)) fail("alpha1 must be non-negative");
  if (!(initial_alpha2 > 0.0)) fail("initial_alpha2 must be positive");
  if (batch_size < 1 || n_policy_actions < 1 || n_random_actions < 1 || steps_per_epoch < 1) {
    fail("all counts must be >= 1");
  }
}

double TrainState::alpha1(const CqlHyperparams& hp) const {
  if (hp.alpha1_mode == Alpha1Mode::Fixed) return hp.alpha1;
  return std::clamp(std::exp(log_alpha1[0]), 0.0, kAlpha1Max);
}

TrainState make_train_state(const NetworkConfig& cfg, std::size_t obs_dim, std::size_t act_dim,
                            const CqlHyperparams& hp, std::uint64_t seed) {
  hp.validate();
  keep_large_blocks_in_heap();
  const Rng root(seed);
  Rng init_rng = root.split("init");
  NetworkSet nets = build(cfg, obs_dim, act_dim, init_rng);

  TrainState st{cfg,
                std::move(nets.actor),
                std::move(nets.q1),
                std::move(nets.q2),
                std::move(nets.q1_target),
                std::move(nets.q2_target)};
  st.actor_opt = make_opts(std::as_const(st.actor).parameters(), hp.actor_lr);
  st.q1_opt = make_opts(std::as_const(st.q1).parameters(), hp.critic_lr);
  st.q2_opt = make_opts(std::as_const(st.q2).parameters(), hp.critic_lr);
  st.log_alpha2[0] = std::log(hp.initial_alpha2);
  st.alpha2_opt = AdamState(1, 1, AdamConfig{.lr = hp.alpha2_lr});
  st.log_alpha1[0] = std::log(std::max(hp.alpha1, 1e-12));
  st.alpha1_opt = AdamState(1, 1, AdamConfig{.lr = hp.alpha1_lr});
  st.rng = root.split("train");
  return st;
}

Matrix td_target(const Batch& batch, const ActorNet& actor, const CriticNet& q1_target,
                 const CriticNet& q2_target, double alpha2, double gamma, const Matrix& next_noise) {
  const SquashedSample next = sample_action_with_noise(actor, batch.next_obs, next_noise);
  const Matrix q_next = min_q(q_value(q1_target, batch.next_obs, next.action),
                              q_value(q2_target, batch.next_obs, next.action));
  Matrix y(batch.size(), 1);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double soft_value = q_next[i] - alpha2 * next.log_prob[i];
    y[i] = batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * soft_value;
  }
  return y;
}

CriticSamples draw_critic_samples(const Batch& batch, const TrainState& state,
                                  const CqlHyperparams& hp, Rng& rng) {
  require_nonempty(batch, "draw_critic_samples");
  const std::size_t act_dim = state.actor.act_dim();
  CriticSamples s;
  const Matrix next_noise = gaussian_sample(rng, batch.size(), act_dim);
  s.td_target = td_target(batch, state.actor, state.q1_target, state.q2_target, state.alpha2(),
                          hp.gamma, next_noise);

  const Matrix obs_rep = repeat_rows(batch.obs, hp.n_policy_actions);
  const Matrix pi_noise = gaussian_sample(rng, obs_rep.rows(), act_dim);
  SquashedSample pi = sample_action_with_noise(state.actor, obs_rep, pi_noise);
  s.policy_actions = std::move(pi.action);
  s.policy_log_prob = std::move(pi.log_prob);

  if (hp.penalty_mode == PenaltyMode::LogSumExp) {
    s.random_actions = uniform_sample(rng, batch.size() * hp.n_random_actions, act_dim, -1.0, 1.0);
  }
  return s;
}

CriticLoss critic_loss(const CriticNet& critic, const Batch& batch, const CriticSamples& samples,
                       double alpha1, const CqlHyperparams& hp, bool with_grads) {
  require_nonempty(batch, "critic_loss");
  const std::size_t B = batch.size();
  const std::size_t N = samples.policy_actions.rows() / B;
  const bool lse = hp.penalty_mode == PenaltyMode::LogSumExp;
  const std::size_t M = lse ? samples.random_actions.rows() / B : 0;
  const std::size_t act_dim = critic.act_dim();
  if (N == 0 || samples.policy_actions.rows() != B * N || samples.td_target.rows() != B ||
      (lse && (M == 0 || samples.random_actions.rows() != B * M))) {
    throw ShapeError("critic_loss: samples do not match batch size " + std::to_string(B));
  }

  // All Q evaluations go through one stacked forward pass:
  // rows [0, B) data, [B, B + BN) policy, [B + BN, B + BN + BM) uniform.
  std::vector<Matrix> obs_parts{batch.obs, repeat_rows(batch.obs, N)};
  std::vector<Matrix> act_parts{batch.actions, samples.policy_actions};
  if (lse) {
    obs_parts.push_back(repeat_rows(batch.obs, M));
    act_parts.push_back(samples.random_actions);
  }
  NetTape tape;
  const Matrix q = q_value(critic, vstack(obs_parts), vstack(act_parts), with_grads ? &tape : nullptr);
  const std::size_t pi_off = B;
  const std::size_t rand_off = B + B * N;

  CriticLoss out;
  Matrix dq(q.rows(), 1);
  const double inv_b = 1.0 / static_cast<double>(B);

  double sq = 0.0;
  double q_data = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double diff = q[i] - samples.td_target[i];
    sq += diff * diff;
    q_data += q[i];
    dq[i] = diff * inv_b - alpha1 * inv_b;
  }
  out.bellman = 0.5 * sq * inv_b;
  out.mean_q_data = q_data * inv_b;
  double q_pi = 0.0;
  for (std::size_t j = 0; j < B * N; ++j) q_pi += q[pi_off + j];
  out.mean_q_pi = q_pi / static_cast<double>(B * N);

  const double log_uniform_density = -static_cast<double>(act_dim) * std::numbers::ln2;
  if (!lse) {
    out.penalty = out.mean_q_pi - out.mean_q_data;
    const double w = alpha1 / static_cast<double>(B * N);
    for (std::size_t j = 0; j < B * N; ++j) dq[pi_off + j] += w;
    out.regularizer = samples.policy_log_prob.mean() - log_uniform_density;
  } else {
    std::vector<double> v(N + M);
    double lse_sum = 0.0;
    const double log_count = std::log(static_cast<double>(N + M));
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t j = 0; j < N; ++j) {
        v[j] = q[pi_off + b * N + j] - samples.policy_log_prob[b * N + j];
      }
      for (std::size_t j = 0; j < M; ++j) v[N + j] = q[rand_off + b * M + j] - log_uniform_density;
      const double mx = *std::max_element(v.begin(), v.end());
      double z = 0.0;
      for (double x : v) z += std::exp(x - mx);
      lse_sum += mx + std::log(z) - log_count;
      const double w = alpha1 * inv_b / z;
      for (std::size_t j = 0; j < N; ++j) dq[pi_off + b * N + j] += w * std::exp(v[j] - mx);
      for (std::size_t j = 0; j < M; ++j) dq[rand_off + b * M + j] += w * std::exp(v[N + j] - mx);
    }
    out.penalty = lse_sum * inv_b - out.mean_q_data;
  }

  const double offset = hp.alpha1_mode == Alpha1Mode::Lagrange ? hp.alpha1_target_gap : 0.0;
  out.loss = alpha1 * (out.penalty - offset) + out.bellman + out.regularizer;

  if (with_grads) {
    out.grads = critic.zero_grads();
    q_backward(critic, tape, dq, out.grads);
  }
  return out;
}

ActorLoss actor_loss(const ActorNet& actor, const CriticNet& q1, const CriticNet& q2,
                     const Batch& batch, double alpha2, const Matrix& noise, bool with_grads) {
  require_nonempty(batch, "actor_loss");
  const std::size_t B = batch.size();
  PolicyTape ptape;
  const SquashedSample s = sample_action_with_noise(actor, batch.obs, noise, with_grads ? &ptape : nullptr);
  NetTape t1;
  NetTape t2;
  const Matrix v1 = q_value(q1, batch.obs, s.action, with_grads ? &t1 : nullptr);
  const Matrix v2 = q_value(q2, batch.obs, s.action, with_grads ? &t2 : nullptr);

  ActorLoss out;
  const double inv_b = 1.0 / static_cast<double>(B);
  Matrix d1(B, 1);
  Matrix d2(B, 1);
  double total = 0.0;
  double q_sum = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const bool first = v1[i] <= v2[i];
    const double m = first ? v1[i] : v2[i];
    (first ? d1 : d2)[i] = -inv_b;
    q_sum += m;
    total += -m + alpha2 * s.log_prob[i];
  }
  out.loss = total * inv_b;
  out.mean_min_q = q_sum * inv_b;
  out.mean_log_prob = s.log_prob.mean();

  if (with_grads) {
    const std::size_t od = q1.obs_dim();
    const std::size_t ad = q1.act_dim();
    Matrix d_action = col_slice(q_backward(q1, t1, d1), od, ad);
    d_action += col_slice(q_backward(q2, t2, d2), od, ad);
    const Matrix d_logp(B, 1, alpha2 * inv_b);
    out.grads = actor.zero_grads();
    policy_backward(actor, ptape, d_action, d_logp, out.grads);
  }
  return out;
}

TemperatureLoss alpha2_objective(double log_alpha2, double mean_log_prob, double target_entropy) {
  const double drive = mean_log_prob + target_entropy;
  return {-log_alpha2 * drive, -drive};
}

double alpha2_update(TrainState& state, double mean_log_prob, const CqlHyperparams& hp) {
  const TemperatureLoss t = alpha2_objective(state.log_alpha2[0], mean_log_prob,
                                             hp.entropy_target(state.actor.act_dim()));
  adam_update(state.log_alpha2, Matrix(1, 1, t.grad), state.alpha2_opt);
  return state.log_alpha2[0];
}

TemperatureLoss alpha1_objective(double log_alpha1, double penalty, double target_gap) {
  const double alpha1 = std::clamp(std::exp(log_alpha1), 0.0, kAlpha1Max);
  return {-alpha1 * (penalty - target_gap), -alpha1 * (penalty - target_gap)};
}

void soft_update(const CriticNet& live, CriticNet& target, double tau) {
  const auto src = live.parameters();
  const auto dst = target.parameters();
  if (src.size() != dst.size()) throw ShapeError("soft_update: networks differ in structure");
  for (std::size_t i = 0; i < src.size(); ++i) {
    require_same_shape(*src[i], *dst[i], "soft_update");
    auto d = dst[i]->values();
    const auto s = src[i]->values();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = tau * s[j] + (1.0 - tau) * d[j];
  }
}

StepReport train_step(TrainState& state, const Dataset& dataset, const CqlHyperparams& hp) {
  if (dataset.size() == 0) throw std::invalid_argument("train_step: empty dataset");
  const Batch batch = sample_batch(dataset, hp.batch_size, state.rng);
  const double alpha1 = state.alpha1(hp);

  const CriticSamples samples = draw_critic_samples(batch, state, hp, state.rng);
  const CriticLoss c1 = critic_loss(state.q1, batch, samples, alpha1, hp);
  const CriticLoss c2 = critic_loss(state.q2, batch, samples, alpha1, hp);
  apply_adam(state.q1.parameters(), c1.grads, state.q1_opt);
  apply_adam(state.q2.parameters(), c2.grads, state.q2_opt);

  const Matrix noise = gaussian_sample(state.rng, batch.size(), state.actor.act_dim());
  const ActorLoss al = actor_loss(state.actor, state.q1, state.q2, batch, state.alpha2(), noise);
  apply_adam(state.actor.parameters(), al.grads, state.actor_opt);

  alpha2_update(state, al.mean_log_prob, hp);
  if (hp.alpha1_mode == Alpha1Mode::Lagrange) {
    const double penalty = 0.5 * (c1.penalty + c2.penalty);
    const TemperatureLoss t = alpha1_objective(state.log_alpha1[0], penalty, hp.alpha1_target_gap);
    adam_update(state.log_alpha1, Matrix(1, 1, t.grad), state.alpha1_opt);
  }

  soft_update(state.q1, state.q1_target, hp.tau);
  soft_update(state.q2, state.q2_target, hp.tau);
  state.step += 1;

  StepReport r;
  r.step = state.step;
  r.critic1_loss = c1.loss;
  r.critic2_loss = c2.loss;
  r.actor_loss = al.loss;
  r.alpha1 = alpha1;
  r.alpha2 = state.alpha2();
  r.conservative_gap = 0.5 * (c1.gap() + c2.gap());
  r.mean_q_data = 0.5 * (c1.mean_q_data + c2.mean_q_data);
  r.mean_q_pi = 0.5 * (c1.mean_q_pi + c2.mean_q_pi);
  return r;
}

std::string metrics_csv_header() {
  return "epoch,critic1_loss,critic2_loss,actor_loss,alpha2,conservative_gap,mean_q_data,"
         "mean_q_pi,eval_return_mean,eval_return_std,normalized_score,wall_seconds";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::ostringstream os;
  os << m.epoch;
  for (double v : {m.critic1_loss, m.critic2_loss, m.actor_loss, m.alpha2, m.conservative_gap,
                   m.mean_q_data, m.mean_q_pi, m.eval_return_mean, m.eval_return_std,
                   m.normalized_score, m.wall_seconds}) {
    os << ',' << fmt(v);
  }
  return os.str();
}

TrainResult train(const NetworkConfig& cfg, const Dataset& dataset, const CqlHyperparams& hp,
                  std::size_t epochs, const EvalHook& eval_hook, const TrainOptions& options) {
  TrainResult result{make_train_state(cfg, dataset.env.obs_dim, dataset.env.act_dim, hp, options.seed), {}};
  TrainState& st = result.state;

  std::ofstream csv;
  if (options.metrics_csv) {
    csv.open(*options.metrics_csv, std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + options.metrics_csv->string() + "' for writing");
    csv << metrics_csv_header() << '\n';
  }

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < hp.steps_per_epoch; ++i) {
      const StepReport r = train_step(st, dataset, hp);
      m.critic1_loss += r.critic1_loss;
      m.critic2_loss += r.critic2_loss;
      m.actor_loss += r.actor_loss;
      m.conservative_gap += r.conservative_gap;
      m.mean_q_data += r.mean_q_data;
      m.mean_q_pi += r.mean_q_pi;
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double inv = 1.0 / static_cast<double>(hp.steps_per_epoch);
    for (double* v : {&m.critic1_loss, &m.critic2_loss, &m.actor_loss, &m.conservative_gap,
                      &m.mean_q_data, &m.mean_q_pi}) {
      *v *= inv;
    }
    m.alpha2 = st.alpha2();
    if (eval_hook) {
      const EvalSummary e = eval_hook(st, epoch);
      m.eval_return_mean = e.return_mean;
      m.eval_return_std = e.return_std;
      m.normalized_score = e.normalized_score;
    }
    if (csv.is_open()) {
      csv << metrics_csv_row(m) << '\n';
      csv.flush();
    }
    result.metrics.push_back(m);
  }
  if (csv.is_open() && !csv) throw IoError("failed writing '" + options.metrics_csv->string() + "'");
  if (options.checkpoint) save_train_checkpoint(*options.checkpoint, st, dataset.env.name);
  return result;
}

void save_train_checkpoint(const std::filesystem::path& path, const TrainState& state,
                           const std::string& env_name) {
  Checkpoint ckpt;
  ckpt.meta = {{"config", state.config.name},
               {"env", env_name},
               {"obs_dim", state.actor.obs_dim()},
               {"act_dim", state.actor.act_dim()},
               {"step", state.step},
               {"log_alpha2", state.log_alpha2[0]}};
  auto add = [&](const std::string& prefix, const std::vector<std::string>& names,
                 const std::vector<const Matrix*>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      ckpt.tensors.push_back({prefix + "." + names[i], *params[i]});
    }
  };
  add("actor", state.actor.parameter_names(), state.actor.parameters());
  add("q1", state.q1.network().parameter_names(), state.q1.parameters());
  add("q2", state.q2.network().parameter_names(), state.q2.parameters());
  add("q1_target", state.q1_target.network().parameter_names(), state.q1_target.parameters());
  add("q2_target", state.q2_target.network().parameter_names(), state.q2_target.parameters());
  save_checkpoint(path, ckpt);
}

LoadedPolicy load_train_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedPolicy out;
  try {
    out.config = find_config(ckpt.meta.at("config").get<std::string>());
    out.env_name = ckpt.meta.at("env").get<std::string>();
    out.obs_dim = ckpt.meta.at("obs_dim").get<std::size_t>();
    out.act_dim = ckpt.meta.at("act_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::BadManifest, e.what());
  } catch (const UnknownConfigError& e) {
    throw FormatError(FormatErrorKind::BadManifest, e.what());
  }
  Rng scratch(0);
  NetworkSet nets = build(out.config, out.obs_dim, out.act_dim, scratch);
  auto fill = [&](const std::string& prefix, const std::vector<std::string>& names,
                  std::vector<Matrix*> params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix& src = ckpt.tensor(prefix + "." + names[i]);
      if (!src.same_shape(*params[i])) {
        throw FormatError(FormatErrorKind::DimMismatch,
                          prefix + "." + names[i] + " has shape " + src.shape_string() +
                              ", expected " + params[i]->shape_string());
      }
      *params[i] = src;
    }
  };
  fill("actor", nets.actor.parameter_names(), nets.actor.parameters());
  fill("q1", nets.q1.network().parameter_names(), nets.q1.parameters());
  fill("q2", nets.q2.network().parameter_names(), nets.q2.parameters());
  out.actor = std::move(nets.actor);
  out.q1 = std::move(nets.q1);
  out.q2 = std::move(nets.q2);
  return out;
}

}  // namespace kancql

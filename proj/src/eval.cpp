#include "kancql/eval.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace kancql {

double normalized_score(double learned, double random_ref, double expert_ref) {
  if (expert_ref == random_ref) {
    throw DegenerateReferenceError("normalized_score: expert and random references are equal (" +
                                   std::to_string(expert_ref) + ")");
  }
  return 100.0 * (learned - random_ref) / (expert_ref - random_ref);
}

EvalReport evaluate(const ActorNet& actor, const EnvSpec& spec, std::size_t episodes,
                    std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (actor.obs_dim() != spec.obs_dim || actor.act_dim() != spec.act_dim) {
    throw ShapeError("evaluate: actor dims do not match environment " + spec.name);
  }
  Rng rng = Rng(seed).split("eval");
  EvalReport report;
  report.seed = seed;
  report.episodes = episodes;
  for (std::size_t e = 0; e < episodes; ++e) {
    EnvState s = env_reset(spec, rng);
    double ret = 0.0;
    bool done = false;
    while (!done) {
      const auto obs = observe(spec, s);
      const Matrix a = deterministic_action(actor, Matrix(1, obs.size(), obs));
      StepResult step = env_step(spec, s, a.values());
      ret += step.reward;
      done = step.done;
      s = std::move(step.next);
    }
    report.returns.push_back(ret);
  }
  const double n = static_cast<double>(episodes);
  report.return_mean = std::accumulate(report.returns.begin(), report.returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : report.returns) var += (r - report.return_mean) * (r - report.return_mean);
  report.return_std = std::sqrt(var / n);
  return report;
}

EvalReport evaluate(const ActorNet& actor, const Dataset& reference, std::size_t episodes,
                    std::uint64_t seed) {
  EvalReport r = evaluate(actor, reference.env, episodes, seed);
  r.normalized_score = normalized_score(r.return_mean, reference.random_score, reference.expert_score);
  return r;
}

std::vector<ParamRow> param_table(const std::vector<std::pair<std::size_t, std::size_t>>& dims) {
  std::vector<ParamRow> rows;
  for (const auto& [obs, act] : dims) {
    for (const auto& cfg : config_catalog()) {
      const ParamCounts c = count_params(cfg, obs, act);
      rows.push_back({cfg.name, obs, act, c.actor, c.critic});
    }
  }
  return rows;
}

BenchReport bench_epoch(const NetworkConfig& cfg, const Dataset& dataset, const CqlHyperparams& hp,
                        std::size_t timed_epochs, std::size_t warmup_epochs, std::uint64_t seed) {
  if (timed_epochs < 3) throw std::invalid_argument("bench_epoch: need at least 3 timed epochs");
  TrainState st = make_train_state(cfg, dataset.env.obs_dim, dataset.env.act_dim, hp, seed);
  const ParamCounts counts = count_params(cfg, dataset.env.obs_dim, dataset.env.act_dim);

  BenchReport report;
  report.config = cfg.name;
  report.actor_params = counts.actor;
  report.critic_params = counts.critic;
  report.warmup_epochs = warmup_epochs;
  report.timed_epochs = timed_epochs;
  report.steps_per_epoch = hp.steps_per_epoch;

  for (std::size_t e = 0; e < warmup_epochs + timed_epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < hp.steps_per_epoch; ++i) train_step(st, dataset, hp);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (e >= warmup_epochs) report.epoch_seconds.push_back(secs);
  }
  report.mean_epoch_seconds =
      std::accumulate(report.epoch_seconds.begin(), report.epoch_seconds.end(), 0.0) /
      static_cast<double>(report.epoch_seconds.size());
  report.steps_per_second = static_cast<double>(hp.steps_per_epoch) / report.mean_epoch_seconds;
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"config", r.config},           {"seed", r.seed},
          {"episodes", r.episodes},       {"return_mean", r.return_mean},
          {"return_std", r.return_std},   {"normalized_score", r.normalized_score},
          {"returns", r.returns}};
}

nlohmann::json to_json(const ParamRow& r) {
  return {{"config", r.config},
          {"obs_dim", r.obs_dim},
          {"act_dim", r.act_dim},
          {"actor_params", r.actor_params},
          {"critic_params", r.critic_params}};
}

nlohmann::json to_json(const BenchReport& r) {
  return {{"config", r.config},
          {"actor_params", r.actor_params},
          {"critic_params", r.critic_params},
          {"warmup_epochs", r.warmup_epochs},
          {"timed_epochs", r.timed_epochs},
          {"steps_per_epoch", r.steps_per_epoch},
          {"epoch_seconds", r.epoch_seconds},
          {"mean_epoch_seconds", r.mean_epoch_seconds},
          {"steps_per_second", r.steps_per_second}};
}

}  // namespace kancql

#include "kancql/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "kancql/cql.hpp"
#include "kancql/dataset.hpp"
#include "kancql/eval.hpp"

namespace kancql {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Numbers are printed the way the JSON output spells them so both views agree.
std::string num(double v) { return json(v).dump(); }

struct GenDataArgs {
  std::string env;
  std::string tier;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::size_t num_seeds = 1;
  std::string out_dir;
  std::string penalty_mode = "logsumexp";
  std::string alpha1_mode = "fixed";
  std::size_t eval_episodes = 10;
  CqlHyperparams hp;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::size_t episodes = 10;
  std::uint64_t seed = 0;
};

struct CountArgs {
  std::optional<std::size_t> obs_dim;
  std::optional<std::size_t> act_dim;
};

struct BenchArgs {
  std::string config;
  std::string data;
  std::size_t epochs = 3;
  std::size_t warmup = 1;
  std::uint64_t seed = 0;
  CqlHyperparams hp;
};

void add_hp_options(CLI::App* sub, CqlHyperparams& hp) {
  sub->add_option("--steps-per-epoch", hp.steps_per_epoch, "Gradient steps per epoch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", hp.batch_size, "Transitions per gradient step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--n-actions", hp.n_policy_actions, "Policy actions per state in the penalty")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--n-random-actions", hp.n_random_actions,
                  "Uniform actions per state (logsumexp mode)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

int cmd_gen_data(const GenDataArgs& a, bool as_json, std::ostream& out) {
  const EnvSpec spec = find_env(a.env);
  const DatasetTier tier = parse_tier(a.tier);
  const Dataset ds = generate_dataset(spec, tier, a.n, a.seed);
  save_dataset(ds, a.out);
  const json j = {{"env", spec.name},
                  {"tier", to_string(tier)},
                  {"n", ds.size()},
                  {"seed", a.seed},
                  {"trajectories", ds.trajectory_count()},
                  {"random_score", ds.random_score},
                  {"expert_score", ds.expert_score},
                  {"out", a.out}};
  if (as_json) {
    out << j.dump(2) << '\n';
  } else {
    out << "wrote " << ds.size() << " transitions (" << ds.trajectory_count() << " trajectories) to "
        << a.out << '\n'
        << "env          " << spec.name << '\n'
        << "tier         " << to_string(tier) << '\n'
        << "random_score " << num(ds.random_score) << '\n'
        << "expert_score " << num(ds.expert_score) << '\n';
  }
  return kExitOk;
}

json metrics_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"critic1_loss", m.critic1_loss},
          {"critic2_loss", m.critic2_loss},
          {"actor_loss", m.actor_loss},
          {"alpha2", m.alpha2},
          {"conservative_gap", m.conservative_gap},
          {"mean_q_data", m.mean_q_data},
          {"mean_q_pi", m.mean_q_pi},
          {"eval_return_mean", m.eval_return_mean},
          {"eval_return_std", m.eval_return_std},
          {"normalized_score", m.normalized_score},
          {"wall_seconds", m.wall_seconds}};
}

int cmd_train(TrainArgs a, bool as_json, std::ostream& out) {
  const NetworkConfig& cfg = find_config(a.config);
  a.hp.penalty_mode = parse_penalty_mode(a.penalty_mode);
  if (a.alpha1_mode == "fixed") {
    a.hp.alpha1_mode = Alpha1Mode::Fixed;
  } else if (a.alpha1_mode == "lagrange") {
    a.hp.alpha1_mode = Alpha1Mode::Lagrange;
  } else {
    throw CLI::ValidationError("--alpha1-mode", "expected 'fixed' or 'lagrange'");
  }
  a.hp.validate();
  const Dataset ds = load_dataset(a.data);
  fs::create_directories(a.out_dir);

  struct Run {
    std::uint64_t seed;
    fs::path dir;
    std::vector<EpochMetrics> metrics;
    std::exception_ptr error;
  };
  std::vector<Run> runs;
  for (std::size_t k = 0; k < a.num_seeds; ++k) {
    const std::uint64_t seed = a.seed + k;
    runs.push_back({seed, fs::path(a.out_dir) / ("seed_" + std::to_string(seed)), {}, nullptr});
  }

  std::mutex log_mutex;
  auto run_one = [&](Run& run) {
    try {
      fs::create_directories(run.dir);
      const EvalHook hook = [&](const TrainState& st, std::size_t epoch) {
        const EvalReport r = evaluate(st.actor, ds, a.eval_episodes, run.seed * 1000003ULL + epoch);
        EvalSummary s{r.return_mean, r.return_std, r.normalized_score};
        if (!as_json) {
          std::lock_guard lock(log_mutex);
          out << "seed " << run.seed << " epoch " << epoch << " return " << num(s.return_mean)
              << " normalized " << num(s.normalized_score) << std::endl;
        }
        return s;
      };
      TrainOptions opts{run.seed, run.dir / "metrics.csv", run.dir / "checkpoint.kcql"};
      run.metrics = train(cfg, ds, a.hp, a.epochs, hook, opts).metrics;
    } catch (...) {
      run.error = std::current_exception();
    }
  };

  if (runs.size() == 1) {
    run_one(runs.front());
  } else {
    std::vector<std::jthread> workers;
    for (auto& run : runs) workers.emplace_back([&run_one, &run] { run_one(run); });
  }
  for (const auto& run : runs) {
    if (run.error) std::rethrow_exception(run.error);
  }

  json j = {{"config", cfg.name}, {"data", a.data}, {"epochs", a.epochs},
            {"penalty_mode", to_string(a.hp.penalty_mode)}, {"runs", json::array()}};
  for (const auto& run : runs) {
    json r = {{"seed", run.seed},
              {"metrics_csv", (run.dir / "metrics.csv").string()},
              {"checkpoint", (run.dir / "checkpoint.kcql").string()},
              {"metrics", json::array()}};
    for (const auto& m : run.metrics) r["metrics"].push_back(metrics_json(m));
    j["runs"].push_back(r);
  }
  if (as_json) {
    out << j.dump(2) << '\n';
  } else {
    out << "config " << cfg.name << ", " << a.epochs << " epochs x " << a.hp.steps_per_epoch
        << " steps\n";
    for (const auto& run : runs) {
      out << "seed " << run.seed << " -> " << (run.dir / "checkpoint.kcql").string() << '\n';
      if (!run.metrics.empty()) {
        const auto& m = run.metrics.back();
        out << "  final return " << num(m.eval_return_mean) << " +- " << num(m.eval_return_std)
            << ", normalized score " << num(m.normalized_score) << '\n';
      }
    }
  }
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, bool as_json, std::ostream& out) {
  const LoadedPolicy policy = load_train_checkpoint(a.checkpoint);
  const Dataset ds = load_dataset(a.data);
  if (policy.env_name != ds.env.name) {
    throw FormatError(FormatErrorKind::DimMismatch, "checkpoint trained on " + policy.env_name +
                                                        ", dataset is " + ds.env.name);
  }
  EvalReport r = evaluate(policy.actor, ds, a.episodes, a.seed);
  r.config = policy.config.name;
  if (as_json) {
    out << to_json(r).dump(2) << '\n';
  } else {
    out << "config           " << r.config << '\n'
        << "env              " << ds.env.name << '\n'
        << "episodes         " << r.episodes << '\n'
        << "seed             " << r.seed << '\n'
        << "return_mean      " << num(r.return_mean) << '\n'
        << "return_std       " << num(r.return_std) << '\n'
        << "normalized_score " << num(r.normalized_score) << '\n';
  }
  return kExitOk;
}

int cmd_count_params(const CountArgs& a, bool as_json, std::ostream& out) {
  if (a.obs_dim.has_value() != a.act_dim.has_value()) {
    throw CLI::ValidationError("count-params", "--obs-dim and --act-dim go together");
  }
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  if (a.obs_dim) {
    dims.emplace_back(*a.obs_dim, *a.act_dim);
  } else {
    dims = {{17, 6}, {11, 3}};
  }
  const auto rows = param_table(dims);
  if (as_json) {
    json j = json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  out << std::left << std::setw(10) << "config" << std::right << std::setw(8) << "obs_dim"
      << std::setw(8) << "act_dim" << std::setw(14) << "actor_params" << std::setw(15)
      << "critic_params" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.config << std::right << std::setw(8) << r.obs_dim
        << std::setw(8) << r.act_dim << std::setw(14) << r.actor_params << std::setw(15)
        << r.critic_params << '\n';
  }
  return kExitOk;
}

int cmd_bench(const BenchArgs& a, bool as_json, std::ostream& out) {
  const NetworkConfig& cfg = find_config(a.config);
  a.hp.validate();
  const Dataset ds = load_dataset(a.data);
  const BenchReport r = bench_epoch(cfg, ds, a.hp, a.epochs, a.warmup, a.seed);
  if (as_json) {
    out << to_json(r).dump(2) << '\n';
  } else {
    out << "config             " << r.config << '\n'
        << "actor_params       " << r.actor_params << '\n'
        << "critic_params      " << r.critic_params << '\n'
        << "steps_per_epoch    " << r.steps_per_epoch << '\n'
        << "timed_epochs       " << r.timed_epochs << " (after " << r.warmup_epochs
        << " warmup)\n"
        << "mean_epoch_seconds " << num(r.mean_epoch_seconds) << '\n'
        << "steps_per_second   " << num(r.steps_per_second) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conservative Q-learning with MLP and KAN actor/critic backbones", "kancql"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Emit machine-readable JSON");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate an offline dataset (ORDS file)");
  gen_cmd->add_option("--env", gen.env, "pointmass2d | pendulum1d")->required();
  gen_cmd->add_option("--tier", gen.tier, "random | medium | medium-replay | medium-expert | expert")
      ->required();
  gen_cmd->add_option("--n", gen.n, "Number of transitions")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output path")->required();
  gen_cmd->add_flag("--json", as_json, "Emit machine-readable JSON");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train CQL on an ORDS dataset");
  train_cmd->add_option("--config", tr.config, "Network config, e.g. mlp-a2c2")->required();
  train_cmd->add_option("--data", tr.data, "ORDS dataset")->required();
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs")->required();
  train_cmd->add_option("--seed", tr.seed, "First seed")->capture_default_str();
  train_cmd->add_option("--num-seeds", tr.num_seeds, "Seeds trained concurrently")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out-dir", tr.out_dir, "Directory for metrics and checkpoints")->required();
  train_cmd->add_option("--penalty-mode", tr.penalty_mode, "logsumexp | paper-literal")
      ->capture_default_str();
  train_cmd->add_option("--alpha1", tr.hp.alpha1, "Conservative weight")->capture_default_str();
  train_cmd->add_option("--alpha1-mode", tr.alpha1_mode, "fixed | lagrange")->capture_default_str();
  train_cmd->add_option("--eval-episodes", tr.eval_episodes, "Evaluation episodes per epoch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_hp_options(train_cmd, tr.hp);
  train_cmd->add_flag("--json", as_json, "Emit machine-readable JSON");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint's deterministic policy");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "KCQL checkpoint")->required();
  eval_cmd->add_option("--data", ev.data, "ORDS dataset providing env and reference scores")
      ->required();
  eval_cmd->add_option("--episodes", ev.episodes, "Episodes")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", ev.seed, "Reset seed")->capture_default_str();
  eval_cmd->add_flag("--json", as_json, "Emit machine-readable JSON");

  CountArgs cnt;
  auto* count_cmd = app.add_subcommand("count-params", "Actor/critic parameter counts per config");
  count_cmd->add_option("--obs-dim", cnt.obs_dim, "Observation width")->check(CLI::PositiveNumber);
  count_cmd->add_option("--act-dim", cnt.act_dim, "Action width")->check(CLI::PositiveNumber);
  count_cmd->add_flag("--json", as_json, "Emit machine-readable JSON");

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Time training epochs for one config");
  bench_cmd->add_option("--config", bn.config, "Network config")->required();
  bench_cmd->add_option("--data", bn.data, "ORDS dataset")->required();
  bench_cmd->add_option("--epochs", bn.epochs, "Timed epochs (>= 3)")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{3}, std::numeric_limits<std::size_t>::max()));
  bench_cmd->add_option("--warmup", bn.warmup, "Untimed warmup epochs")->capture_default_str();
  bench_cmd->add_option("--seed", bn.seed, "Seed")->capture_default_str();
  add_hp_options(bench_cmd, bn.hp);
  bench_cmd->add_flag("--json", as_json, "Emit machine-readable JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, as_json, out);
    if (*train_cmd) return cmd_train(tr, as_json, out);
    if (*eval_cmd) return cmd_eval(ev, as_json, out);
    if (*count_cmd) return cmd_count_params(cnt, as_json, out);
    if (*bench_cmd) return cmd_bench(bn, as_json, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const UnknownConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace kancql

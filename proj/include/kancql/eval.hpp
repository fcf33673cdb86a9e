#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kancql/cql.hpp"
#include "kancql/dataset.hpp"
#include "kancql/envs.hpp"
#include "kancql/policy.hpp"

namespace kancql {

class DegenerateReferenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// 100 * (learned - random) / (expert - random), unclipped.
double normalized_score(double learned, double random_ref, double expert_ref);

struct EvalReport {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  double return_mean = 0.0;
  double return_std = 0.0;  // population std over episodes
  double normalized_score = 0.0;
  std::vector<double> returns;
};

// Rolls out tanh(mean) for `episodes` episodes from seeded resets; the
// normalized score is left at 0 until references are supplied.
EvalReport evaluate(const ActorNet& actor, const EnvSpec& spec, std::size_t episodes,
                    std::uint64_t seed);
EvalReport evaluate(const ActorNet& actor, const Dataset& reference, std::size_t episodes,
                    std::uint64_t seed);

struct ParamRow {
  std::string config;
  std::size_t obs_dim;
  std::size_t act_dim;
  std::size_t actor_params;
  std::size_t critic_params;
};

// Every catalog config for every (obs_dim, act_dim) pair, catalog order within each pair.
std::vector<ParamRow> param_table(const std::vector<std::pair<std::size_t, std::size_t>>& dims);

struct BenchReport {
  std::string config;
  std::size_t actor_params = 0;
  std::size_t critic_params = 0;
  std::size_t warmup_epochs = 0;
  std::size_t timed_epochs = 0;
  std::size_t steps_per_epoch = 0;
  std::vector<double> epoch_seconds;
  double mean_epoch_seconds = 0.0;
  double steps_per_second = 0.0;
};

// Times only the gradient-step loop: warmup epochs first, then `timed_epochs` (>= 3).
BenchReport bench_epoch(const NetworkConfig& cfg, const Dataset& dataset, const CqlHyperparams& hp,
                        std::size_t timed_epochs = 3, std::size_t warmup_epochs = 1,
                        std::uint64_t seed = 0);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const ParamRow& r);
nlohmann::json to_json(const BenchReport& r);

}  // namespace kancql

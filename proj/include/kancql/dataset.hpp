#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "kancql/binary_io.hpp"
#include "kancql/envs.hpp"
#include "kancql/matrix.hpp"
#include "kancql/rng.hpp"

namespace kancql {

inline constexpr char kDatasetMagic[4] = {'O', 'R', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kReferenceEpisodes = 100;

// Columnar store of (s, a, r, s', done) transitions.
struct Dataset {
  EnvSpec env;
  DatasetTier tier;
  std::optional<std::uint64_t> seed;  // not stored in ORDS files
  double random_score = 0.0;
  double expert_score = 0.0;
  Matrix obs{};       // (n, obs_dim)
  Matrix actions{};   // (n, act_dim)
  Matrix rewards{};   // (n, 1)
  Matrix next_obs{};  // (n, obs_dim)
  std::vector<std::uint8_t> dones{};

  std::size_t size() const { return dones.size(); }
  // Segments split at done flags and wherever s' of one row is not s of the next.
  std::size_t trajectory_count() const;
  // Undiscounted returns of each segment.
  std::vector<double> trajectory_returns() const;
};

struct Batch {
  Matrix obs;
  Matrix actions;
  Matrix rewards;
  Matrix next_obs;
  Matrix dones;  // (n, 1), 0 or 1

  std::size_t size() const { return obs.rows(); }
};

Batch take_rows(const Dataset& ds, std::span<const std::size_t> rows);
// Uniform with replacement.
Batch sample_batch(const Dataset& ds, std::size_t batch_size, Rng& rng);

// Mean undiscounted return of `episodes` rollouts of a behaviour policy.
double mean_policy_return(const EnvSpec& spec, const BehaviorPolicy& policy, std::size_t episodes,
                          Rng& rng);

// Rolls the tier's scripted policies until at least n transitions exist, then
// truncates to exactly n. Reference scores come from 100-episode averages of
// the uniform and expert policies.
Dataset generate_dataset(const EnvSpec& spec, DatasetTier tier, std::size_t n_transitions,
                         std::uint64_t seed);

// ORDS, little-endian, no padding:
//   "ORDS" | u32 version=1 | u32 obs_dim | u32 act_dim | u64 n |
//   f64 random_score | f64 expert_score | u16 len + env name | u16 len + tier name |
//   f64 s[n*obs_dim] | f64 a[n*act_dim] | f64 r[n] | f64 s'[n*obs_dim] | u8 done[n]
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace kancql

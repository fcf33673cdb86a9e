#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kancql/rng.hpp"

namespace kancql {

enum class EnvKind { PointMass2d, Pendulum1d };

struct EnvSpec {
  EnvKind kind;
  std::string name;
  std::size_t obs_dim;
  std::size_t act_dim;
  std::size_t horizon;
  double dt;

  bool operator==(const EnvSpec&) const = default;
};

// pointmass2d: double integrator in the unit box, goal (0.7, 0.7).
EnvSpec pointmass2d();
// pendulum1d: torque-limited pendulum, upright at angle 0.
EnvSpec pendulum1d();
EnvSpec find_env(std::string_view name);

inline constexpr double kPointMassGoal[2] = {0.7, 0.7};

// Raw simulator state plus the step counter used for the horizon.
// pointmass2d: (px, py, vx, vy). pendulum1d: (theta, theta_dot).
struct EnvState {
  std::vector<double> x;
  std::size_t t = 0;

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState next;
  double reward;
  bool done;
};

EnvState env_reset(const EnvSpec& spec, Rng& rng);
// Deterministic in (state, action); actions are clipped to [-1, 1].
StepResult env_step(const EnvSpec& spec, const EnvState& state, std::span<const double> action);
// pointmass2d: the state itself. pendulum1d: (cos theta, sin theta, theta_dot).
std::vector<double> observe(const EnvSpec& spec, const EnvState& state);

double wrap_angle(double theta);

enum class DatasetTier { Random, Medium, MediumReplay, MediumExpert, Expert };

std::string_view to_string(DatasetTier tier);
DatasetTier parse_tier(std::string_view name);

// Noisy or noiseless controller used to collect offline data.
class BehaviorPolicy {
 public:
  enum class Kind { Uniform, Controller };

  static BehaviorPolicy uniform(const EnvSpec& spec);
  // Expert controller with its gains multiplied by `gain_scale` and Gaussian
  // action noise of standard deviation `noise_std` (before clipping).
  static BehaviorPolicy controller(const EnvSpec& spec, double gain_scale, double noise_std);

  std::vector<double> act(const EnvState& state, Rng& rng) const;

  Kind kind() const { return kind_; }
  double gain_scale() const { return gain_scale_; }
  double noise_std() const { return noise_std_; }

 private:
  BehaviorPolicy(EnvSpec spec, Kind kind, double gain_scale, double noise_std)
      : spec_(std::move(spec)), kind_(kind), gain_scale_(gain_scale), noise_std_(noise_std) {}

  EnvSpec spec_;
  Kind kind_;
  double gain_scale_;
  double noise_std_;
};

// Noiseless expert action in [-1, 1]^act_dim.
std::vector<double> expert_action(const EnvSpec& spec, const EnvState& state, double gain_scale = 1.0);

// Behaviour policies for a tier. Medium-replay cycles through noise levels
// {1.0, 0.7, 0.5, 0.3}; medium-expert alternates medium and expert halves.
std::vector<BehaviorPolicy> scripted_policy(DatasetTier tier, const EnvSpec& spec);

}  // namespace kancql

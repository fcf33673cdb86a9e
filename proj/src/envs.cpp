#include "kancql/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kancql {

namespace {

constexpr double kPointMassKp = 5.0;
constexpr double kPointMassKd = 2.0;

// pendulum1d physics: theta_ddot = kGravity * sin(theta) - kDamping * theta_dot + kTorqueGain * torque
constexpr double kGravity = 15.0;
constexpr double kDamping = 0.1;
constexpr double kTorqueGain = 3.0;
constexpr double kTorqueScale = 2.0;
constexpr double kMaxSpeed = 8.0;

// Swing-up controller.
constexpr double kPumpGain = 0.5;
constexpr double kBalanceKp = 10.0;
constexpr double kBalanceKd = 3.0;
constexpr double kBalanceCos = 0.8;

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

EnvSpec pointmass2d() { return {EnvKind::PointMass2d, "pointmass2d", 4, 2, 100, 0.05}; }

EnvSpec pendulum1d() { return {EnvKind::Pendulum1d, "pendulum1d", 3, 1, 200, 0.05}; }

EnvSpec find_env(std::string_view name) {
  if (name == "pointmass2d") return pointmass2d();
  if (name == "pendulum1d") return pendulum1d();
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

double wrap_angle(double theta) {
  constexpr double pi = std::numbers::pi;
  double w = std::fmod(theta + pi, 2.0 * pi);
  if (w < 0.0) w += 2.0 * pi;
  return w - pi;
}

EnvState env_reset(const EnvSpec& spec, Rng& rng) {
  EnvState s;
  if (spec.kind == EnvKind::PointMass2d) {
    const double px = rng.uniform(-1.0, 1.0);
    const double py = rng.uniform(-1.0, 1.0);
    s.x = {px, py, 0.0, 0.0};
  } else {
    const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double omega = rng.uniform(-1.0, 1.0);
    s.x = {theta, omega};
  }
  return s;
}

StepResult env_step(const EnvSpec& spec, const EnvState& state, std::span<const double> action) {
  if (action.size() != spec.act_dim) {
    throw std::invalid_argument("env_step: action has " + std::to_string(action.size()) +
                                " entries, expected " + std::to_string(spec.act_dim));
  }
  StepResult out{state, 0.0, false};
  auto& x = out.next.x;
  if (spec.kind == EnvKind::PointMass2d) {
    for (int d = 0; d < 2; ++d) {
      const double a = clip_unit(action[d]);
      x[2 + d] = clip_unit(x[2 + d] + a * spec.dt);
      x[d] = clip_unit(x[d] + x[2 + d] * spec.dt);
    }
    out.reward = -std::hypot(x[0] - kPointMassGoal[0], x[1] - kPointMassGoal[1]);
  } else {
    const double theta = x[0];
    const double omega = x[1];
    const double torque = kTorqueScale * clip_unit(action[0]);
    const double th = wrap_angle(theta);
    out.reward = -(th * th + 0.1 * omega * omega + 0.001 * torque * torque);
    const double accel = kGravity * std::sin(theta) - kDamping * omega + kTorqueGain * torque;
    const double new_omega = std::clamp(omega + accel * spec.dt, -kMaxSpeed, kMaxSpeed);
    x[1] = new_omega;
    x[0] = wrap_angle(theta + new_omega * spec.dt);
  }
  out.next.t = state.t + 1;
  out.done = out.next.t >= spec.horizon;
  return out;
}

std::vector<double> observe(const EnvSpec& spec, const EnvState& state) {
  if (spec.kind == EnvKind::PointMass2d) return state.x;
  return {std::cos(state.x[0]), std::sin(state.x[0]), state.x[1]};
}

std::string_view to_string(DatasetTier tier) {
  switch (tier) {
    case DatasetTier::Random: return "random";
    case DatasetTier::Medium: return "medium";
    case DatasetTier::MediumReplay: return "medium-replay";
    case DatasetTier::MediumExpert: return "medium-expert";
    case DatasetTier::Expert: return "expert";
  }
  return "unknown";
}

DatasetTier parse_tier(std::string_view name) {
  for (auto t : {DatasetTier::Random, DatasetTier::Medium, DatasetTier::MediumReplay,
                 DatasetTier::MediumExpert, DatasetTier::Expert}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown dataset tier '" + std::string(name) + "'");
}

std::vector<double> expert_action(const EnvSpec& spec, const EnvState& state, double gain_scale) {
  const auto& x = state.x;
  if (spec.kind == EnvKind::PointMass2d) {
    const double kp = kPointMassKp * gain_scale;
    const double kd = kPointMassKd * gain_scale;
    return {clip_unit(kp * (kPointMassGoal[0] - x[0]) - kd * x[2]),
            clip_unit(kp * (kPointMassGoal[1] - x[1]) - kd * x[3])};
  }
  const double theta = wrap_angle(x[0]);
  const double omega = x[1];
  double torque;
  if (std::cos(theta) > kBalanceCos) {
    torque = -(kBalanceKp * theta + kBalanceKd * omega) * gain_scale;
  } else {
    // Energy is zero upright at rest; pump until it is reached.
    const double energy = 0.5 * omega * omega + kGravity * (std::cos(theta) - 1.0);
    const double direction = omega == 0.0 ? 1.0 : omega;
    torque = -kPumpGain * gain_scale * energy * direction;
  }
  return {clip_unit(torque / kTorqueScale)};
}

BehaviorPolicy BehaviorPolicy::uniform(const EnvSpec& spec) {
  return BehaviorPolicy(spec, Kind::Uniform, 0.0, 0.0);
}

BehaviorPolicy BehaviorPolicy::controller(const EnvSpec& spec, double gain_scale, double noise_std) {
  return BehaviorPolicy(spec, Kind::Controller, gain_scale, noise_std);
}

std::vector<double> BehaviorPolicy::act(const EnvState& state, Rng& rng) const {
  if (kind_ == Kind::Uniform) {
    std::vector<double> a(spec_.act_dim);
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    return a;
  }
  auto a = expert_action(spec_, state, gain_scale_);
  if (noise_std_ > 0.0) {
    for (double& v : a) v = clip_unit(v + noise_std_ * rng.normal());
  }
  return a;
}

std::vector<BehaviorPolicy> scripted_policy(DatasetTier tier, const EnvSpec& spec) {
  constexpr double kMediumGain = 0.5;
  constexpr double kMediumNoise = 0.3;
  switch (tier) {
    case DatasetTier::Random: return {BehaviorPolicy::uniform(spec)};
    case DatasetTier::Expert: return {BehaviorPolicy::controller(spec, 1.0, 0.0)};
    case DatasetTier::Medium: return {BehaviorPolicy::controller(spec, kMediumGain, kMediumNoise)};
    case DatasetTier::MediumReplay: {
      std::vector<BehaviorPolicy> out;
      for (double noise : {1.0, 0.7, 0.5, 0.3}) {
        out.push_back(BehaviorPolicy::controller(spec, kMediumGain, noise));
      }
      return out;
    }
    case DatasetTier::MediumExpert:
      return {BehaviorPolicy::controller(spec, kMediumGain, kMediumNoise),
              BehaviorPolicy::controller(spec, 1.0, 0.0)};
  }
  return {};
}

}  // namespace kancql

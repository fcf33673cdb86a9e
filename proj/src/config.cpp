#include "kancql/config.hpp"

#include <array>

namespace kancql {

namespace {

constexpr std::size_t kMlpWidth = 256;
constexpr std::size_t kKanWidth = 64;

NetworkConfig make(std::string name, BackboneKind actor, std::size_t actor_layers,
                   BackboneKind critic, std::size_t critic_layers) {
  auto width = [](BackboneKind k) { return k == BackboneKind::Mlp ? kMlpWidth : kKanWidth; };
  return NetworkConfig{std::move(name), actor,  actor_layers,  width(actor),
                       critic,          critic_layers, width(critic)};
}

const std::array<NetworkConfig, 10>& catalog() {
  using enum BackboneKind;
  static const std::array<NetworkConfig, 10> configs = {
      make("mlp-a1c1", Mlp, 1, Mlp, 1), make("mlp-a2c2", Mlp, 2, Mlp, 2),
      make("mlp-a3c3", Mlp, 3, Mlp, 3), make("kan-a0c0", Kan, 0, Kan, 0),
      make("kan-a1c1", Kan, 1, Kan, 1), make("kan-a2c2", Kan, 2, Kan, 2),
      make("hyb-a0c3", Kan, 0, Mlp, 3), make("hyb-a1c3", Kan, 1, Mlp, 3),
      make("hyb-a2c3", Kan, 2, Mlp, 3), make("hyb-a3c3", Kan, 3, Mlp, 3),
  };
  return configs;
}

}  // namespace

std::string_view to_string(BackboneKind kind) { return kind == BackboneKind::Mlp ? "MLP" : "KAN"; }

std::span<const NetworkConfig> config_catalog() { return catalog(); }

const NetworkConfig& find_config(std::string_view name) {
  for (const auto& c : catalog()) {
    if (c.name == name) return c;
  }
  throw UnknownConfigError("unknown network config '" + std::string(name) + "'");
}

}  // namespace kancql

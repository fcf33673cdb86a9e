#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kancql {

enum class BackboneKind { Mlp, Kan };

std::string_view to_string(BackboneKind kind);

// One actor/critic architecture pairing. Hidden sizes are 256 for MLP
// backbones and 64 for KAN backbones.
struct NetworkConfig {
  std::string name;
  BackboneKind actor_kind;
  std::size_t actor_hidden_layers;
  std::size_t actor_hidden_size;
  BackboneKind critic_kind;
  std::size_t critic_hidden_layers;
  std::size_t critic_hidden_size;
};

class UnknownConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The ten named configurations, in table order:
// mlp-a1c1 mlp-a2c2 mlp-a3c3 kan-a0c0 kan-a1c1 kan-a2c2 hyb-a0c3 hyb-a1c3 hyb-a2c3 hyb-a3c3
std::span<const NetworkConfig> config_catalog();
const NetworkConfig& find_config(std::string_view name);

}  // namespace kancql

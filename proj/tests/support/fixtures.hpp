#pragma once

#include <string>

#include "kancql/config.hpp"
#include "kancql/matrix.hpp"
#include "kancql/rng.hpp"

namespace fixture {

// A config with tiny hidden layers for gradient checks.
inline kancql::NetworkConfig tiny(kancql::BackboneKind actor, kancql::BackboneKind critic,
                                  std::size_t layers = 1, std::size_t hidden = 4) {
  return {std::string("tiny-") + (actor == kancql::BackboneKind::Mlp ? "mlp" : "kan") + "-" +
              (critic == kancql::BackboneKind::Mlp ? "mlp" : "kan"),
          actor, layers, hidden, critic, layers, hidden};
}

// Fresh inits keep spline weights near zero; spread every parameter so that
// each gradient path carries a visible signal.
template <class Params>
void scramble(Params params, kancql::Rng& rng, double scale = 0.5) {
  for (kancql::Matrix* p : params) {
    for (double& v : p->values()) v += rng.uniform(-scale, scale);
  }
}

}  // namespace fixture

#include <doctest.h>

#include <map>

#include "kancql/nn.hpp"
#include "kancql/policy.hpp"

using namespace kancql;

namespace {

// Reference actor parameter counts, keyed by (config, obs_dim).
const std::map<std::pair<std::string, std::size_t>, std::size_t> kReference = {
    {{"mlp-a1c1", 17}, 7692},   {{"mlp-a2c2", 17}, 73484},  {{"mlp-a3c3", 17}, 139276},
    {{"kan-a0c0", 17}, 1062},   {{"kan-a1c1", 17}, 14762},  {{"kan-a2c2", 17}, 55722},
    {{"hyb-a0c3", 17}, 1062},   {{"hyb-a1c3", 17}, 14762},  {{"hyb-a2c3", 17}, 55722},
    {{"hyb-a3c3", 17}, 96682},  {{"mlp-a1c1", 11}, 4614},   {{"mlp-a2c2", 11}, 70406},
    {{"mlp-a3c3", 11}, 136198}, {{"kan-a0c0", 11}, 342},    {{"kan-a1c1", 11}, 8972},
    {{"kan-a2c2", 11}, 49932},  {{"hyb-a0c3", 11}, 342},    {{"hyb-a1c3", 11}, 8972},
    {{"hyb-a2c3", 11}, 49932},  {{"hyb-a3c3", 11}, 90892},
};

std::size_t act_for(std::size_t obs) { return obs == 17 ? 6 : 3; }

}  // namespace

TEST_CASE("catalog") {
  CHECK(config_catalog().size() == 10);
  CHECK(find_config("hyb-a2c3").critic_hidden_layers == 3);
  CHECK(find_config("hyb-a2c3").critic_kind == BackboneKind::Mlp);
  CHECK(find_config("kan-a2c2").actor_hidden_size == 64);
  CHECK_THROWS_AS(find_config("mlp-a9c9"), UnknownConfigError);
}

TEST_CASE("closed-form actor counts match the reference counts") {
  for (const auto& [key, want] : kReference) {
    CAPTURE(key.first);
    CAPTURE(key.second);
    CHECK(count_params(key.first, key.second, act_for(key.second)).actor == want);
  }
}

TEST_CASE("hand arithmetic for a few cells") {
  CHECK(count_params("mlp-a1c1", 17, 6).actor == 17 * 256 + 256 + 256 * 12 + 12);
  CHECK(count_params("kan-a0c0", 11, 3).actor == 11 * 3 * 10 + (3 * 3 + 3));
  CHECK(count_params("mlp-a2c2", 17, 6).critic == 23 * 256 + 256 + 256 * 256 + 256 + 256 + 1);
  CHECK(count_params("kan-a0c0", 11, 3).critic == 14 * 10);
}

TEST_CASE("built networks have the closed-form sizes") {
  for (const auto& cfg : config_catalog()) {
    for (std::size_t obs : {17u, 11u, 4u}) {
      const std::size_t act = obs == 4 ? 2 : act_for(obs);
      Rng rng(0);
      const NetworkSet set = build(cfg, obs, act, rng);
      const ParamCounts c = count_params(cfg, obs, act);
      CAPTURE(cfg.name);
      CHECK(set.actor.num_params() == c.actor);
      CHECK(set.q1.num_params() == c.critic);
      CHECK(set.q2.num_params() == c.critic);
    }
  }
}

TEST_CASE("KAN actors are smaller than MLP actors at two and three hidden layers") {
  for (std::size_t obs : {17u, 11u}) {
    const std::size_t act = act_for(obs);
    // With a single hidden layer the 64-wide KAN actor is the larger one.
    CHECK(count_params("kan-a1c1", obs, act).actor > count_params("mlp-a1c1", obs, act).actor);
    CHECK(count_params("kan-a2c2", obs, act).actor < count_params("mlp-a2c2", obs, act).actor);
    CHECK(count_params("hyb-a3c3", obs, act).actor < count_params("mlp-a3c3", obs, act).actor);
  }
}

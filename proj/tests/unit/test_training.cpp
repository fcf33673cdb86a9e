#include <doctest.h>

#include <fstream>

#include "kancql/cql.hpp"
#include "../support/tempdir.hpp"

using namespace kancql;

namespace {

const Dataset& pointmass_medium() {
  static const Dataset ds = generate_dataset(pointmass2d(), DatasetTier::Medium, 5000, 0);
  return ds;
}

CqlHyperparams quick_hp() {
  CqlHyperparams hp;
  hp.batch_size = 32;
  hp.n_policy_actions = 3;
  hp.n_random_actions = 3;
  hp.steps_per_epoch = 20;
  return hp;
}

}  // namespace

TEST_CASE("train_step is deterministic") {
  const CqlHyperparams hp = quick_hp();
  TrainState a = make_train_state(find_config("hyb-a1c3"), 4, 2, hp, 5);
  TrainState b = make_train_state(find_config("hyb-a1c3"), 4, 2, hp, 5);
  for (int i = 0; i < 10; ++i) {
    CHECK(train_step(a, pointmass_medium(), hp) == train_step(b, pointmass_medium(), hp));
  }
  CHECK(a.actor == b.actor);
  CHECK(a.q1_target == b.q1_target);
  CHECK_THROWS(train_step(a, Dataset{pointmass2d(), DatasetTier::Medium}, hp));
}

TEST_CASE("train cadence") {
  const CqlHyperparams hp = quick_hp();
  const NetworkConfig& cfg = find_config("kan-a0c0");
  const TrainResult none = train(cfg, pointmass_medium(), hp, 0, nullptr);
  CHECK(none.metrics.empty());
  CHECK(none.state.actor == make_train_state(cfg, 4, 2, hp, 0).actor);

  fixture::TempDir dir;
  int calls = 0;
  const EvalHook hook = [&](const TrainState&, std::size_t epoch) {
    ++calls;
    return EvalSummary{static_cast<double>(epoch), 0.0, 0.0};
  };
  const TrainResult r = train(cfg, pointmass_medium(), hp, 3, hook,
                              TrainOptions{1, dir / "m.csv", dir / "c.kcql"});
  CHECK(r.metrics.size() == 3);
  CHECK(calls == 3);
  CHECK(r.state.step == 60);
  CHECK(r.metrics[2].eval_return_mean == 3.0);
  std::ifstream csv(dir / "m.csv");
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line == metrics_csv_header());
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
  CHECK(load_train_checkpoint(dir / "c.kcql").actor == r.state.actor);
}

TEST_CASE("Lagrange mode trains") {
  CqlHyperparams hp = quick_hp();
  hp.alpha1_mode = Alpha1Mode::Lagrange;
  TrainState st = make_train_state(find_config("kan-a0c0"), 4, 2, hp, 2);
  const double before = st.alpha1(hp);
  CHECK(before == doctest::Approx(hp.alpha1));
  for (int i = 0; i < 20; ++i) {
    const StepReport r = train_step(st, pointmass_medium(), hp);
    CHECK(std::isfinite(r.critic1_loss));
  }
  CHECK(st.alpha1(hp) != before);
}

TEST_SUITE("slow") {
  TEST_CASE("losses stay finite for 1000 steps on every config") {
    CqlHyperparams hp = quick_hp();
    hp.batch_size = 16;
    hp.n_policy_actions = 2;
    hp.n_random_actions = 2;
    for (const auto& cfg : config_catalog()) {
      TrainState st = make_train_state(cfg, 4, 2, hp, 0);
      bool finite = true;
      for (int i = 0; i < 1000 && finite; ++i) {
        const StepReport r = train_step(st, pointmass_medium(), hp);
        finite = std::isfinite(r.critic1_loss) && std::isfinite(r.critic2_loss) &&
                 std::isfinite(r.actor_loss) && std::isfinite(r.alpha2) &&
                 std::isfinite(r.conservative_gap);
      }
      CAPTURE(cfg.name);
      CHECK(finite);
    }
  }

  TEST_CASE("a large alpha1 drives the conservative gap down") {
    CqlHyperparams hp = quick_hp();
    hp.alpha1 = 50.0;
    hp.penalty_mode = PenaltyMode::PaperLiteral;
    TrainState st = make_train_state(find_config("mlp-a1c1"), 4, 2, hp, 0);
    std::vector<double> windows;
    double acc = 0;
    for (int i = 1; i <= 200; ++i) {
      acc += train_step(st, pointmass_medium(), hp).conservative_gap;
      if (i % 50 == 0) {
        windows.push_back(acc / 50);
        acc = 0;
      }
    }
    for (std::size_t w = 1; w < windows.size(); ++w) CHECK(windows[w] < windows[w - 1]);
  }
}

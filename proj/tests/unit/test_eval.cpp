#include <doctest.h>

#include <cmath>

#include "kancql/eval.hpp"

using namespace kancql;

namespace {

ActorNet zero_actor(const EnvSpec& spec, const char* cfg) {
  Rng rng(0);
  ActorNet a = make_actor(find_config(cfg), spec.obs_dim, spec.act_dim, rng);
  for (Matrix* p : a.parameters()) p->fill(0.0);
  return a;
}

}  // namespace

TEST_CASE("normalized score") {
  CHECK(normalized_score(105, 5, 105) == 100.0);
  CHECK(normalized_score(5, 5, 105) == 0.0);
  CHECK(normalized_score(55, 5, 105) == 50.0);
  CHECK(normalized_score(-20, 5, 105) == -25.0);
  CHECK(normalized_score(-10, -100, -20) == doctest::Approx(112.5));
  CHECK_THROWS_AS(normalized_score(1, 3, 3), DegenerateReferenceError);
}

TEST_CASE("zero-action rollouts match a hand recursion") {
  SUBCASE("point mass stays put") {
    const EnvSpec spec = pointmass2d();
    const EvalReport r = evaluate(zero_actor(spec, "mlp-a1c1"), spec, 3, 11);
    Rng rng = Rng(11).split("eval");
    for (std::size_t e = 0; e < 3; ++e) {
      const EnvState s = env_reset(spec, rng);
      const double d = std::sqrt((s.x[0] - 0.7) * (s.x[0] - 0.7) + (s.x[1] - 0.7) * (s.x[1] - 0.7));
      CHECK(r.returns[e] == doctest::Approx(-100.0 * d).epsilon(1e-12));
    }
  }
  SUBCASE("unforced pendulum") {
    const EnvSpec spec = pendulum1d();
    const EvalReport r = evaluate(zero_actor(spec, "kan-a0c0"), spec, 1, 4);
    Rng rng = Rng(4).split("eval");
    const EnvState s = env_reset(spec, rng);
    double th = s.x[0], om = s.x[1], ret = 0;
    for (int t = 0; t < 200; ++t) {
      const double w = std::remainder(th, 2 * M_PI);
      ret -= w * w + 0.1 * om * om;
      om = std::clamp(om + (15.0 * std::sin(th) - 0.1 * om) * 0.05, -8.0, 8.0);
      th = std::remainder(th + om * 0.05, 2 * M_PI);
    }
    CHECK(r.returns[0] == doctest::Approx(ret).epsilon(1e-9));
    CHECK(r.return_std == 0.0);
  }
}

TEST_CASE("evaluation is deterministic and summarizes returns") {
  Rng rng(2);
  const EnvSpec spec = pointmass2d();
  const ActorNet a = make_actor(find_config("kan-a1c1"), 4, 2, rng);
  const EvalReport x = evaluate(a, spec, 5, 9);
  const EvalReport y = evaluate(a, spec, 5, 9);
  CHECK(x.returns == y.returns);
  CHECK(x.return_mean == y.return_mean);
  double m = 0;
  for (double v : x.returns) m += v;
  m /= 5;
  double var = 0;
  for (double v : x.returns) var += (v - m) * (v - m);
  CHECK(x.return_mean == doctest::Approx(m));
  CHECK(x.return_std == doctest::Approx(std::sqrt(var / 5)));
  CHECK_THROWS(evaluate(a, spec, 0, 1));
  CHECK_THROWS(evaluate(a, pendulum1d(), 1, 1));

  Dataset ref{spec, DatasetTier::Medium};
  ref.random_score = -100;
  ref.expert_score = -20;
  const EvalReport z = evaluate(a, ref, 5, 9);
  CHECK(z.normalized_score == doctest::Approx(100 * (z.return_mean + 100) / 80));
}

TEST_CASE("parameter table") {
  const auto rows = param_table({{17, 6}, {11, 3}});
  REQUIRE(rows.size() == 20);
  CHECK(rows[7].config == "hyb-a1c3");
  CHECK(rows[7].actor_params == 14762);
  CHECK(rows[15].config == "kan-a2c2");
  CHECK(rows[15].actor_params == 49932);
  CHECK(rows[1].actor_params == 73484);
  CHECK(to_json(rows[2])["actor_params"] == 139276);
}

TEST_CASE("bench contract") {
  const Dataset ds = generate_dataset(pointmass2d(), DatasetTier::Medium, 200, 1);
  CqlHyperparams hp;
  hp.batch_size = 8;
  hp.n_policy_actions = 2;
  hp.n_random_actions = 2;
  hp.steps_per_epoch = 5;
  const BenchReport b = bench_epoch(find_config("kan-a0c0"), ds, hp, 3, 1, 0);
  CHECK(b.timed_epochs >= 3);
  CHECK(b.epoch_seconds.size() == 3);
  CHECK(b.actor_params == count_params("kan-a0c0", 4, 2).actor);
  CHECK(b.steps_per_second == doctest::Approx(5.0 / b.mean_epoch_seconds));
  CHECK_THROWS(bench_epoch(find_config("kan-a0c0"), ds, hp, 2, 1, 0));
}

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kancql/cql.hpp"
#include "../support/batches.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace kancql;

namespace {

CqlHyperparams small_hp(PenaltyMode mode) {
  CqlHyperparams hp;
  hp.batch_size = 4;
  hp.n_policy_actions = 2;
  hp.n_random_actions = 3;
  hp.penalty_mode = mode;
  return hp;
}

CriticNet constant_critic(double c, Rng& rng) {
  CriticNet q = make_critic(find_config("mlp-a1c1"), 3, 2, rng);
  for (Matrix* p : q.parameters()) p->fill(0.0);
  q.parameters().back()->fill(c);
  return q;
}

}  // namespace

TEST_CASE("td_target edge cases") {
  Rng rng(1);
  const TrainState st = make_train_state(fixture::tiny(BackboneKind::Mlp, BackboneKind::Mlp), 3, 2,
                                         small_hp(PenaltyMode::LogSumExp), 0);
  Batch b = fixture::random_batch(rng, 6, 3, 2);
  const Matrix noise = gaussian_sample(rng, 6, 2);

  SUBCASE("gamma 0 is the reward") {
    CHECK(td_target(b, st.actor, st.q1_target, st.q2_target, 0.7, 0.0, noise) == b.rewards);
  }
  SUBCASE("terminal rows are the reward") {
    b.dones.fill(1.0);
    CHECK(td_target(b, st.actor, st.q1_target, st.q2_target, 0.7, 0.99, noise) == b.rewards);
  }
  SUBCASE("constant critics") {
    b.dones.fill(0.0);
    const CriticNet c = constant_critic(2.5, rng);
    const Matrix y = td_target(b, st.actor, c, c, 0.0, 0.9, noise);
    for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(b.rewards[i] + 0.9 * 2.5).epsilon(1e-14));
  }
  SUBCASE("soft value uses the smaller critic and the entropy bonus") {
    b.dones.fill(0.0);
    const CriticNet lo = constant_critic(1.0, rng);
    const CriticNet hi = constant_critic(4.0, rng);
    const SquashedSample nx = sample_action_with_noise(st.actor, b.next_obs, noise);
    const Matrix y = td_target(b, st.actor, hi, lo, 0.3, 0.9, noise);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(y[i] == doctest::Approx(b.rewards[i] + 0.9 * (1.0 - 0.3 * nx.log_prob[i])).epsilon(1e-13));
    }
  }
}

TEST_CASE("critic loss values") {
  Rng rng(2);
  for (auto mode : {PenaltyMode::PaperLiteral, PenaltyMode::LogSumExp}) {
    const CqlHyperparams hp = small_hp(mode);
    const TrainState st = make_train_state(fixture::tiny(BackboneKind::Mlp, BackboneKind::Kan), 3, 2, hp, 3);
    const Batch b = fixture::random_batch(rng, 4, 3, 2);
    Rng srng(4);
    const CriticSamples s = draw_critic_samples(b, st, hp, srng);

    SUBCASE("alpha1 = 0 leaves the Bellman term") {
      const CriticLoss l = critic_loss(st.q1, b, s, 0.0, hp, false);
      CHECK(l.loss == doctest::Approx(l.bellman + l.regularizer));
      const Matrix q = q_value(st.q1, b.obs, b.actions);
      double sq = 0;
      for (std::size_t i = 0; i < 4; ++i) sq += (q[i] - s.td_target[i]) * (q[i] - s.td_target[i]);
      CHECK(l.bellman == doctest::Approx(0.5 * sq / 4).epsilon(1e-12));
    }
    SUBCASE("penalty by hand") {
      const CriticLoss l = critic_loss(st.q1, b, s, 5.0, hp, false);
      const Matrix qd = q_value(st.q1, b.obs, b.actions);
      const Matrix qp = q_value(st.q1, repeat_rows(b.obs, 2), s.policy_actions);
      if (mode == PenaltyMode::PaperLiteral) {
        CHECK(l.penalty == doctest::Approx(qp.mean() - qd.mean()).epsilon(1e-12));
        CHECK(l.regularizer == doctest::Approx(s.policy_log_prob.mean() + 2 * std::log(2.0)).epsilon(1e-12));
      } else {
        const Matrix qr = q_value(st.q1, repeat_rows(b.obs, 3), s.random_actions);
        double total = 0;
        for (std::size_t r = 0; r < 4; ++r) {
          double z = 0;
          for (std::size_t j = 0; j < 2; ++j) z += std::exp(qp[r * 2 + j] - s.policy_log_prob[r * 2 + j]);
          for (std::size_t j = 0; j < 3; ++j) z += std::exp(qr[r * 3 + j] + 2 * std::log(2.0));
          total += std::log(z / 5.0);
        }
        CHECK(l.penalty == doctest::Approx(total / 4 - qd.mean()).epsilon(1e-12));
        CHECK(l.regularizer == 0.0);
      }
      CHECK(l.loss == doctest::Approx(5.0 * l.penalty + l.bellman + l.regularizer).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant critic has zero paper-literal penalty") {
  Rng rng(3);
  const CqlHyperparams hp = small_hp(PenaltyMode::PaperLiteral);
  const TrainState st = make_train_state(fixture::tiny(BackboneKind::Mlp, BackboneKind::Mlp), 3, 2, hp, 0);
  const Batch b = fixture::random_batch(rng, 4, 3, 2);
  const CriticSamples s = draw_critic_samples(b, st, hp, rng);
  CHECK(critic_loss(constant_critic(1.7, rng), b, s, 5.0, hp, false).penalty == doctest::Approx(0.0));
}

TEST_CASE("critic loss gradients, both penalty modes") {
  for (auto mode : {PenaltyMode::PaperLiteral, PenaltyMode::LogSumExp}) {
    for (auto kind : {BackboneKind::Mlp, BackboneKind::Kan}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const CqlHyperparams hp = small_hp(mode);
        TrainState st = make_train_state(fixture::tiny(kind, kind), 3, 2, hp, seed);
        Rng rng(seed + 50);
        fixture::scramble(st.q1.parameters(), rng, 0.3);
        const Batch b = fixture::random_batch(rng, 4, 3, 2);
        const CriticSamples s = draw_critic_samples(b, st, hp, rng);
        const CriticLoss l = critic_loss(st.q1, b, s, 5.0, hp, true);
        auto f = [&] { return critic_loss(st.q1, b, s, 5.0, hp, false).loss; };
        const auto params = st.q1.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
          CHECK(oracle::max_relative_error(l.grads[i], oracle::numeric_gradient(f, *params[i])) < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("actor loss") {
  for (auto kind : {BackboneKind::Mlp, BackboneKind::Kan}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const CqlHyperparams hp = small_hp(PenaltyMode::LogSumExp);
      TrainState st = make_train_state(fixture::tiny(kind, BackboneKind::Mlp), 3, 2, hp, seed);
      Rng rng(seed + 70);
      fixture::scramble(st.actor.parameters(), rng, 0.3);
      fixture::scramble(st.q1.parameters(), rng, 0.3);
      fixture::scramble(st.q2.parameters(), rng, 0.3);
      const Batch b = fixture::random_batch(rng, 4, 3, 2);
      const Matrix noise = gaussian_sample(rng, 4, 2);
      const ActorLoss l = actor_loss(st.actor, st.q1, st.q2, b, 0.4, noise, true);
      auto f = [&] { return actor_loss(st.actor, st.q1, st.q2, b, 0.4, noise, false).loss; };
      const auto params = st.actor.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(oracle::max_relative_error(l.grads[i], oracle::numeric_gradient(f, *params[i])) < 1e-5);
      }

      // Loss by hand.
      const SquashedSample s = sample_action_with_noise(st.actor, b.obs, noise);
      const Matrix q1 = q_value(st.q1, b.obs, s.action);
      const Matrix q2 = q_value(st.q2, b.obs, s.action);
      double want = 0;
      for (std::size_t i = 0; i < 4; ++i) want += -std::min(q1[i], q2[i]) + 0.4 * s.log_prob[i];
      CHECK(l.loss == doctest::Approx(want / 4).epsilon(1e-12));
    }
  }

  SUBCASE("flat objective when alpha2 = 0 and critics are constant") {
    Rng rng(9);
    const TrainState st = make_train_state(fixture::tiny(BackboneKind::Kan, BackboneKind::Mlp), 3, 2,
                                           small_hp(PenaltyMode::LogSumExp), 1);
    const CriticNet c = constant_critic(3.0, rng);
    const Batch b = fixture::random_batch(rng, 4, 3, 2);
    const ActorLoss l = actor_loss(st.actor, c, c, b, 0.0, gaussian_sample(rng, 4, 2), true);
    for (const Matrix& g : l.grads) for (double v : g.values()) CHECK(std::abs(v) < 1e-12);
  }
  SUBCASE("monotone in alpha2 when log-probs are positive") {
    Rng rng(10);
    TrainState st = make_train_state(fixture::tiny(BackboneKind::Mlp, BackboneKind::Mlp), 3, 2,
                                     small_hp(PenaltyMode::LogSumExp), 1);
    // Push log_std to the floor so every log-prob is large and positive.
    for (Matrix* p : st.actor.parameters()) p->fill(0.0);
    auto params = st.actor.parameters();
    Matrix& last_bias = *params.back();
    for (std::size_t d = 2; d < 4; ++d) last_bias[d] = -5.0;
    const Batch b = fixture::random_batch(rng, 4, 3, 2);
    const Matrix noise = gaussian_sample(rng, 4, 2);
    double prev = -1e300;
    for (double a2 : {0.0, 0.1, 0.5, 1.0, 3.0}) {
      const ActorLoss l = actor_loss(st.actor, st.q1, st.q2, b, a2, noise, false);
      CHECK(l.mean_log_prob > 0.0);
      CHECK(l.loss > prev);
      prev = l.loss;
    }
  }
}

TEST_CASE("temperature objectives") {
  SUBCASE("fixed point") {
    const TemperatureLoss t = alpha2_objective(0.3, 2.0, -2.0);
    CHECK(t.grad == 0.0);
  }
  SUBCASE("gradient matches finite differences") {
    for (double la : {-1.0, 0.0, 0.7}) {
      for (double lp : {-3.0, 0.5, 2.0}) {
        const double h = 1e-5;
        const double fd = (alpha2_objective(la + h, lp, -2.0).loss - alpha2_objective(la - h, lp, -2.0).loss) / (2 * h);
        CHECK(std::abs(alpha2_objective(la, lp, -2.0).grad - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        const double fd1 = (alpha1_objective(la + h, lp, 5.0).loss - alpha1_objective(la - h, lp, 5.0).loss) / (2 * h);
        CHECK(std::abs(alpha1_objective(la, lp, 5.0).grad - fd1) <= 1e-5 * std::max(1.0, std::abs(fd1)));
      }
    }
  }
  SUBCASE("update direction") {
    CqlHyperparams hp;
    TrainState st = make_train_state(fixture::tiny(BackboneKind::Mlp, BackboneKind::Mlp), 3, 2, hp, 0);
    const double before = st.alpha2();
    alpha2_update(st, 5.0, hp);  // entropy below target
    CHECK(st.alpha2() > before);
    const double mid = st.alpha2();
    alpha2_update(st, -10.0, hp);
    CHECK(st.alpha2() > 0.0);
    (void)mid;

    TrainState fresh = make_train_state(fixture::tiny(BackboneKind::Mlp, BackboneKind::Mlp), 3, 2, hp, 0);
    alpha2_update(fresh, 2.0, hp);  // log-prob equals -target_entropy
    CHECK(fresh.alpha2() == before);
  }
}

TEST_CASE("soft update") {
  Rng rng(11);
  const auto cfg = fixture::tiny(BackboneKind::Kan, BackboneKind::Kan);
  const CriticNet live = make_critic(cfg, 3, 2, rng);
  const CriticNet start = make_critic(cfg, 3, 2, rng);

  CriticNet t = start;
  soft_update(live, t, 1.0);
  CHECK(t == live);
  t = start;
  soft_update(live, t, 0.0);
  CHECK(t == start);

  CriticNet two = start, zero = start;
  for (Matrix* p : two.parameters()) p->fill(2.0);
  for (Matrix* p : zero.parameters()) p->fill(0.0);
  soft_update(two, zero, 0.5);
  for (const Matrix* p : zero.parameters()) CHECK(*p == Matrix(p->rows(), p->cols(), 1.0));

  auto dist = [](const CriticNet& a, const CriticNet& b) {
    double s = 0;
    const auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t j = 0; j < pa[i]->size(); ++j) s += std::pow((*pa[i])[j] - (*pb[i])[j], 2);
    return std::sqrt(s);
  };
  t = start;
  for (int k = 0; k < 10; ++k) {
    const double before = dist(t, live);
    soft_update(live, t, 0.005);
    CHECK(dist(t, live) <= (1 - 0.005) * before * (1 + 1e-12));
  }
}

TEST_CASE("Lagrange alpha1 moves toward the target gap") {
  const double t_above = alpha1_objective(0.0, 8.0, 5.0).grad;
  const double t_below = alpha1_objective(0.0, 1.0, 5.0).grad;
  CHECK(t_above < 0.0);  // descent raises alpha1 when the penalty exceeds the target
  CHECK(t_below > 0.0);
}

TEST_CASE("hyperparameter validation") {
  CqlHyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.tau = 0.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = {};
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  CHECK(parse_penalty_mode("paper-literal") == PenaltyMode::PaperLiteral);
  CHECK_THROWS(parse_penalty_mode("lse"));
  CHECK(CqlHyperparams{}.entropy_target(6) == -6.0);
}

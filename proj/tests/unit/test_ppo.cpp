#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "circuitrl/common.hpp"
#include "circuitrl/ppo/gae.hpp"
#include "circuitrl/ppo/ppo.hpp"
#include "circuitrl/ppo/rollout.hpp"
#include "circuitrl/ppo/trainer.hpp"
#include "test_support.hpp"

using namespace circuitrl;
using circuitrl::testing::SeedOnlyBatches;
using circuitrl::testing::StubScorer;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<AblationEnv> stub_envs(int n, EnvConfig cfg = {}) {
  auto scorer = std::make_shared<const StubScorer>();
  auto batches = std::make_shared<const SeedOnlyBatches>();
  std::vector<AblationEnv> envs;
  for (int i = 0; i < n; ++i) envs.emplace_back(scorer, batches, cfg);
  return envs;
}

TrainerOptions small_options(std::int64_t total_steps) {
  TrainerOptions o;
  o.ppo.n_envs = 4;
  o.ppo.horizon = 50;
  o.ppo.minibatches = 4;
  o.ppo.epochs = 2;
  o.ppo.total_steps = total_steps;
  o.seed = 21;
  o.checkpoint_every = 0;
  return o;
}

}  // namespace

TEST(PpoLoss, UnitRatioGivesMinusMeanAdvantage) {
  PPOHyperparams hp;
  hp.ent_coef = 0.0;
  hp.vf_coef = 0.0;
  const VectorXd lp = vec({-1.0, -2.0, -0.5}), adv = vec({1.0, -3.0, 0.5});
  const MinibatchLoss l = ppo_loss(lp, lp, adv, VectorXd::Zero(3), VectorXd::Zero(3), VectorXd::Zero(3), hp);
  EXPECT_NEAR(l.terms.policy_loss, -(1.0 - 3.0 + 0.5) / 3.0, 1e-15);
  EXPECT_EQ(l.terms.clip_frac, 0.0);
  EXPECT_NEAR(l.terms.approx_kl, 0.0, 1e-15);
  EXPECT_NEAR(l.terms.total, l.terms.policy_loss, 1e-15);
}

TEST(PpoLoss, ClippingCases) {
  PPOHyperparams hp;
  hp.ent_coef = 0.0;
  hp.vf_coef = 0.0;
  const VectorXd zeros = VectorXd::Zero(1);
  auto single = [&](double ratio, double adv) {
    return ppo_loss(vec({std::log(ratio)}), vec({0.0}), vec({adv}), zeros, zeros, zeros, hp);
  };
  // Positive advantage, ratio above 1 + eps: clipped, no gradient.
  auto l = single(1.5, 2.0);
  EXPECT_NEAR(l.terms.policy_loss, -1.2 * 2.0, 1e-12);
  EXPECT_EQ(l.d_logp(0), 0.0);
  EXPECT_EQ(l.terms.clip_frac, 1.0);
  // Negative advantage, ratio above 1 + eps: the unclipped term is the minimum.
  l = single(1.5, -2.0);
  EXPECT_NEAR(l.terms.policy_loss, 1.5 * 2.0, 1e-12);
  EXPECT_NEAR(l.d_logp(0), 1.5 * 2.0, 1e-12);
  // Negative advantage, ratio below 1 - eps: clipped.
  l = single(0.5, -2.0);
  EXPECT_NEAR(l.terms.policy_loss, 0.8 * 2.0, 1e-12);
  EXPECT_EQ(l.d_logp(0), 0.0);
  // Inside the trust region the gradient is -ratio * A.
  l = single(1.1, 2.0);
  EXPECT_NEAR(l.d_logp(0), -1.1 * 2.0, 1e-12);
  EXPECT_EQ(l.terms.clip_frac, 0.0);
}

TEST(PpoLoss, HandComputedSingleTransition) {
  PPOHyperparams hp;  // clip 0.2, ent 0.1, vf 0.5
  const double new_lp = -1.0, old_lp = -1.1, adv = 0.7, ent = 2.0, v = 0.4, ret = 1.0;
  const MinibatchLoss l =
      ppo_loss(vec({new_lp}), vec({old_lp}), vec({adv}), vec({ent}), vec({v}), vec({ret}), hp);
  const double ratio = std::exp(0.1);  // 1.10517, inside [0.8, 1.2]
  const double expected = -ratio * adv + 0.5 * (v - ret) * (v - ret) - 0.1 * ent;
  EXPECT_NEAR(l.terms.total, expected, 1e-6);
  EXPECT_NEAR(l.terms.total, -0.773620 + 0.18 - 0.2, 1e-6);
  EXPECT_NEAR(l.terms.approx_kl, (ratio - 1.0) - 0.1, 1e-12);
}

TEST(PpoLoss, DerivativesMatchFiniteDifferences) {
  PPOHyperparams hp;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  const int m = 16;
  VectorXd lp(m), old(m), adv(m), ent(m), val(m), ret(m);
  for (int i = 0; i < m; ++i) {
    old(i) = -2.0 + 0.3 * n(rng);
    lp(i) = old(i) + 0.3 * n(rng);
    adv(i) = n(rng);
    ent(i) = 3.0 + n(rng);
    val(i) = n(rng);
    ret(i) = n(rng);
  }
  const MinibatchLoss base = ppo_loss(lp, old, adv, ent, val, ret, hp);
  const double h = 1e-6;
  for (int i = 0; i < m; ++i) {
    for (int which = 0; which < 3; ++which) {
      VectorXd* target = which == 0 ? &lp : which == 1 ? &ent : &val;
      const double saved = (*target)(i);
      (*target)(i) = saved + h;
      const double up = ppo_loss(lp, old, adv, ent, val, ret, hp).terms.total;
      (*target)(i) = saved - h;
      const double down = ppo_loss(lp, old, adv, ent, val, ret, hp).terms.total;
      (*target)(i) = saved;
      const double analytic = which == 0 ? base.d_logp(i) : which == 1 ? base.d_entropy(i) : base.d_value(i);
      EXPECT_NEAR((up - down) / (2 * h), analytic, 1e-6) << "i " << i << " which " << which;
    }
  }
}

TEST(Rollout, SizeLegalityAndDeterminism) {
  auto run = [] {
    VectorEnv v(stub_envs(8), 5);
    RolloutCollector c(v);
    c.reset();
    std::mt19937_64 rng(1);
    return c.collect(init_params(1), rng, 50);
  };
  const RolloutBuffer a = run(), b = run();
  ASSERT_EQ(a.size(), 400u);
  EXPECT_EQ(a.finished.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Transition& t = a.transitions[i];
    ASSERT_TRUE(t.mask[static_cast<std::size_t>(t.action)]);
    EXPECT_EQ(t.obs[2 + static_cast<std::size_t>(t.action)], 0.0);
    EXPECT_EQ(t.action, b.transitions[i].action);
    EXPECT_EQ(t.reward, b.transitions[i].reward);
  }
  for (int e = 0; e < 8; ++e) {
    EXPECT_TRUE(a.at(e, 49).done);
    EXPECT_FALSE(a.at(e, 48).done);
  }
}

TEST(PpoUpdate, FirstMinibatchRatioIsOne) {
  VectorEnv v(stub_envs(8), 6);
  RolloutCollector c(v);
  c.reset();
  std::mt19937_64 rng(3);
  PolicyParams params = init_params(2);
  RolloutBuffer buf = c.collect(params, rng, 50);
  PPOHyperparams hp;
  compute_advantages(buf, hp.gamma, hp.gae_lambda);
  AdamState adam = AdamState::zeros(params.shape());
  const UpdateStats s = ppo_update(params, adam, buf, hp, 2.5e-4, rng);
  EXPECT_LT(s.first_ratio_max_dev, 1e-6);
  EXPECT_EQ(s.optimizer_steps, 32);
  EXPECT_EQ(adam.step, 32);
  EXPECT_TRUE(std::isfinite(s.policy_loss));
  EXPECT_GT(s.entropy, 3.5);
}

TEST(PpoUpdate, ZeroLearningRateLeavesParamsUnchanged) {
  VectorEnv v(stub_envs(4, EnvConfig{.max_steps = 10}), 6);
  RolloutCollector c(v);
  c.reset();
  std::mt19937_64 rng(4);
  PolicyParams params = init_params(2);
  const PolicyParams before = params;
  RolloutBuffer buf = c.collect(params, rng, 10);
  PPOHyperparams hp;
  hp.minibatches = 4;
  compute_advantages(buf, hp.gamma, hp.gae_lambda);
  AdamState adam = AdamState::zeros(params.shape());
  ppo_update(params, adam, buf, hp, 0.0, rng);
  EXPECT_EQ(params.w1, before.w1);
  EXPECT_EQ(params.w_policy, before.w_policy);
  EXPECT_EQ(params.b_value, before.b_value);
}

TEST(PpoUpdate, AdvantagesComputedPerEnvironment) {
  VectorEnv v(stub_envs(2, EnvConfig{.max_steps = 5}), 8);
  RolloutCollector c(v);
  c.reset();
  std::mt19937_64 rng(5);
  RolloutBuffer buf = c.collect(init_params(3), rng, 10);
  compute_advantages(buf, 0.9, 0.8);
  for (int e = 0; e < 2; ++e) {
    std::vector<double> r, val;
    std::vector<int> d;
    for (int t = 0; t < 10; ++t) {
      r.push_back(buf.at(e, t).reward);
      val.push_back(buf.at(e, t).value);
      d.push_back(buf.at(e, t).done ? 1 : 0);
    }
    const GaeResult g = compute_gae(r, val, d, buf.next_values[static_cast<std::size_t>(e)], 0.9, 0.8);
    for (int t = 0; t < 10; ++t) EXPECT_EQ(buf.advantages[static_cast<std::size_t>(e * 10 + t)], g.advantages[static_cast<std::size_t>(t)]);
  }
}

TEST(PpoHyperparams, Validation) {
  PPOHyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  EXPECT_EQ(hp.rollout_size(), 400);
  EXPECT_EQ(hp.n_updates(), 500);
  EXPECT_NEAR(hp.schedule().rate(499), 5e-5, 1e-15);
  hp.minibatches = 7;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp.minibatches = 8;
  hp.ent_coef = -1.0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
}

TEST(Trainer, SmokeRunWritesMetrics) {
  const auto dir = circuitrl::testing::temp_dir("train_smoke");
  TrainerOptions o = small_options(2000);
  o.output_dir = dir;
  std::ostringstream log;
  o.log = &log;
  const TrainResult r = train(std::make_shared<const StubScorer>(), std::make_shared<const SeedOnlyBatches>(), o);
  ASSERT_EQ(r.history.size(), 10u);
  EXPECT_EQ(r.env_steps, 2000);
  for (const auto& rec : r.history) {
    EXPECT_TRUE(std::isfinite(rec.stats.policy_loss));
    EXPECT_TRUE(std::isfinite(rec.stats.value_loss));
    EXPECT_GT(rec.stats.entropy, 0.0);
  }
  EXPECT_EQ(r.history.back().update, 10);
  EXPECT_NEAR(r.history.back().lr, 0.2 * 2.5e-4, 1e-15);

  std::ifstream in(dir / "metrics.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kMetricsHeader);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 10);
  EXPECT_TRUE(std::filesystem::exists(dir / "final.safetensors"));
  EXPECT_EQ(log.str().find("warning"), std::string::npos);
}

TEST(Trainer, WarnsWithFewEnvironments) {
  TrainerOptions o = small_options(100);
  o.ppo.n_envs = 2;
  o.ppo.minibatches = 2;
  std::ostringstream log;
  o.log = &log;
  train(std::make_shared<const StubScorer>(), std::make_shared<const SeedOnlyBatches>(), o);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  EXPECT_NE(log.str().find("fewer than 4"), std::string::npos);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  auto scorer = std::make_shared<const StubScorer>();
  auto batches = std::make_shared<const SeedOnlyBatches>();
  const auto dir = circuitrl::testing::temp_dir("train_resume");
  TrainerOptions o = small_options(1000);  // 5 updates
  o.checkpoint_every = 2;
  o.output_dir = dir / "full";
  std::ostringstream log;
  o.log = &log;
  const TrainResult full = train(scorer, batches, o);

  const Checkpoint mid = load_checkpoint(dir / "full" / "checkpoint_00002.safetensors");
  o.output_dir = dir / "resumed";
  const TrainResult resumed = train(scorer, batches, o, &mid);
  ASSERT_EQ(resumed.history.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(resumed.history[i].update, full.history[i + 2].update);
    EXPECT_EQ(resumed.history[i].stats.policy_loss, full.history[i + 2].stats.policy_loss);
    EXPECT_EQ(resumed.history[i].stats.entropy, full.history[i + 2].stats.entropy);
  }
  EXPECT_EQ(resumed.final_state.params.w1, full.final_state.params.w1);
  EXPECT_EQ(resumed.final_state.params.w_policy, full.final_state.params.w_policy);
  EXPECT_EQ(resumed.env_steps, full.env_steps);
}

TEST(Trainer, RunConfigParsing) {
  const auto dir = circuitrl::testing::temp_dir("runcfg");
  {
    std::ofstream out(dir / "run.json");
    out << R"({"seed": 3, "output_dir": "out", "weights": "w.safetensors",
               "ppo": {"n_envs": 4, "horizon": 10, "total_steps": 400, "minibatches": 2},
               "env": {"max_steps": 10}, "task": {"task_batch_size": 8}})";
  }
  const RunConfig rc = load_run_config(dir / "run.json");
  EXPECT_EQ(rc.trainer.seed, 3u);
  EXPECT_EQ(rc.trainer.output_dir, dir / "out");
  EXPECT_EQ(rc.weights, dir / "w.safetensors");
  EXPECT_EQ(rc.trainer.ppo.n_envs, 4);
  EXPECT_EQ(rc.trainer.ppo.clip, 0.2);
  EXPECT_EQ(rc.trainer.env.max_steps, 10);
  EXPECT_EQ(rc.task.task_batch_size, 8u);
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"seed": 3, "learning_rate": 0.1})";
  }
  EXPECT_THROW(load_run_config(dir / "bad.json"), FormatError);
}

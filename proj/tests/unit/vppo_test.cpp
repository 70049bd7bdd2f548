#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wqdil/point_walker.hpp"
#include "wqdil/vppo.hpp"

using namespace wqdil;
using namespace wqdil::vppo;

namespace {

VppoConfig small_config() {
  VppoConfig c;
  c.n_envs = 8;
  c.rollout_length = 100;
  c.n1 = 2;
  c.n2 = 2;
  return c;
}

// Two-step episodes; reward is the clamped action. Optimal mean action is 1.
class LineEnv final : public Environment {
 public:
  int observation_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  void reset(std::uint64_t) override { t_ = 0; }
  void observe(std::span<double> out) const override { out[0] = t_; }
  Measure delta() const override { return {0.0, 0.0}; }
  StepResult step(std::span<const double> a) override {
    ++t_;
    return {std::clamp(a[0], -1.0, 1.0), {0.0, 0.0}, t_ >= 2};
  }
  bool done() const override { return t_ >= 2; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<LineEnv>(*this); }

 private:
  int t_ = 0;
};

class ConstantReward final : public BaseReward {
 public:
  explicit ConstantReward(double b) : b_(b) {}
  void evaluate(const nn::Matrix&, const nn::Matrix&, std::span<const Measure>,
                std::span<const double>, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), b_);
  }

 private:
  double b_;
};

std::vector<std::uint64_t> seeds(int n, std::uint64_t base = 100) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), base);
  return s;
}

}  // namespace

TEST(Vppo, RolloutChannelsAndLayout) {
  env::PointWalkerEnv proto;
  Vppo vppo(small_config(), proto, 1);
  Random rng(2);
  const auto policy = vppo.init_policy(rng);
  explore::VisitCountArchive explorer;
  const auto buf = vppo.collect_rollout(policy, ConstantReward(0.25), explorer, false);
  ASSERT_EQ(buf.size(), 800u);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    EXPECT_EQ(buf.rewards(r, 0), 0.25);
    // Single-step measure is the contact pattern of the observed state.
    EXPECT_EQ(buf.rewards(r, 1), buf.observations(r, 4));
    EXPECT_EQ(buf.rewards(r, 2), buf.observations(r, 5));
    // Episodes are exactly one rollout long: row t carries t/T.
    EXPECT_DOUBLE_EQ(buf.observations(r, 6), static_cast<double>(i / 8) / 100.0);
    EXPECT_EQ(buf.dones[i], i / 8 == 99 ? 1 : 0);
  }
  EXPECT_EQ(explorer.total(), 800u);
}

TEST(Vppo, TrueRewardMatchesEnvironment) {
  env::PointWalkerEnv proto;
  Vppo vppo(small_config(), proto, 3);
  Random rng(4);
  const auto policy = vppo.init_policy(rng);
  explore::VisitCountArchive explorer;
  const auto buf = vppo.collect_rollout(policy, TrueReward(), explorer, false);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double a1 = std::clamp(buf.actions(r, 0), -1.0, 1.0), a2 = std::clamp(buf.actions(r, 1), -1.0, 1.0);
    const double c1 = buf.observations(r, 4), c2 = buf.observations(r, 5);
    const double phi1 = std::atan2(buf.observations(r, 0), buf.observations(r, 1));
    const double phi2 = std::atan2(buf.observations(r, 2), buf.observations(r, 3));
    const double speed = 0.5 * (c1 * std::abs(std::cos(phi1)) + c2 * std::abs(std::cos(phi2)));
    EXPECT_NEAR(buf.rewards(r, 0), speed - 0.05 * (a1 * a1 + a2 * a2), 1e-12);
  }
}

TEST(Vppo, EvaluationAddsBonusPerStep) {
  env::PointWalkerEnv proto;
  Vppo vppo(small_config(), proto, 5);
  Random rng(6);
  const auto policy = vppo.init_policy(rng);
  explore::VisitCountArchive explorer;
  explorer.visit({1.0, 0.0});
  explorer.visit({1.0, 0.0});
  explorer.visit({0.0, 0.0});
  explore::VisitCountArchive before = explorer;
  const auto s = seeds(3);
  const auto ev = vppo.evaluate(policy, s, ConstantReward(0.5), explorer, true);
  ASSERT_EQ(ev.step_rewards.size(), 3u);
  env::PointWalker walker;
  for (int e = 0; e < 3; ++e) {
    // Replay the deterministic episode to recover the single-step measures.
    auto state = walker.reset(s[e]);
    std::vector<double> obs(7);
    double total = 0.0;
    std::vector<Measure> deltas;
    for (int t = 0; t < 100; ++t) {
      walker.observe(state, obs);
      const auto a = nn::mean_actions(vppo.policy_spec(), policy, nn::as_row(obs));
      const auto out = walker.step(state, env::EnvAction(a(0, 0), a(0, 1)));
      const Measure d = env::single_step_measure(state);
      const double expected = 0.5 + before.bonus(d);
      EXPECT_NEAR(ev.step_rewards[e][t], expected, 1e-15);
      total += expected;
      deltas.push_back(d);
      state = out.next_state;
    }
    EXPECT_NEAR(ev.episode_learned[e], total, 1e-12);
    EXPECT_EQ(ev.episode_measures[e], env::episodic_measure(deltas));
  }
  EXPECT_EQ(explorer.total(), 3u + 300u);
}

TEST(Gae, MatchesQuadraticDefinition) {
  Random rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_envs = 1 + static_cast<int>(rng.index(4));
    const int length = 1 + static_cast<int>(rng.index(30));
    std::vector<double> r(n_envs * length), v(n_envs * length), last(n_envs);
    std::vector<std::uint8_t> d(n_envs * length);
    for (auto& x : r) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    for (auto& x : last) x = rng.normal();
    for (auto& x : d) x = rng.uniform() < 0.1;
    const double gamma = rng.uniform(0.5, 1.0), lambda = rng.uniform(0.0, 1.0);
    const auto got = gae_advantages(r, v, d, last, n_envs, gamma, lambda);
    const auto want = oracle::gae_quadratic(r, v, d, last, n_envs, gamma, lambda);
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_NEAR(got.advantages[i], want[i], 1e-10);
      EXPECT_NEAR(got.returns[i], want[i] + v[i], 1e-10);
    }
  }
}

TEST(Gae, UnitDiscountTelescopes) {
  // gamma = lambda = 1, no dones: A_t = sum_{u>=t} r_u + V_last - V_t.
  const std::vector<double> r{1.0, 2.0, 3.0}, v{0.5, -1.0, 4.0}, last{10.0};
  const std::vector<std::uint8_t> d(3, 0);
  const auto got = gae_advantages(r, v, d, last, 1, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(got.advantages[0], 6.0 + 10.0 - 0.5);
  EXPECT_DOUBLE_EQ(got.advantages[1], 5.0 + 10.0 + 1.0);
  EXPECT_DOUBLE_EQ(got.advantages[2], 3.0 + 10.0 - 4.0);
}

TEST(Gae, ZeroRewardsAndValues) {
  const std::vector<double> z(12, 0.0), last(3, 0.0);
  const std::vector<std::uint8_t> d(12, 0);
  for (double a : gae_advantages(z, z, d, last, 3, 0.99, 0.95).advantages) EXPECT_EQ(a, 0.0);
  EXPECT_THROW(gae_advantages(z, z, d, last, 5, 0.99, 0.95), std::invalid_argument);
}

TEST(Ppo, ZeroAdvantagesLeavePolicyUnchanged) {
  env::PointWalkerEnv proto;
  Vppo vppo(small_config(), proto, 8);
  Random rng(9);
  auto policy = vppo.init_policy(rng);
  auto critic = vppo.init_critic(rng);
  const auto before = policy;
  explore::VisitCountArchive explorer;
  const auto buf = vppo.collect_rollout(policy, ConstantReward(0.0), explorer, false);
  nn::Adam popt(policy.size()), copt(critic.size());
  std::vector<double> returns(buf.size(), 1.0);
  vppo.ppo_update(policy, critic, buf, std::vector<double>(buf.size(), 0.0), returns, popt, copt);
  EXPECT_EQ(policy, before);
}

TEST(Ppo, PositiveAdvantageRaisesProbability) {
  LineEnv proto;
  VppoConfig cfg;
  cfg.n_envs = 4;
  cfg.rollout_length = 2;
  cfg.minibatches = 1;
  cfg.epochs = 1;
  cfg.policy_hidden = {};
  Vppo vppo(cfg, proto, 10);
  Random rng(11);
  auto policy = vppo.init_policy(rng);
  auto critic = vppo.init_critic(rng);
  RolloutBuffer buf;
  buf.n_envs = 4;
  buf.length = 2;
  buf.observations = nn::Matrix::Zero(8, 1);
  buf.actions.resize(8, 1);
  std::vector<double> adv(8);
  for (int i = 0; i < 8; ++i) {
    buf.actions(i, 0) = i % 2 ? 0.5 : -0.5;
    adv[i] = i % 2 ? 1.0 : -1.0;
  }
  nn::Tape tape;
  buf.log_probs = nn::log_prob(vppo.policy_spec(), policy, buf.observations, buf.actions, tape);
  const double before = nn::log_prob(vppo.policy_spec(), policy, std::vector<double>{0.0}, std::vector<double>{0.5});
  nn::Adam popt(policy.size(), 1e-2), copt(critic.size());
  vppo.ppo_update(policy, critic, buf, adv, std::vector<double>(8, 0.0), popt, copt);
  const double after = nn::log_prob(vppo.policy_spec(), policy, std::vector<double>{0.0}, std::vector<double>{0.5});
  EXPECT_GT(after, before);
}

TEST(Ppo, ImprovesTwoStepReturnAcrossSeeds) {
  LineEnv proto;
  VppoConfig cfg;
  cfg.n_envs = 8;
  cfg.rollout_length = 16;
  cfg.policy_hidden = {8};
  cfg.critic_hidden = {8};
  cfg.learning_rate = 1e-2;
  int improved = 0;
  const std::array<double, kChannels> w{1.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Vppo vppo(cfg, proto, seed);
    Random rng(seed + 1000);
    const auto theta = vppo.init_policy(rng);
    explore::VisitCountArchive explorer;
    const auto s = seeds(1);
    const double before = vppo.evaluate(theta, s, TrueReward(), explorer, false).true_return;
    const auto after = vppo.optimize(theta, w, 5, TrueReward(), explorer, false);
    improved += vppo.evaluate(after, s, TrueReward(), explorer, false).true_return > before;
  }
  EXPECT_GE(improved, 90);
}

TEST(Jacobian, NoCyclesGiveZeroGradients) {
  env::PointWalkerEnv proto;
  auto cfg = small_config();
  cfg.n1 = 0;
  Vppo vppo(cfg, proto, 12);
  Random rng(13);
  const auto theta = vppo.init_policy(rng);
  explore::VisitCountArchive explorer;
  const auto est = vppo.compute_jacobian(theta, ConstantReward(0.0), explorer, false, seeds(2));
  ASSERT_EQ(est.grads.size(), 3u);
  for (int c = 0; c < 3; ++c) {
    EXPECT_TRUE(est.zero_grad[c]);
    for (double g : est.grads[c]) EXPECT_EQ(g, 0.0);
  }
}

TEST(Jacobian, GradientsHaveUnitNorm) {
  env::PointWalkerEnv proto;
  Vppo vppo(small_config(), proto, 14);
  Random rng(15);
  const auto theta = vppo.init_policy(rng);
  explore::VisitCountArchive explorer;
  const auto est = vppo.compute_jacobian(theta, TrueReward(), explorer, false, seeds(2));
  for (int c = 0; c < 3; ++c) {
    ASSERT_FALSE(est.zero_grad[c]);
    double sq = 0.0;
    for (double g : est.grads[c]) sq += g * g;
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
  }
  EXPECT_EQ(est.f, est.evaluation.learned_return);
}

TEST(Jacobian, MeasureDirectionAgreesWithFiniteDifference) {
  // Linear mean policy: directional finite difference of the leg-1 contact
  // rate along the estimated measure gradient should be positive.
  env::PointWalkerEnv proto;
  auto cfg = small_config();
  cfg.policy_hidden = {};
  cfg.n1 = 4;
  int agree = 0;
  const auto probe = seeds(32, 500);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Vppo vppo(cfg, proto, seed);
    Random rng(seed + 77);
    const auto theta = vppo.init_policy(rng);
    ASSERT_EQ(vppo.policy_spec().mean.param_count(), 16u);
    explore::VisitCountArchive explorer;
    const auto est = vppo.compute_jacobian(theta, TrueReward(), explorer, false, seeds(2));
    const double h = 0.3;
    auto shifted = [&](double s) {
      auto p = theta;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += s * est.grads[1][i];
      explore::VisitCountArchive scratch;
      return vppo.evaluate(p, probe, TrueReward(), scratch, false).measure[0];
    };
    agree += shifted(h) - shifted(-h) > 0.0;
  }
  EXPECT_GE(agree, 4);
}

TEST(Vppo, MeasureWeightRaisesLegOneContact) {
  env::PointWalkerEnv proto;
  auto cfg = small_config();
  cfg.n_envs = 16;
  cfg.rollout_length = 64;
  int raised = 0;
  const std::array<double, kChannels> w{0.0, 1.0, 0.0};
  const auto probe = seeds(16, 900);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Vppo vppo(cfg, proto, seed);
    Random rng(seed + 31);
    const auto theta = vppo.init_policy(rng);
    explore::VisitCountArchive explorer;
    const double before = vppo.evaluate(theta, probe, TrueReward(), explorer, false).measure[0];
    const auto after = vppo.optimize(theta, w, 10, TrueReward(), explorer, false);
    raised += vppo.evaluate(after, probe, TrueReward(), explorer, false).measure[0] > before;
  }
  EXPECT_GE(raised, 4);
}

TEST(Vppo, SameSeedSameResult) {
  env::PointWalkerEnv proto;
  const std::array<double, kChannels> w{1.0, 0.5, -0.5};
  auto once = [&] {
    Vppo vppo(small_config(), proto, 21);
    Random rng(22);
    const auto theta = vppo.init_policy(rng);
    explore::VisitCountArchive explorer;
    return vppo.optimize(theta, w, 2, TrueReward(), explorer, true);
  };
  EXPECT_EQ(once(), once());
}

TEST(Vppo, ObjectiveWeightNeedsObjectiveChannel) {
  env::PointWalkerEnv proto;
  Vppo vppo(small_config(), proto, 23);
  Random rng(24);
  auto policy = vppo.init_policy(rng);
  auto critic = vppo.init_critic(rng);
  explore::VisitCountArchive explorer;
  auto buf = vppo.collect_rollout(policy, TrueReward(), explorer, false);
  buf.has_objective = false;
  nn::Adam popt(policy.size()), copt(critic.size());
  const std::array<double, kChannels> w{1.0, 0.0, 0.0};
  EXPECT_THROW(vppo.ppo_update(policy, critic, buf, w, popt, copt), std::logic_error);
  const std::array<double, 2> bad{1.0, 0.0};
  EXPECT_THROW(vppo.ppo_update(policy, critic, buf, bad, popt, copt), std::invalid_argument);
}

#include <cmath>

#include <gtest/gtest.h>

#include "wqdil/random.hpp"
#include "wqdil/reward_model.hpp"

using namespace wqdil;
using namespace wqdil::reward;

namespace {

constexpr int kState = 4;
constexpr int kAction = 2;

nn::Matrix blob(Random& rng, int rows, int cols, double center, double spread = 0.3) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = center + spread * rng.normal();
  return m;
}

RewardModelConfig small_config() {
  RewardModelConfig c;
  c.hidden = {32, 32};
  c.learning_rate = 1e-3;
  return c;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

}  // namespace

TEST(RewardVariant, NamesAndFlags) {
  EXPECT_EQ((RewardVariant{RewardKind::kMcWaeWgail, true}).name(), "mCWAE-WGAIL-Bonus");
  EXPECT_EQ((RewardVariant{RewardKind::kWaeWgail, false}).name(), "WAE-WGAIL");
  EXPECT_TRUE((RewardVariant{RewardKind::kGail, false}).measure_conditioned());
  EXPECT_FALSE((RewardVariant{RewardKind::kWaeGail, false}).measure_conditioned());
  EXPECT_EQ(parse_reward_kind("mcwae-wgail"), RewardKind::kMcWaeWgail);
  EXPECT_THROW(parse_reward_kind("airl"), std::invalid_argument);
}

TEST(RewardModel, InputWidthFollowsConditioning) {
  RewardModel mc({RewardKind::kMcWaeWgail, true}, kState, kAction, {}, 1);
  RewardModel wae({RewardKind::kWaeWgail, true}, kState, kAction, {}, 1);
  EXPECT_EQ(mc.input_dim(), kState + kAction + 2);
  EXPECT_EQ(wae.input_dim(), kState + kAction);
  EXPECT_EQ(mc.encoder_spec().input_width(), mc.input_dim());
  EXPECT_THROW(mc.base_rewards(nn::Matrix::Zero(1, 3)), std::invalid_argument);
}

TEST(RewardModel, ConstantDiscriminatorGivesLogTwo) {
  RewardModel gail({RewardKind::kGail, false}, kState, kAction, {}, 2);
  std::fill(gail.adversary_params().begin(), gail.adversary_params().end(), 0.0);
  Random rng(1);
  for (double r : gail.base_rewards(blob(rng, 5, gail.input_dim(), 0.0))) EXPECT_NEAR(r, std::log(2.0), 1e-15);
}

TEST(RewardModel, ZeroCriticGivesBias) {
  RewardModel m({RewardKind::kWaeWgail, false}, kState, kAction, {}, 3);
  auto& p = m.adversary_params();
  std::fill(p.begin(), p.end(), 0.0);
  p.back() = 0.75;
  Random rng(2);
  for (double r : m.base_rewards(blob(rng, 5, m.input_dim(), 1.0))) EXPECT_EQ(r, 0.75);
}

TEST(RewardModel, IdenticalBatchesLeaveConstantDiscriminatorAtHalf) {
  RewardModel gail({RewardKind::kGail, false}, kState, kAction, {}, 4);
  std::fill(gail.adversary_params().begin(), gail.adversary_params().end(), 0.0);
  Random rng(3);
  const auto x = blob(rng, 16, gail.input_dim(), 0.0);
  const auto losses = gail.update_gail(x, x);
  EXPECT_NEAR(losses.adversary, 2.0 * std::log(2.0), 1e-12);
  EXPECT_EQ(losses.gradient_penalty, 0.0);
  for (double v : gail.adversary_params()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(RewardModel, GailSeparatesDisjointBlobs) {
  RewardModel gail({RewardKind::kGail, false}, kState, kAction, small_config(), 5);
  Random rng(4);
  for (int step = 0; step < 500; ++step) {
    gail.update_gail(blob(rng, 64, gail.input_dim(), 1.0), blob(rng, 64, gail.input_dim(), -1.0));
  }
  const auto e = gail.adversary_scores(blob(rng, 200, gail.input_dim(), 1.0));
  const auto p = gail.adversary_scores(blob(rng, 200, gail.input_dim(), -1.0));
  int correct = 0;
  for (double s : e) correct += s > 0.0;
  for (double s : p) correct += s < 0.0;
  EXPECT_GT(correct / 400.0, 0.9);
}

TEST(RewardModel, ExpertRewardExceedsPolicyRewardAfterTraining) {
  for (auto kind : {RewardKind::kGail, RewardKind::kWaeGail, RewardKind::kWaeWgail, RewardKind::kMcWaeWgail}) {
    RewardModel m({kind, false}, kState, kAction, small_config(), 6);
    Random rng(5);
    for (int step = 0; step < 200; ++step) {
      m.update(blob(rng, 64, m.input_dim(), 0.8), blob(rng, 64, m.input_dim(), -0.8));
    }
    const double re = mean(m.base_rewards(blob(rng, 200, m.input_dim(), 0.8)));
    const double rp = mean(m.base_rewards(blob(rng, 200, m.input_dim(), -0.8)));
    EXPECT_GT(re, rp) << to_string(kind);
  }
}

TEST(RewardModel, AutoencoderRegressionDescendsWithNegligibleLambda) {
  auto cfg = small_config();
  cfg.lambda = 1e-12;
  cfg.learning_rate = 1e-4;
  RewardModel m({RewardKind::kWaeGail, false}, kState, kAction, cfg, 7);
  Random rng(6);
  const auto e = blob(rng, 32, m.input_dim(), 0.5, 1.0);
  const auto p = blob(rng, 32, m.input_dim(), -0.5, 1.0);
  double last = m.update_wae_gail(e, p).reconstruction;
  for (int i = 0; i < 50; ++i) {
    const double now = m.update_wae_gail(e, p).reconstruction;
    EXPECT_LT(now, last);
    last = now;
  }
}

TEST(RewardModel, GradientPenaltyDrivesCriticSlopeToOne) {
  auto cfg = small_config();
  cfg.latent_dim = 2;
  RewardModel m({RewardKind::kWaeWgail, false}, kState, kAction, cfg, 8);
  Random rng(7);
  for (int step = 0; step < 1500; ++step) {
    m.update_adversary_on_latents(blob(rng, 64, 2, 1.0, 0.5), blob(rng, 64, 2, -1.0, 0.5));
  }
  const double g = m.mean_critic_grad_norm(blob(rng, 256, 2, 1.0, 0.5), blob(rng, 256, 2, -1.0, 0.5));
  EXPECT_GE(g, 0.8);
  EXPECT_LE(g, 1.2);
}

TEST(RewardModel, ExchangeableLatentsGiveZeroCriticGradient) {
  // Swapping the two batches negates the critic objective, so on identical
  // batches the data term cancels. Adam rescales the rounding residue of
  // the cancellation by 1/eps, hence the loose bound.
  auto cfg = small_config();
  cfg.wgan_gp_coef = 0.0;
  RewardModel m({RewardKind::kWaeWgail, false}, kState, kAction, cfg, 9);
  const auto before = m.adversary_params();
  Random rng(8);
  const auto z = blob(rng, 32, cfg.latent_dim, 0.0);
  m.update_adversary_on_latents(z, z);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(m.adversary_params()[i], before[i], 1e-9);
}

TEST(RewardModel, MeasureOnlySeparableData) {
  RewardModel m({RewardKind::kMcWaeWgail, false}, kState, kAction, small_config(), 10);
  Random rng(9);
  auto make = [&](double d) {
    nn::Matrix x = blob(rng, 64, m.input_dim(), 0.0, 0.5);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      x(r, kState + kAction) = d;
      x(r, kState + kAction + 1) = 1.0 - d;
    }
    return x;
  };
  for (int step = 0; step < 300; ++step) m.update_mcwae_wgail(make(1.0), make(0.0));
  const double re = mean(m.base_rewards(make(1.0)));
  const double rp = mean(m.base_rewards(make(0.0)));
  EXPECT_GT(re - rp, 0.0);
  const std::vector<double> s(kState, 0.1), a(kAction, 0.2);
  EXPECT_NE(m.base_reward(s, a, {1.0, 0.0}), m.base_reward(s, a, {0.0, 1.0}));
}

TEST(RewardModel, ConstantMeasureMatchesPaddedInput) {
  // With delta held fixed the conditioned model is the plain WAE-WGAIL model
  // on inputs widened by two constant columns.
  RewardModel mc({RewardKind::kMcWaeWgail, false}, kState, kAction, small_config(), 11);
  RewardModel padded({RewardKind::kWaeWgail, false}, kState + 2, kAction, small_config(), 11);
  ASSERT_EQ(mc.input_dim(), padded.input_dim());
  Random rng(10);
  for (int step = 0; step < 5; ++step) {
    nn::Matrix e = blob(rng, 16, mc.input_dim(), 0.3), p = blob(rng, 16, mc.input_dim(), -0.3);
    e.rightCols(2).setConstant(0.5);
    p.rightCols(2).setConstant(0.5);
    const auto a = mc.update_mcwae_wgail(e, p);
    const auto b = padded.update_wae_wgail(e, p);
    EXPECT_EQ(a.adversary, b.adversary);
    EXPECT_EQ(a.reconstruction, b.reconstruction);
  }
  EXPECT_EQ(mc.encoder_params(), padded.encoder_params());
  EXPECT_EQ(mc.adversary_params(), padded.adversary_params());
  EXPECT_THROW(padded.update_mcwae_wgail(blob(rng, 4, padded.input_dim(), 0.0), blob(rng, 4, padded.input_dim(), 0.0)),
               std::invalid_argument);
}

TEST(RewardModel, ParametersStayFiniteOnRandomData) {
  for (auto kind : {RewardKind::kGail, RewardKind::kWaeGail, RewardKind::kWaeWgail, RewardKind::kMcWaeWgail}) {
    RewardModelConfig cfg;
    cfg.hidden = {16, 16};
    cfg.n_critic = 1;
    RewardModel m({kind, false}, kState, kAction, cfg, 12);
    Random rng(11);
    for (int step = 0; step < 10000; ++step) {
      m.update(blob(rng, 8, m.input_dim(), 0.0, 2.0), blob(rng, 8, m.input_dim(), 0.5, 2.0));
    }
    EXPECT_TRUE(m.finite()) << to_string(kind);
  }
}

TEST(RewardModel, BaseRewardIsDeterministic) {
  RewardModel m({RewardKind::kMcWaeWgail, true}, kState, kAction, {}, 13);
  Random rng(12);
  const auto x = blob(rng, 10, m.input_dim(), 0.0);
  EXPECT_EQ(m.base_rewards(x), m.base_rewards(x));
}

TEST(RewardModel, TrainEpochsCoversPolicyData) {
  RewardModelConfig cfg;
  cfg.hidden = {16};
  cfg.batch_size = 10;
  cfg.epochs = 2;
  RewardModel m({RewardKind::kGail, false}, kState, kAction, cfg, 14);
  Random rng(13);
  const auto l = m.train_epochs(blob(rng, 7, m.input_dim(), 1.0), blob(rng, 35, m.input_dim(), -1.0));
  EXPECT_TRUE(std::isfinite(l.adversary));
  EXPECT_GT(l.adversary, 0.0);
  EXPECT_THROW(m.train_epochs(nn::Matrix(0, m.input_dim()), blob(rng, 3, m.input_dim(), 0.0)), std::invalid_argument);
}

TEST(RewardModel, UnequalBatchesRejected) {
  RewardModel m({RewardKind::kWaeWgail, false}, kState, kAction, {}, 15);
  Random rng(14);
  EXPECT_THROW(m.update(blob(rng, 4, m.input_dim(), 0.0), blob(rng, 5, m.input_dim(), 0.0)), std::invalid_argument);
}

TEST(RewardModel, GoldenFirstUpdateLosses) {
  // Recorded from the first implementation; guards against silent changes
  // to loss definitions. Tolerance covers fused vs unfused multiply-add.
  struct Golden {
    RewardKind kind;
    double adversary, penalty, reconstruction;
  };
  const Golden golden[] = {
      {RewardKind::kGail, 1.5651478516320909, 9.307836147305462, 0.0},
      {RewardKind::kWaeGail, 2.0918890285614959, 3.7937216066595418, 2.8517573218059766},
      {RewardKind::kWaeWgail, -0.0501989087340243, 6.8266715898763843, 2.8517573218059766},
      {RewardKind::kMcWaeWgail, -0.81045880025079442, 19.531082973707402, 7.69658264219375},
  };
  for (const auto& g : golden) {
    RewardModelConfig cfg;
    cfg.hidden = {16, 16};
    RewardModel m({g.kind, true}, kState, kAction, cfg, 2024);
    Random rng(2025);
    const auto l = m.update(blob(rng, 32, m.input_dim(), 0.5), blob(rng, 32, m.input_dim(), -0.5));
    EXPECT_NEAR(l.adversary, g.adversary, 1e-9 * std::max(1.0, std::abs(g.adversary))) << to_string(g.kind);
    EXPECT_NEAR(l.gradient_penalty, g.penalty, 1e-9 * std::max(1.0, std::abs(g.penalty))) << to_string(g.kind);
    EXPECT_NEAR(l.reconstruction, g.reconstruction, 1e-9 * std::max(1.0, std::abs(g.reconstruction)))
        << to_string(g.kind);
  }
}

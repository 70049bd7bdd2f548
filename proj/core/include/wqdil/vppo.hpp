#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "wqdil/adam.hpp"
#include "wqdil/environment.hpp"
#include "wqdil/mlp.hpp"
#include "wqdil/policy.hpp"
#include "wqdil/random.hpp"
#include "wqdil/reward_model.hpp"
#include "wqdil/visit_archive.hpp"

namespace wqdil::vppo {

/// Learned objective plus one channel per measure dimension.
inline constexpr int kChannels = 1 + kMeasureDim;

/// Source of the channel-0 base reward for a batch of transitions.
class BaseReward {
 public:
  virtual ~BaseReward() = default;
  virtual void evaluate(const nn::Matrix& observations, const nn::Matrix& actions,
                        std::span<const Measure> deltas, std::span<const double> true_rewards,
                        std::span<double> out) const = 0;
};

/// Passes the environment reward through; used for expert archives.
class TrueReward final : public BaseReward {
 public:
  void evaluate(const nn::Matrix& observations, const nn::Matrix& actions,
                std::span<const Measure> deltas, std::span<const double> true_rewards,
                std::span<double> out) const override;
};

/// Adversarial reward model output. Actions are clamped to [-1, 1] before
/// they reach the model, matching what the environment executed.
class LearnedReward final : public BaseReward {
 public:
  explicit LearnedReward(const reward::RewardModel& model) : model_(&model) {}
  void evaluate(const nn::Matrix& observations, const nn::Matrix& actions,
                std::span<const Measure> deltas, std::span<const double> true_rewards,
                std::span<double> out) const override;

  /// Model inputs for a batch of transitions.
  nn::Matrix features(const nn::Matrix& observations, const nn::Matrix& actions,
                      std::span<const Measure> deltas) const;

 private:
  const reward::RewardModel* model_;
};

struct VppoConfig {
  int n_envs = 32;
  int rollout_length = 64;
  int n1 = 4;
  int n2 = 4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  int minibatches = 4;
  int epochs = 4;
  double clip = 0.2;
  double max_grad_norm = 0.5;
  double initial_log_std = -0.5;
  std::vector<int> policy_hidden{32, 32};
  std::vector<int> critic_hidden{32, 32};
  bool learn_log_std = true;
  bool normalize_rewards = true;
};

/// Transitions from `n_envs` environments over `length` steps. Row index is
/// t * n_envs + env.
struct RolloutBuffer {
  int n_envs = 0;
  int length = 0;
  nn::Matrix observations;
  /// Sampled (unclamped) actions; log_probs refer to these.
  nn::Matrix actions;
  std::vector<double> log_probs;
  /// Episode ended after this transition.
  std::vector<std::uint8_t> dones;
  /// rows x kChannels: combined learned reward, then delta_1..delta_k.
  nn::Matrix rewards;
  std::vector<double> base_rewards;
  std::vector<double> bonuses;
  std::vector<double> true_rewards;
  std::vector<Measure> deltas;
  /// Critic estimates for the scalarization being optimized.
  std::vector<double> values;
  nn::Matrix last_observations;
  std::vector<double> last_values;
  /// False when channel 0 was not computed for this collection.
  bool has_objective = true;

  std::size_t size() const { return static_cast<std::size_t>(n_envs) * length; }
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation over a [length x n_envs] layout. A done
/// flag cuts bootstrapping after that step. Advantages are not normalized.
Advantages gae_advantages(std::span<const double> rewards, std::span<const double> values,
                          std::span<const std::uint8_t> dones,
                          std::span<const double> last_values, int n_envs, double gamma,
                          double lambda);

/// GAE on one reward channel of a buffer with values already filled.
Advantages gae_advantages(const RolloutBuffer& buffer, int channel, double gamma, double lambda);

void normalize_advantages(std::vector<double>& advantages);

/// Deterministic-policy evaluation over a fixed set of reset seeds.
struct Evaluation {
  /// Mean undiscounted return under the channel-0 reward (bonus included
  /// when enabled).
  double learned_return = 0.0;
  double true_return = 0.0;
  Measure measure{};
  std::vector<double> episode_learned;
  std::vector<double> episode_true;
  std::vector<Measure> episode_measures;
  /// Per-episode, per-step channel-0 rewards.
  std::vector<std::vector<double>> step_rewards;
};

struct JacobianEstimate {
  /// Mean learned-reward return of the initial policy.
  double f = 0.0;
  Measure m{};
  /// Evaluation the estimate was reported from.
  Evaluation evaluation;
  /// grads[0] = objective, grads[1..k] = measures; unit norm unless zero.
  std::vector<nn::ParamVector> grads;
  std::vector<bool> zero_grad;
};

class Vppo {
 public:
  Vppo(VppoConfig config, const Environment& prototype, std::uint64_t seed);

  const VppoConfig& config() const { return config_; }
  const nn::PolicySpec& policy_spec() const { return policy_spec_; }
  const nn::MlpSpec& critic_spec() const { return critic_spec_; }
  Random& rng() { return rng_; }

  nn::ParamVector init_policy(Random& rng) const;
  nn::ParamVector init_critic(Random& rng) const;

  /// Collects rollout_length steps from each of n_envs environments. Bonuses
  /// are computed against the explorer state at entry; the batch's visits are
  /// applied once collection finishes.
  RolloutBuffer collect_rollout(std::span<const double> policy, const BaseReward& reward,
                                explore::VisitCountArchive& explorer, bool bonus_enabled);

  /// Clipped-surrogate update with precomputed advantages and value targets.
  void ppo_update(nn::ParamVector& policy, nn::ParamVector& critic, const RolloutBuffer& buffer,
                  std::vector<double> advantages, const std::vector<double>& returns,
                  nn::Adam& policy_opt, nn::Adam& critic_opt);

  /// Scalarizes the channels with `channel_weights` (after per-channel reward
  /// normalization), fills critic values, runs GAE and the PPO epochs.
  void ppo_update(nn::ParamVector& policy, nn::ParamVector& critic, RolloutBuffer& buffer,
                  std::span<const double> channel_weights, nn::Adam& policy_opt,
                  nn::Adam& critic_opt);

  /// Deterministic (mean-action) episodes, one per seed.
  Evaluation evaluate(std::span<const double> policy, std::span<const std::uint64_t> seeds,
                      const BaseReward& reward, explore::VisitCountArchive& explorer,
                      bool bonus_enabled);

  /// Per channel: clone theta, run n1 rollout+PPO cycles on that channel
  /// alone, take the parameter difference and normalize it.
  JacobianEstimate compute_jacobian(std::span<const double> theta, const BaseReward& reward,
                                    explore::VisitCountArchive& explorer, bool bonus_enabled,
                                    std::span<const std::uint64_t> eval_seeds);

  /// n2 rollout+PPO cycles on sum_c weights[c] * channel_c.
  nn::ParamVector train_search_policy(std::span<const double> theta,
                                      std::span<const double> weights, const BaseReward& reward,
                                      explore::VisitCountArchive& explorer, bool bonus_enabled);

  /// Runs `cycles` rollout+PPO cycles from theta with a fresh critic.
  nn::ParamVector optimize(std::span<const double> theta, std::span<const double> weights,
                           int cycles, const BaseReward& reward,
                           explore::VisitCountArchive& explorer, bool bonus_enabled);

  /// Most recent buffer gathered by any rollout collection.
  const RolloutBuffer& last_rollout() const { return last_; }

  /// Divisor applied to each channel before blending.
  double reward_scale(int channel) const;
  void freeze_normalizers(bool frozen) { frozen_ = frozen; }

 private:
  RolloutBuffer collect(std::span<const double> policy, const BaseReward* reward,
                        explore::VisitCountArchive& explorer, bool bonus_enabled);
  void update_reward_stats(const RolloutBuffer& buffer);

  struct RunningMoments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
    void push(double x);
    double variance() const { return count > 1.0 ? m2 / count : 0.0; }
  };

  VppoConfig config_;
  nn::PolicySpec policy_spec_;
  nn::MlpSpec critic_spec_;
  Random rng_;
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<std::array<double, kChannels>> discounted_;
  std::array<RunningMoments, kChannels> return_stats_;
  bool frozen_ = false;
  RolloutBuffer last_;
};

}  // namespace wqdil::vppo

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wqdil/adam.hpp"
#include "wqdil/environment.hpp"
#include "wqdil/mlp.hpp"
#include "wqdil/random.hpp"

namespace wqdil::reward {

enum class RewardKind { kGail, kWaeGail, kWaeWgail, kMcWaeWgail };

std::string_view to_string(RewardKind kind);
/// Accepts "GAIL", "WAE-GAIL", "WAE-WGAIL", "mCWAE-WGAIL" (case-insensitive).
RewardKind parse_reward_kind(std::string_view name);

struct RewardVariant {
  RewardKind kind = RewardKind::kMcWaeWgail;
  bool bonus_enabled = true;

  /// GAIL conditions its discriminator on delta(s); so does mCWAE-WGAIL.
  bool measure_conditioned() const {
    return kind == RewardKind::kGail || kind == RewardKind::kMcWaeWgail;
  }
  bool wasserstein() const {
    return kind == RewardKind::kWaeWgail || kind == RewardKind::kMcWaeWgail;
  }
  bool autoencoder() const { return kind != RewardKind::kGail; }

  /// e.g. "mCWAE-WGAIL-Bonus".
  std::string name() const;
};

struct RewardModelConfig {
  std::vector<int> hidden{64, 64};
  int latent_dim = 8;
  double lambda = 1.0;
  double learning_rate = 3e-4;
  int n_critic = 5;
  /// Zero-centered input-gradient penalty for logistic discriminators.
  double gp_coef = 10.0;
  /// (|grad| - 1)^2 penalty for Wasserstein critics.
  double wgan_gp_coef = 50.0;
  int batch_size = 256;
  int epochs = 1;
};

struct UpdateLosses {
  /// GAIL: discriminator cross-entropy. WAE-GAIL: negated latent
  /// discriminator objective. Wasserstein: critic objective
  /// (lambda/n) sum D(z_e) - D(z_pi), averaged over critic steps.
  double adversary = 0.0;
  double gradient_penalty = 0.0;
  /// Mean squared reconstruction error per sample, expert plus policy.
  double reconstruction = 0.0;
  /// Full encoder/decoder loss.
  double autoencoder = 0.0;
};

/// Adversarial reward model in one of four variants.
///
/// Inputs are rows x = (s, a) or (s, a, delta) depending on measure
/// conditioning. GAIL owns a single discriminator over x; the WAE variants
/// own a deterministic encoder x -> z, a decoder z -> x and a latent
/// discriminator or critic z -> scalar.
class RewardModel {
 public:
  RewardModel(RewardVariant variant, int state_dim, int action_dim, RewardModelConfig config,
              std::uint64_t seed);

  const RewardVariant& variant() const { return variant_; }
  const RewardModelConfig& config() const { return config_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int input_dim() const { return input_dim_; }

  /// Writes the model input for one transition into `out` (size input_dim()).
  void features(std::span<const double> state, std::span<const double> action,
                const Measure& delta, std::span<double> out) const;

  double base_reward(std::span<const double> state, std::span<const double> action,
                     const Measure& delta) const;
  /// Rewards for a batch of model inputs.
  std::vector<double> base_rewards(const nn::Matrix& x) const;

  /// One adversarial update on matched batches, dispatched by variant.
  UpdateLosses update(const nn::Matrix& expert, const nn::Matrix& policy);

  UpdateLosses update_gail(const nn::Matrix& expert, const nn::Matrix& policy);
  UpdateLosses update_wae_gail(const nn::Matrix& expert, const nn::Matrix& policy);
  UpdateLosses update_wae_wgail(const nn::Matrix& expert, const nn::Matrix& policy);
  /// Requires a measure-conditioned Wasserstein model.
  UpdateLosses update_mcwae_wgail(const nn::Matrix& expert, const nn::Matrix& policy);

  /// `config().epochs` passes over `policy` in shuffled minibatches, each
  /// paired with an equal-size expert batch drawn with replacement.
  UpdateLosses train_epochs(const nn::Matrix& expert_pool, const nn::Matrix& policy);

  /// Latent code of each row (WAE variants only).
  nn::Matrix encode(const nn::Matrix& x) const;
  /// Raw adversary output: discriminator logit or critic score.
  std::vector<double> adversary_scores(const nn::Matrix& inputs) const;

  /// Critic/discriminator update on given latent batches, bypassing the
  /// encoder. Used to probe the latent adversary in isolation.
  UpdateLosses update_adversary_on_latents(const nn::Matrix& z_expert, const nn::Matrix& z_policy);

  const nn::MlpSpec& encoder_spec() const { return encoder_spec_; }
  const nn::MlpSpec& decoder_spec() const { return decoder_spec_; }
  const nn::MlpSpec& adversary_spec() const { return adversary_spec_; }
  nn::ParamVector& encoder_params() { return encoder_; }
  nn::ParamVector& decoder_params() { return decoder_; }
  nn::ParamVector& adversary_params() { return adversary_; }
  const nn::ParamVector& encoder_params() const { return encoder_; }
  const nn::ParamVector& decoder_params() const { return decoder_; }
  const nn::ParamVector& adversary_params() const { return adversary_; }

  /// Mean |grad_z D| over interpolates of the two latent batches.
  double mean_critic_grad_norm(const nn::Matrix& z_a, const nn::Matrix& z_b);

  bool finite() const;

 private:
  void check_batches(const nn::Matrix& expert, const nn::Matrix& policy) const;
  nn::Matrix interpolate(const nn::Matrix& a, const nn::Matrix& b);
  /// Adds the penalty's parameter gradient to `grad`; returns the penalty.
  double add_gradient_penalty(const nn::Matrix& points, bool one_centered, double coef,
                              std::span<double> grad);
  UpdateLosses wasserstein_update(const nn::Matrix& expert, const nn::Matrix& policy);
  double critic_step(const nn::Matrix& z_e, const nn::Matrix& z_p, double* penalty);
  double logistic_latent_step(const nn::Matrix& z_prior, const nn::Matrix& z_e,
                              const nn::Matrix& z_p, double* penalty);

  RewardVariant variant_;
  RewardModelConfig config_;
  int state_dim_;
  int action_dim_;
  int input_dim_;
  Random rng_;

  nn::MlpSpec encoder_spec_, decoder_spec_, adversary_spec_;
  nn::ParamVector encoder_, decoder_, adversary_;
  nn::Adam encoder_opt_, decoder_opt_, adversary_opt_;
};

}  // namespace wqdil::reward

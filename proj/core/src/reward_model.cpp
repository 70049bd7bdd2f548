#include "wqdil/reward_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wqdil::reward {

namespace {

constexpr double kProbClamp = 1e-6;

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

nn::MlpSpec make_spec(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  return nn::MlpSpec(std::move(widths));
}

nn::ParamVector init_or_empty(const nn::MlpSpec& spec, Random& rng) {
  if (spec.widths().empty()) return {};
  return nn::init_params(spec, rng);
}

nn::Matrix stack(const nn::Matrix& a, const nn::Matrix& b) {
  nn::Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

bool all_finite(const nn::ParamVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::kGail: return "GAIL";
    case RewardKind::kWaeGail: return "WAE-GAIL";
    case RewardKind::kWaeWgail: return "WAE-WGAIL";
    case RewardKind::kMcWaeWgail: return "mCWAE-WGAIL";
  }
  return "?";
}

RewardKind parse_reward_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gail") return RewardKind::kGail;
  if (lower == "wae-gail") return RewardKind::kWaeGail;
  if (lower == "wae-wgail") return RewardKind::kWaeWgail;
  if (lower == "mcwae-wgail") return RewardKind::kMcWaeWgail;
  throw std::invalid_argument("unknown reward variant '" + std::string(name) + "'");
}

std::string RewardVariant::name() const {
  std::string n(to_string(kind));
  if (bonus_enabled) n += "-Bonus";
  return n;
}

RewardModel::RewardModel(RewardVariant variant, int state_dim, int action_dim,
                         RewardModelConfig config, std::uint64_t seed)
    : variant_(variant),
      config_(std::move(config)),
      state_dim_(state_dim),
      action_dim_(action_dim),
      input_dim_(state_dim + action_dim + (variant.measure_conditioned() ? kMeasureDim : 0)),
      rng_(seed),
      encoder_spec_(variant.autoencoder() ? make_spec(input_dim_, config_.hidden, config_.latent_dim)
                                          : nn::MlpSpec()),
      decoder_spec_(variant.autoencoder() ? make_spec(config_.latent_dim, config_.hidden, input_dim_)
                                          : nn::MlpSpec()),
      adversary_spec_(make_spec(variant.autoencoder() ? config_.latent_dim : input_dim_,
                                config_.hidden, 1)),
      encoder_(init_or_empty(encoder_spec_, rng_)),
      decoder_(init_or_empty(decoder_spec_, rng_)),
      adversary_(init_or_empty(adversary_spec_, rng_)),
      encoder_opt_(encoder_.size(), config_.learning_rate),
      decoder_opt_(decoder_.size(), config_.learning_rate),
      adversary_opt_(adversary_.size(), config_.learning_rate) {
  if (state_dim <= 0 || action_dim <= 0) {
    throw std::invalid_argument("RewardModel: state and action dims must be positive");
  }
  if (!(config_.lambda > 0.0)) throw std::invalid_argument("RewardModel: lambda must be > 0");
  if (config_.latent_dim <= 0 || config_.n_critic <= 0 || config_.batch_size <= 0) {
    throw std::invalid_argument("RewardModel: latent_dim, n_critic and batch_size must be positive");
  }
}

void RewardModel::features(std::span<const double> state, std::span<const double> action,
                           const Measure& delta, std::span<double> out) const {
  if (state.size() != static_cast<std::size_t>(state_dim_) ||
      action.size() != static_cast<std::size_t>(action_dim_) ||
      out.size() != static_cast<std::size_t>(input_dim_)) {
    throw std::invalid_argument("RewardModel::features: dimension mismatch");
  }
  auto it = std::copy(state.begin(), state.end(), out.begin());
  it = std::copy(action.begin(), action.end(), it);
  if (variant_.measure_conditioned()) std::copy(delta.begin(), delta.end(), it);
}

double RewardModel::base_reward(std::span<const double> state, std::span<const double> action,
                                const Measure& delta) const {
  std::vector<double> x(input_dim_);
  features(state, action, delta, x);
  return base_rewards(nn::as_row(x))[0];
}

nn::Matrix RewardModel::encode(const nn::Matrix& x) const {
  if (!variant_.autoencoder()) throw std::logic_error("RewardModel::encode: GAIL has no encoder");
  return nn::forward(encoder_spec_, encoder_, x);
}

std::vector<double> RewardModel::adversary_scores(const nn::Matrix& inputs) const {
  const nn::Matrix out = nn::forward(adversary_spec_, adversary_, inputs);
  return {out.data(), out.data() + out.size()};
}

std::vector<double> RewardModel::base_rewards(const nn::Matrix& x) const {
  if (x.cols() != input_dim_) {
    throw std::invalid_argument("RewardModel::base_rewards: input width mismatch");
  }
  std::vector<double> scores = adversary_scores(variant_.autoencoder() ? encode(x) : x);
  if (!variant_.wasserstein()) {
    for (double& s : scores) {
      const double d = std::clamp(sigmoid(s), kProbClamp, 1.0 - kProbClamp);
      s = -std::log(1.0 - d);
    }
  }
  return scores;
}

void RewardModel::check_batches(const nn::Matrix& expert, const nn::Matrix& policy) const {
  if (expert.rows() != policy.rows() || expert.rows() == 0) {
    throw std::invalid_argument("RewardModel: expert and policy batches must be equal and nonempty");
  }
  if (expert.cols() != input_dim_ || policy.cols() != input_dim_) {
    throw std::invalid_argument("RewardModel: batch width does not match model input");
  }
}

nn::Matrix RewardModel::interpolate(const nn::Matrix& a, const nn::Matrix& b) {
  nn::Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double eps = rng_.uniform();
    out.row(r) = eps * a.row(r) + (1.0 - eps) * b.row(r);
  }
  return out;
}

double RewardModel::add_gradient_penalty(const nn::Matrix& points, bool one_centered, double coef,
                                         std::span<double> grad) {
  if (coef == 0.0) return 0.0;
  const auto n = static_cast<double>(points.rows());
  nn::Tape tape;
  nn::forward(adversary_spec_, adversary_, points, tape);
  const nn::Matrix ones = nn::Matrix::Ones(points.rows(), 1);
  std::vector<double> scratch(adversary_.size(), 0.0);
  nn::Matrix input_grad;
  nn::backward(adversary_spec_, adversary_, tape, ones, scratch, &input_grad);

  double penalty = 0.0;
  nn::Matrix direction(points.rows(), points.cols());
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const double norm = input_grad.row(r).norm();
    if (one_centered) {
      penalty += (norm - 1.0) * (norm - 1.0);
      const double scale = norm > 0.0 ? 2.0 * coef / n * (norm - 1.0) / norm : 0.0;
      direction.row(r) = scale * input_grad.row(r);
    } else {
      penalty += norm * norm;
      direction.row(r) = (2.0 * coef / n) * input_grad.row(r);
    }
  }
  nn::input_jvp_backward(adversary_spec_, adversary_, points, direction, ones, grad);
  return coef * penalty / n;
}

UpdateLosses RewardModel::update(const nn::Matrix& expert, const nn::Matrix& policy) {
  switch (variant_.kind) {
    case RewardKind::kGail: return update_gail(expert, policy);
    case RewardKind::kWaeGail: return update_wae_gail(expert, policy);
    case RewardKind::kWaeWgail: return update_wae_wgail(expert, policy);
    case RewardKind::kMcWaeWgail: return update_mcwae_wgail(expert, policy);
  }
  throw std::logic_error("RewardModel::update: unknown variant");
}

UpdateLosses RewardModel::update_gail(const nn::Matrix& expert, const nn::Matrix& policy) {
  if (variant_.autoencoder()) throw std::logic_error("update_gail: model is not a GAIL model");
  check_batches(expert, policy);
  const auto n = static_cast<double>(expert.rows());
  const nn::Matrix x = stack(expert, policy);
  nn::Tape tape;
  nn::forward(adversary_spec_, adversary_, x, tape);

  // Expert rows labelled 1, policy rows 0.
  UpdateLosses losses;
  nn::Matrix upstream(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double logit = tape.output()(r, 0);
    if (r < expert.rows()) {
      losses.adversary -= log_sigmoid(logit) / n;
      upstream(r, 0) = (sigmoid(logit) - 1.0) / n;
    } else {
      losses.adversary -= log_sigmoid(-logit) / n;
      upstream(r, 0) = sigmoid(logit) / n;
    }
  }
  std::vector<double> grad(adversary_.size(), 0.0);
  nn::backward(adversary_spec_, adversary_, tape, upstream, grad);
  losses.gradient_penalty = add_gradient_penalty(interpolate(expert, policy), false, config_.gp_coef, grad);
  adversary_opt_.step(adversary_, grad);
  return losses;
}

double RewardModel::logistic_latent_step(const nn::Matrix& z_prior, const nn::Matrix& z_e,
                                         const nn::Matrix& z_p, double* penalty) {
  const auto n = static_cast<double>(z_e.rows());
  const double lambda = config_.lambda;
  nn::Matrix z(z_prior.rows() + z_e.rows() + z_p.rows(), z_e.cols());
  z << z_prior, z_e, z_p;
  nn::Tape tape;
  nn::forward(adversary_spec_, adversary_, z, tape);
  double objective = 0.0;
  nn::Matrix upstream(z.rows(), 1);
  const Eigen::Index real_rows = z_prior.rows() + z_e.rows();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double logit = tape.output()(r, 0);
    if (r < real_rows) {
      objective += lambda / n * log_sigmoid(logit);
      upstream(r, 0) = lambda / n * (sigmoid(logit) - 1.0);
    } else {
      objective += lambda / n * log_sigmoid(-logit);
      upstream(r, 0) = lambda / n * sigmoid(logit);
    }
  }
  std::vector<double> grad(adversary_.size(), 0.0);
  nn::backward(adversary_spec_, adversary_, tape, upstream, grad);
  *penalty = add_gradient_penalty(interpolate(z_e, z_p), false, config_.gp_coef, grad);
  adversary_opt_.step(adversary_, grad);
  return -objective;
}

UpdateLosses RewardModel::update_wae_gail(const nn::Matrix& expert, const nn::Matrix& policy) {
  if (variant_.kind != RewardKind::kWaeGail) {
    throw std::logic_error("update_wae_gail: model is not a WAE-GAIL model");
  }
  check_batches(expert, policy);
  const auto n = static_cast<double>(expert.rows());
  const double lambda = config_.lambda;
  UpdateLosses losses;

  // (i) prior samples and encodings.
  nn::Matrix z_prior(expert.rows(), config_.latent_dim);
  for (Eigen::Index i = 0; i < z_prior.size(); ++i) z_prior.data()[i] = rng_.normal();
  const nn::Matrix x = stack(expert, policy);
  nn::Tape enc_tape;
  nn::forward(encoder_spec_, encoder_, x, enc_tape);
  const nn::Matrix& z = enc_tape.output();

  // (ii) latent discriminator ascent.
  losses.adversary = logistic_latent_step(z_prior, z.topRows(expert.rows()),
                                          z.bottomRows(policy.rows()), &losses.gradient_penalty);

  // (iii) encoder/decoder descent: reconstruction - lambda (log D(z_e) + log D(z_pi)).
  nn::Tape dec_tape;
  nn::forward(decoder_spec_, decoder_, z, dec_tape);
  const nn::Matrix diff = dec_tape.output() - x;
  losses.reconstruction = diff.squaredNorm() / n;
  std::vector<double> dec_grad(decoder_.size(), 0.0);
  nn::Matrix dz;
  nn::backward(decoder_spec_, decoder_, dec_tape, (2.0 / n) * diff, dec_grad, &dz);

  nn::Tape adv_tape;
  nn::forward(adversary_spec_, adversary_, z, adv_tape);
  nn::Matrix adv_up(z.rows(), 1);
  double adv_term = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double logit = adv_tape.output()(r, 0);
    adv_term -= lambda / n * log_sigmoid(logit);
    adv_up(r, 0) = lambda / n * (sigmoid(logit) - 1.0);
  }
  std::vector<double> unused(adversary_.size(), 0.0);
  nn::Matrix dz_adv;
  nn::backward(adversary_spec_, adversary_, adv_tape, adv_up, unused, &dz_adv);
  dz += dz_adv;
  losses.autoencoder = losses.reconstruction + adv_term;

  std::vector<double> enc_grad(encoder_.size(), 0.0);
  nn::backward(encoder_spec_, encoder_, enc_tape, dz, enc_grad);
  encoder_opt_.step(encoder_, enc_grad);
  decoder_opt_.step(decoder_, dec_grad);
  return losses;
}

double RewardModel::critic_step(const nn::Matrix& z_e, const nn::Matrix& z_p, double* penalty) {
  const auto n = static_cast<double>(z_e.rows());
  const double lambda = config_.lambda;
  const nn::Matrix z = stack(z_e, z_p);
  nn::Tape tape;
  nn::forward(adversary_spec_, adversary_, z, tape);
  double objective = 0.0;
  nn::Matrix upstream(z.rows(), 1);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double sign = r < z_e.rows() ? 1.0 : -1.0;
    objective += sign * lambda / n * tape.output()(r, 0);
    upstream(r, 0) = -sign * lambda / n;  // descend the negated objective
  }
  std::vector<double> grad(adversary_.size(), 0.0);
  nn::backward(adversary_spec_, adversary_, tape, upstream, grad);
  *penalty = add_gradient_penalty(interpolate(z_e, z_p), true, config_.wgan_gp_coef, grad);
  adversary_opt_.step(adversary_, grad);
  return objective;
}

UpdateLosses RewardModel::wasserstein_update(const nn::Matrix& expert, const nn::Matrix& policy) {
  check_batches(expert, policy);
  const auto n = static_cast<double>(expert.rows());
  const double lambda = config_.lambda;
  UpdateLosses losses;

  const nn::Matrix x = stack(expert, policy);
  nn::Tape enc_tape;
  nn::forward(encoder_spec_, encoder_, x, enc_tape);
  const nn::Matrix& z = enc_tape.output();
  const nn::Matrix z_e = z.topRows(expert.rows());
  const nn::Matrix z_p = z.bottomRows(policy.rows());

  for (int k = 0; k < config_.n_critic; ++k) {
    double penalty = 0.0;
    losses.adversary += critic_step(z_e, z_p, &penalty) / config_.n_critic;
    losses.gradient_penalty += penalty / config_.n_critic;
  }

  // Encoder/decoder: reconstruction + lambda * (mean D(z_e) - mean D(z_pi)).
  nn::Tape dec_tape;
  nn::forward(decoder_spec_, decoder_, z, dec_tape);
  const nn::Matrix diff = dec_tape.output() - x;
  losses.reconstruction = diff.squaredNorm() / n;
  std::vector<double> dec_grad(decoder_.size(), 0.0);
  nn::Matrix dz;
  nn::backward(decoder_spec_, decoder_, dec_tape, (2.0 / n) * diff, dec_grad, &dz);

  nn::Tape adv_tape;
  nn::forward(adversary_spec_, adversary_, z, adv_tape);
  nn::Matrix adv_up(z.rows(), 1);
  double gap = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double sign = r < expert.rows() ? 1.0 : -1.0;
    gap += sign * lambda / n * adv_tape.output()(r, 0);
    adv_up(r, 0) = sign * lambda / n;
  }
  std::vector<double> unused(adversary_.size(), 0.0);
  nn::Matrix dz_adv;
  nn::backward(adversary_spec_, adversary_, adv_tape, adv_up, unused, &dz_adv);
  dz += dz_adv;
  losses.autoencoder = losses.reconstruction + gap;

  std::vector<double> enc_grad(encoder_.size(), 0.0);
  nn::backward(encoder_spec_, encoder_, enc_tape, dz, enc_grad);
  encoder_opt_.step(encoder_, enc_grad);
  decoder_opt_.step(decoder_, dec_grad);
  return losses;
}

UpdateLosses RewardModel::update_wae_wgail(const nn::Matrix& expert, const nn::Matrix& policy) {
  if (!variant_.wasserstein()) {
    throw std::logic_error("update_wae_wgail: model has no Wasserstein critic");
  }
  return wasserstein_update(expert, policy);
}

UpdateLosses RewardModel::update_mcwae_wgail(const nn::Matrix& expert, const nn::Matrix& policy) {
  if (variant_.kind != RewardKind::kMcWaeWgail) {
    throw std::invalid_argument("update_mcwae_wgail: model inputs carry no single-step measures");
  }
  return wasserstein_update(expert, policy);
}

UpdateLosses RewardModel::update_adversary_on_latents(const nn::Matrix& z_expert,
                                                      const nn::Matrix& z_policy) {
  if (z_expert.rows() != z_policy.rows() || z_expert.cols() != adversary_spec_.input_width() ||
      z_policy.cols() != adversary_spec_.input_width()) {
    throw std::invalid_argument("update_adversary_on_latents: shape mismatch");
  }
  UpdateLosses losses;
  if (variant_.wasserstein()) {
    losses.adversary = critic_step(z_expert, z_policy, &losses.gradient_penalty);
  } else {
    nn::Matrix prior(0, z_expert.cols());
    losses.adversary = logistic_latent_step(prior, z_expert, z_policy, &losses.gradient_penalty);
  }
  return losses;
}

UpdateLosses RewardModel::train_epochs(const nn::Matrix& expert_pool, const nn::Matrix& policy) {
  if (expert_pool.rows() == 0 || policy.rows() == 0) {
    throw std::invalid_argument("RewardModel::train_epochs: empty data");
  }
  UpdateLosses mean;
  int updates = 0;
  std::vector<Eigen::Index> order(policy.rows());
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_.engine());
    for (Eigen::Index start = 0; start < policy.rows(); start += config_.batch_size) {
      const Eigen::Index rows = std::min<Eigen::Index>(config_.batch_size, policy.rows() - start);
      nn::Matrix p(rows, policy.cols()), e(rows, expert_pool.cols());
      for (Eigen::Index r = 0; r < rows; ++r) {
        p.row(r) = policy.row(order[start + r]);
        e.row(r) = expert_pool.row(static_cast<Eigen::Index>(rng_.index(expert_pool.rows())));
      }
      const UpdateLosses l = update(e, p);
      mean.adversary += l.adversary;
      mean.gradient_penalty += l.gradient_penalty;
      mean.reconstruction += l.reconstruction;
      mean.autoencoder += l.autoencoder;
      ++updates;
    }
  }
  mean.adversary /= updates;
  mean.gradient_penalty /= updates;
  mean.reconstruction /= updates;
  mean.autoencoder /= updates;
  return mean;
}

double RewardModel::mean_critic_grad_norm(const nn::Matrix& z_a, const nn::Matrix& z_b) {
  const nn::Matrix points = interpolate(z_a, z_b);
  nn::Tape tape;
  nn::forward(adversary_spec_, adversary_, points, tape);
  std::vector<double> scratch(adversary_.size(), 0.0);
  nn::Matrix input_grad;
  nn::backward(adversary_spec_, adversary_, tape, nn::Matrix::Ones(points.rows(), 1), scratch,
               &input_grad);
  return input_grad.rowwise().norm().mean();
}

bool RewardModel::finite() const {
  return all_finite(encoder_) && all_finite(decoder_) && all_finite(adversary_);
}

}  // namespace wqdil::reward

#include "wqdil/vppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wqdil::vppo {

namespace {

Measure mean_measure(const std::vector<Measure>& deltas) {
  Measure m{0.0, 0.0};
  if (deltas.empty()) return m;
  for (const auto& d : deltas) {
    m[0] += d[0];
    m[1] += d[1];
  }
  const auto n = static_cast<double>(deltas.size());
  return {m[0] / n, m[1] / n};
}

}  // namespace

void TrueReward::evaluate(const nn::Matrix& /*observations*/, const nn::Matrix& /*actions*/,
                          std::span<const Measure> /*deltas*/,
                          std::span<const double> true_rewards, std::span<double> out) const {
  std::copy(true_rewards.begin(), true_rewards.end(), out.begin());
}

nn::Matrix LearnedReward::features(const nn::Matrix& observations, const nn::Matrix& actions,
                                   std::span<const Measure> deltas) const {
  nn::Matrix x(observations.rows(), model_->input_dim());
  std::vector<double> action(actions.cols());
  for (Eigen::Index r = 0; r < observations.rows(); ++r) {
    for (Eigen::Index j = 0; j < actions.cols(); ++j) {
      action[j] = std::clamp(actions(r, j), -1.0, 1.0);
    }
    model_->features(std::span<const double>(observations.row(r).data(), observations.cols()),
                     action, deltas[r], std::span<double>(x.row(r).data(), x.cols()));
  }
  return x;
}

void LearnedReward::evaluate(const nn::Matrix& observations, const nn::Matrix& actions,
                             std::span<const Measure> deltas,
                             std::span<const double> /*true_rewards*/,
                             std::span<double> out) const {
  const auto r = model_->base_rewards(features(observations, actions, deltas));
  std::copy(r.begin(), r.end(), out.begin());
}

Advantages gae_advantages(std::span<const double> rewards, std::span<const double> values,
                          std::span<const std::uint8_t> dones,
                          std::span<const double> last_values, int n_envs, double gamma,
                          double lambda) {
  if (n_envs <= 0 || rewards.size() % n_envs != 0 || values.size() != rewards.size() ||
      dones.size() != rewards.size() || last_values.size() != static_cast<std::size_t>(n_envs)) {
    throw std::invalid_argument("gae_advantages: inconsistent buffer shapes");
  }
  const std::size_t length = rewards.size() / n_envs;
  Advantages out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  for (int e = 0; e < n_envs; ++e) {
    double running = 0.0;
    double next_value = last_values[e];
    for (std::size_t t = length; t-- > 0;) {
      const std::size_t i = t * n_envs + e;
      const double live = dones[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      running = delta + gamma * lambda * live * running;
      out.advantages[i] = running;
      out.returns[i] = running + values[i];
      next_value = values[i];
    }
  }
  return out;
}

Advantages gae_advantages(const RolloutBuffer& buffer, int channel, double gamma, double lambda) {
  if (channel < 0 || channel >= kChannels) throw std::out_of_range("gae_advantages: bad channel");
  if (buffer.values.size() != buffer.size()) {
    throw std::invalid_argument("gae_advantages: buffer has no values");
  }
  std::vector<double> r(buffer.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = buffer.rewards(static_cast<Eigen::Index>(i), channel);
  return gae_advantages(r, buffer.values, buffer.dones, buffer.last_values, buffer.n_envs, gamma,
                        lambda);
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  for (double& a : advantages) a = (a - mean) / (std + 1e-8);
}

void Vppo::RunningMoments::push(double x) {
  count += 1.0;
  const double d = x - mean;
  mean += d / count;
  m2 += d * (x - mean);
}

Vppo::Vppo(VppoConfig config, const Environment& prototype, std::uint64_t seed)
    : config_(std::move(config)),
      policy_spec_(nn::make_policy_spec(prototype.observation_dim(), prototype.action_dim(),
                                        config_.policy_hidden, config_.learn_log_std)),
      critic_spec_([&] {
        std::vector<int> w{prototype.observation_dim()};
        w.insert(w.end(), config_.critic_hidden.begin(), config_.critic_hidden.end());
        w.push_back(1);
        return nn::MlpSpec(std::move(w));
      }()),
      rng_(seed) {
  if (config_.n_envs <= 0 || config_.rollout_length <= 0 || config_.minibatches <= 0 ||
      config_.epochs < 0 || config_.n1 < 0 || config_.n2 < 0) {
    throw std::invalid_argument("VppoConfig: sizes must be positive");
  }
  for (int e = 0; e < config_.n_envs; ++e) {
    envs_.push_back(prototype.clone());
    envs_.back()->reset(rng_.next_u64());
  }
  discounted_.assign(config_.n_envs, {0.0, 0.0, 0.0});
}

nn::ParamVector Vppo::init_policy(Random& rng) const {
  return nn::init_policy(policy_spec_, rng, config_.initial_log_std);
}

nn::ParamVector Vppo::init_critic(Random& rng) const { return nn::init_params(critic_spec_, rng); }

double Vppo::reward_scale(int channel) const {
  if (!config_.normalize_rewards) return 1.0;
  const double var = return_stats_[channel].variance();
  return var > 0.0 ? std::sqrt(var + 1e-8) : 1.0;
}

RolloutBuffer Vppo::collect_rollout(std::span<const double> policy, const BaseReward& reward,
                                    explore::VisitCountArchive& explorer, bool bonus_enabled) {
  return collect(policy, &reward, explorer, bonus_enabled);
}

RolloutBuffer Vppo::collect(std::span<const double> policy, const BaseReward* reward,
                            explore::VisitCountArchive& explorer, bool bonus_enabled) {
  const int n_envs = config_.n_envs;
  const int length = config_.rollout_length;
  const int obs_dim = policy_spec_.observation_dim();
  const int act_dim = policy_spec_.action_dim();
  const std::size_t rows = static_cast<std::size_t>(n_envs) * length;

  RolloutBuffer buf;
  buf.n_envs = n_envs;
  buf.length = length;
  buf.observations.resize(rows, obs_dim);
  buf.actions.resize(rows, act_dim);
  buf.log_probs.resize(rows);
  buf.dones.resize(rows);
  buf.rewards = nn::Matrix::Zero(rows, kChannels);
  buf.base_rewards.assign(rows, 0.0);
  buf.bonuses.assign(rows, 0.0);
  buf.true_rewards.resize(rows);
  buf.deltas.resize(rows);
  buf.has_objective = reward != nullptr;

  nn::Matrix obs(n_envs, obs_dim);
  std::vector<double> log_probs;
  std::vector<double> action(act_dim);
  for (int t = 0; t < length; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      envs_[e]->observe(std::span<double>(obs.row(e).data(), obs_dim));
    }
    const nn::Matrix actions = nn::sample_actions(policy_spec_, policy, obs, rng_, log_probs);
    for (int e = 0; e < n_envs; ++e) {
      const std::size_t i = static_cast<std::size_t>(t) * n_envs + e;
      const auto ii = static_cast<Eigen::Index>(i);
      buf.observations.row(ii) = obs.row(e);
      buf.actions.row(ii) = actions.row(e);
      buf.log_probs[i] = log_probs[e];
      for (int j = 0; j < act_dim; ++j) action[j] = actions(e, j);
      const StepResult step = envs_[e]->step(action);
      buf.true_rewards[i] = step.true_reward;
      buf.deltas[i] = step.delta;
      buf.dones[i] = step.done ? 1 : 0;
      if (step.done) envs_[e]->reset(rng_.next_u64());
    }
  }
  buf.last_observations.resize(n_envs, obs_dim);
  for (int e = 0; e < n_envs; ++e) {
    envs_[e]->observe(std::span<double>(buf.last_observations.row(e).data(), obs_dim));
  }

  if (reward != nullptr) {
    reward->evaluate(buf.observations, buf.actions, buf.deltas, buf.true_rewards, buf.base_rewards);
    for (std::size_t i = 0; i < rows; ++i) {
      if (bonus_enabled) buf.bonuses[i] = explorer.bonus(buf.deltas[i]);
      buf.rewards(static_cast<Eigen::Index>(i), 0) = buf.base_rewards[i] + buf.bonuses[i];
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (int d = 0; d < kMeasureDim; ++d) {
      buf.rewards(static_cast<Eigen::Index>(i), 1 + d) = buf.deltas[i][d];
    }
  }
  explorer.visit_all(buf.deltas);
  update_reward_stats(buf);
  last_ = buf;
  return buf;
}

void Vppo::update_reward_stats(const RolloutBuffer& buffer) {
  if (frozen_ || !config_.normalize_rewards) return;
  for (int t = 0; t < buffer.length; ++t) {
    for (int e = 0; e < buffer.n_envs; ++e) {
      const auto i = static_cast<Eigen::Index>(t) * buffer.n_envs + e;
      for (int c = 0; c < kChannels; ++c) {
        if (c == 0 && !buffer.has_objective) continue;
        discounted_[e][c] = discounted_[e][c] * config_.gamma + buffer.rewards(i, c);
        return_stats_[c].push(discounted_[e][c]);
      }
      if (buffer.dones[i]) discounted_[e].fill(0.0);
    }
  }
}

void Vppo::ppo_update(nn::ParamVector& policy, nn::ParamVector& critic,
                      const RolloutBuffer& buffer, std::vector<double> advantages,
                      const std::vector<double>& returns, nn::Adam& policy_opt,
                      nn::Adam& critic_opt) {
  const std::size_t rows = buffer.size();
  if (advantages.size() != rows || returns.size() != rows) {
    throw std::invalid_argument("ppo_update: advantage/return size mismatch");
  }
  normalize_advantages(advantages);
  std::vector<std::size_t> order(rows);
  const std::size_t mb_size = std::max<std::size_t>(1, rows / config_.minibatches);
  const int obs_dim = policy_spec_.observation_dim();
  const int act_dim = policy_spec_.action_dim();

  std::vector<double> policy_grad(policy.size()), critic_grad(critic.size());
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_.engine());
    for (std::size_t start = 0; start + mb_size <= rows; start += mb_size) {
      nn::Matrix obs(mb_size, obs_dim), act(mb_size, act_dim);
      for (std::size_t k = 0; k < mb_size; ++k) {
        obs.row(static_cast<Eigen::Index>(k)) = buffer.observations.row(static_cast<Eigen::Index>(order[start + k]));
        act.row(static_cast<Eigen::Index>(k)) = buffer.actions.row(static_cast<Eigen::Index>(order[start + k]));
      }
      const double m = static_cast<double>(mb_size);

      // Policy: minimize -mean(min(ratio * A, clip(ratio) * A)).
      nn::Tape tape;
      const auto logp = nn::log_prob(policy_spec_, policy, obs, act, tape);
      std::vector<double> weights(mb_size, 0.0);
      for (std::size_t k = 0; k < mb_size; ++k) {
        const std::size_t i = order[start + k];
        const double ratio = std::exp(logp[k] - buffer.log_probs[i]);
        const double adv = advantages[i];
        const bool clipped = (adv > 0.0 && ratio > 1.0 + config_.clip) ||
                             (adv < 0.0 && ratio < 1.0 - config_.clip);
        weights[k] = clipped ? 0.0 : -adv * ratio / m;
      }
      std::fill(policy_grad.begin(), policy_grad.end(), 0.0);
      nn::log_prob_backward(policy_spec_, policy, tape, act, weights, policy_grad);
      nn::clip_grad_norm(policy_grad, config_.max_grad_norm);
      policy_opt.step(policy, policy_grad);

      // Critic: mean 0.5 (V - R)^2.
      nn::Tape vtape;
      nn::forward(critic_spec_, critic, obs, vtape);
      nn::Matrix up(mb_size, 1);
      for (std::size_t k = 0; k < mb_size; ++k) {
        up(static_cast<Eigen::Index>(k), 0) =
            (vtape.output()(static_cast<Eigen::Index>(k), 0) - returns[order[start + k]]) / m;
      }
      std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
      nn::backward(critic_spec_, critic, vtape, up, critic_grad);
      nn::clip_grad_norm(critic_grad, config_.max_grad_norm);
      critic_opt.step(critic, critic_grad);
    }
  }
}

void Vppo::ppo_update(nn::ParamVector& policy, nn::ParamVector& critic, RolloutBuffer& buffer,
                      std::span<const double> channel_weights, nn::Adam& policy_opt,
                      nn::Adam& critic_opt) {
  if (channel_weights.size() != static_cast<std::size_t>(kChannels)) {
    throw std::invalid_argument("ppo_update: expected one weight per channel");
  }
  if (channel_weights[0] != 0.0 && !buffer.has_objective) {
    throw std::logic_error("ppo_update: objective channel was not collected");
  }
  const std::size_t rows = buffer.size();
  std::vector<double> blended(rows, 0.0);
  for (int c = 0; c < kChannels; ++c) {
    if (channel_weights[c] == 0.0) continue;
    const double w = channel_weights[c] / reward_scale(c);
    for (std::size_t i = 0; i < rows; ++i) blended[i] += w * buffer.rewards(static_cast<Eigen::Index>(i), c);
  }
  const nn::Matrix v = nn::forward(critic_spec_, critic, buffer.observations);
  buffer.values.assign(v.data(), v.data() + v.size());
  const nn::Matrix lv = nn::forward(critic_spec_, critic, buffer.last_observations);
  buffer.last_values.assign(lv.data(), lv.data() + lv.size());

  auto adv = gae_advantages(blended, buffer.values, buffer.dones, buffer.last_values,
                            buffer.n_envs, config_.gamma, config_.gae_lambda);
  ppo_update(policy, critic, buffer, std::move(adv.advantages), adv.returns, policy_opt,
             critic_opt);
}

Evaluation Vppo::evaluate(std::span<const double> policy, std::span<const std::uint64_t> seeds,
                          const BaseReward& reward, explore::VisitCountArchive& explorer,
                          bool bonus_enabled) {
  if (seeds.empty()) throw std::invalid_argument("evaluate: no episode seeds");
  const int n = static_cast<int>(seeds.size());
  const int obs_dim = policy_spec_.observation_dim();
  const int act_dim = policy_spec_.action_dim();
  std::vector<std::unique_ptr<Environment>> envs;
  for (int e = 0; e < n; ++e) {
    envs.push_back(envs_.front()->clone());
    envs.back()->reset(seeds[e]);
  }

  struct Step {
    int episode;
    double true_reward;
    Measure delta;
  };
  std::vector<Step> steps;
  std::vector<double> obs_rows, act_rows;
  nn::Matrix obs(n, obs_dim);
  std::vector<int> live(n);
  std::iota(live.begin(), live.end(), 0);
  std::vector<double> action(act_dim);
  while (!live.empty()) {
    obs.resize(static_cast<Eigen::Index>(live.size()), obs_dim);
    for (std::size_t k = 0; k < live.size(); ++k) {
      envs[live[k]]->observe(std::span<double>(obs.row(static_cast<Eigen::Index>(k)).data(), obs_dim));
    }
    const nn::Matrix means = nn::mean_actions(policy_spec_, policy, obs);
    std::vector<int> still_live;
    for (std::size_t k = 0; k < live.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      for (int j = 0; j < act_dim; ++j) action[j] = means(kk, j);
      const StepResult step = envs[live[k]]->step(action);
      steps.push_back({live[k], step.true_reward, step.delta});
      obs_rows.insert(obs_rows.end(), obs.row(kk).data(), obs.row(kk).data() + obs_dim);
      act_rows.insert(act_rows.end(), action.begin(), action.end());
      if (!step.done) still_live.push_back(live[k]);
    }
    live = std::move(still_live);
  }

  const auto rows = static_cast<Eigen::Index>(steps.size());
  const nn::Matrix all_obs = Eigen::Map<nn::Matrix>(obs_rows.data(), rows, obs_dim);
  const nn::Matrix all_act = Eigen::Map<nn::Matrix>(act_rows.data(), rows, act_dim);
  std::vector<Measure> deltas(steps.size());
  std::vector<double> true_rewards(steps.size()), base(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    deltas[i] = steps[i].delta;
    true_rewards[i] = steps[i].true_reward;
  }
  reward.evaluate(all_obs, all_act, deltas, true_rewards, base);

  Evaluation ev;
  ev.episode_learned.assign(n, 0.0);
  ev.episode_true.assign(n, 0.0);
  ev.step_rewards.assign(n, {});
  std::vector<std::vector<Measure>> episode_deltas(n);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int e = steps[i].episode;
    const double r = explore::combined_reward(explorer, base[i], deltas[i], bonus_enabled);
    ev.step_rewards[e].push_back(r);
    ev.episode_learned[e] += r;
    ev.episode_true[e] += true_rewards[i];
    episode_deltas[e].push_back(deltas[i]);
  }
  explorer.visit_all(deltas);

  for (int e = 0; e < n; ++e) {
    ev.episode_measures.push_back(mean_measure(episode_deltas[e]));
    ev.learned_return += ev.episode_learned[e] / n;
    ev.true_return += ev.episode_true[e] / n;
    ev.measure[0] += ev.episode_measures[e][0] / n;
    ev.measure[1] += ev.episode_measures[e][1] / n;
  }
  return ev;
}

nn::ParamVector Vppo::optimize(std::span<const double> theta, std::span<const double> weights,
                               int cycles, const BaseReward& reward,
                               explore::VisitCountArchive& explorer, bool bonus_enabled) {
  if (weights.size() != static_cast<std::size_t>(kChannels)) {
    throw std::invalid_argument("Vppo::optimize: expected one weight per channel");
  }
  nn::ParamVector policy(theta.begin(), theta.end());
  if (cycles <= 0) return policy;
  nn::ParamVector critic = init_critic(rng_);
  nn::Adam policy_opt(policy.size(), config_.learning_rate);
  nn::Adam critic_opt(critic.size(), config_.learning_rate);
  const bool need_objective = weights[0] != 0.0;
  for (int i = 0; i < cycles; ++i) {
    RolloutBuffer buf = collect(policy, need_objective ? &reward : nullptr, explorer, bonus_enabled);
    ppo_update(policy, critic, buf, weights, policy_opt, critic_opt);
  }
  return policy;
}

JacobianEstimate Vppo::compute_jacobian(std::span<const double> theta, const BaseReward& reward,
                                        explore::VisitCountArchive& explorer, bool bonus_enabled,
                                        std::span<const std::uint64_t> eval_seeds) {
  JacobianEstimate est;
  est.evaluation = evaluate(theta, eval_seeds, reward, explorer, bonus_enabled);
  est.f = est.evaluation.learned_return;
  est.m = est.evaluation.measure;
  for (int c = 0; c < kChannels; ++c) {
    std::array<double, kChannels> weights{};
    weights[c] = 1.0;
    const nn::ParamVector after = optimize(theta, weights, config_.n1, reward, explorer, bonus_enabled);
    nn::ParamVector g(theta.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = after[i] - theta[i];
      sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    est.zero_grad.push_back(norm == 0.0);
    if (norm > 0.0) {
      for (double& x : g) x /= norm;
    }
    est.grads.push_back(std::move(g));
  }
  return est;
}

nn::ParamVector Vppo::train_search_policy(std::span<const double> theta,
                                          std::span<const double> weights,
                                          const BaseReward& reward,
                                          explore::VisitCountArchive& explorer,
                                          bool bonus_enabled) {
  if (weights.size() != static_cast<std::size_t>(kChannels)) {
    throw std::invalid_argument("train_search_policy: expected one weight per channel");
  }
  return optimize(theta, weights, config_.n2, reward, explorer, bonus_enabled);
}

}  // namespace wqdil::vppo

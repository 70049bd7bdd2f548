#include "wqdil/qd_loop.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "wqdil/point_walker.hpp"

namespace wqdil::qd {

void QdConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("QdConfig: ") + what);
  };
  require(iterations >= 0, "iterations must be >= 0");
  require(branching >= 2, "branching must be >= 2");
  require(sigma_g > 0.0 && std::isfinite(sigma_g), "sigma_g must be positive");
  require(grid >= 1, "grid must be >= 1");
  require(explorer_resolution >= 1, "explorer_resolution must be >= 1");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
  require(horizon >= 1, "horizon must be >= 1");
  require(vppo.n1 >= 1 && vppo.n2 >= 1, "n1 and n2 must be >= 1");
}

nn::ParamVector branch(std::span<const double> theta, std::span<const nn::ParamVector> grads,
                       const Eigen::VectorXd& coeffs) {
  if (static_cast<std::size_t>(coeffs.size()) != grads.size()) {
    throw std::invalid_argument("branch: one coefficient per gradient required");
  }
  nn::ParamVector out(theta.begin(), theta.end());
  for (std::size_t j = 0; j < grads.size(); ++j) {
    if (grads[j].size() != out.size()) throw std::invalid_argument("branch: gradient size mismatch");
    const double c = coeffs[static_cast<Eigen::Index>(j)];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * grads[j][i];
  }
  return out;
}

RunResult run(const QdConfig& config, const ExpertData* expert,
              const IterationCallback& on_iteration) {
  config.validate();
  if (!config.true_reward && (expert == nullptr || expert->size() == 0)) {
    throw std::invalid_argument("qd::run: demonstrations required for a learned reward");
  }

  Random rng(config.seed);
  const env::PointWalkerEnv prototype(config.horizon);
  vppo::Vppo vppo(config.vppo, prototype, rng.next_u64());
  std::vector<std::uint64_t> eval_seeds(config.eval_episodes);
  for (auto& s : eval_seeds) s = rng.next_u64();

  std::unique_ptr<reward::RewardModel> model;
  std::unique_ptr<vppo::BaseReward> source;
  nn::Matrix expert_pool;
  if (config.true_reward) {
    source = std::make_unique<vppo::TrueReward>();
  } else {
    model = std::make_unique<reward::RewardModel>(config.variant, prototype.observation_dim(),
                                                  prototype.action_dim(), config.reward,
                                                  rng.next_u64());
    auto learned = std::make_unique<vppo::LearnedReward>(*model);
    expert_pool = learned->features(expert->observations, expert->actions, expert->deltas);
    source = std::move(learned);
  }
  const bool bonus = config.bonus_active();
  const int dim = vppo::kChannels;

  RunResult result{GridArchive(config.grid), {}, explore::VisitCountArchive(config.explorer_resolution),
                   vppo.policy_spec(), eval_seeds, std::nullopt};
  GridArchive& archive = result.archive;

  nn::ParamVector theta = vppo.init_policy(rng);
  CoeffDistribution dist(dim, config.sigma_g);

  for (int it = 0; it < config.iterations; ++it) {
    try {
      IterationLog row;
      row.iteration = it;

      const auto jac = vppo.compute_jacobian(theta, *source, result.explorer, bonus, eval_seeds);
      row.search_learned_return = jac.f;
      row.search_true_return = jac.evaluation.true_return;
      archive.insert({theta, jac.evaluation.true_return, jac.m, jac.f});

      const auto samples = sample_coefficients(dist, config.branching, rng);
      std::vector<double> ranking(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        nn::ParamVector child = branch(theta, jac.grads, samples[i].coeffs);
        const auto ev = vppo.evaluate(child, eval_seeds, *source, result.explorer, bonus);
        row.offspring_true_returns.push_back(ev.true_return);
        row.offspring_learned_returns.push_back(ev.learned_return);
        const auto ins = archive.insert({std::move(child), ev.true_return, ev.measure, ev.learned_return});
        ranking[i] = ins.raw_improvement;
        row.total_improvement += ins.improvement;
        if (ins.changed()) ++row.offspring_changed;
      }

      dist = adapt(dist, samples, ranking);
      std::array<double, vppo::kChannels> weights{};
      for (int c = 0; c < dim; ++c) weights[c] = dist.mean()[c];
      weights[0] = std::abs(weights[0]);
      theta = vppo.train_search_policy(theta, weights, *source, result.explorer, bonus);

      if (model) {
        const auto& buf = vppo.last_rollout();
        const auto policy_x =
            static_cast<const vppo::LearnedReward&>(*source).features(buf.observations, buf.actions,
                                                                      buf.deltas);
        row.losses = model->train_epochs(expert_pool, policy_x);
        if (!model->finite()) throw std::runtime_error("reward model diverged");
      }

      if (row.offspring_changed == 0) {
        row.restarted = true;
        dist = CoeffDistribution(dim, config.sigma_g);
        theta = archive.sample_elite(rng).params;
      }
      row.metrics = archive.metrics();
      row.coeff_mean = dist.mean();
      row.coeff_sigma = dist.sigma();
      result.log.push_back(row);
      if (on_iteration) on_iteration(result.log.back());
    } catch (const std::exception& e) {
      result.error = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
  }
  return result;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void write_metrics_header(std::ostream& os) {
  os << "iteration,qd_score,coverage,best,average,occupied,search_learned_return,"
        "search_true_return,offspring_changed,total_improvement,restarted,adversary_loss,"
        "gradient_penalty,reconstruction_loss,coeff_mu0,coeff_mu1,coeff_mu2,coeff_sigma\n";
}

void write_metrics_row(std::ostream& os, const IterationLog& row) {
  os << row.iteration << ',';
  put(os, row.metrics.qd_score);
  os << ',';
  put(os, row.metrics.coverage);
  os << ',';
  if (row.metrics.best) put(os, *row.metrics.best);
  os << ',';
  if (row.metrics.average) put(os, *row.metrics.average);
  os << ',' << row.metrics.occupied << ',';
  put(os, row.search_learned_return);
  os << ',';
  put(os, row.search_true_return);
  os << ',' << row.offspring_changed << ',';
  put(os, row.total_improvement);
  os << ',' << (row.restarted ? 1 : 0) << ',';
  put(os, row.losses.adversary);
  os << ',';
  put(os, row.losses.gradient_penalty);
  os << ',';
  put(os, row.losses.reconstruction);
  for (Eigen::Index c = 0; c < 3; ++c) {
    os << ',';
    if (c < row.coeff_mean.size()) put(os, row.coeff_mean[c]);
  }
  os << ',';
  put(os, row.coeff_sigma);
  os << '\n';
}

void write_metrics_csv(std::ostream& os, std::span<const IterationLog> log) {
  write_metrics_header(os);
  for (const auto& row : log) write_metrics_row(os, row);
}

}  // namespace wqdil::qd

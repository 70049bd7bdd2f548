#include "wqdil/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wqdil::nn {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check(const PolicySpec& spec, std::span<const double> params) {
  if (params.size() != spec.param_count()) {
    throw std::invalid_argument("policy: parameter count mismatch");
  }
}

}  // namespace

PolicySpec make_policy_spec(int observation_dim, int action_dim, const std::vector<int>& hidden,
                            bool learn_log_std) {
  std::vector<int> widths{observation_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(action_dim);
  return {MlpSpec(std::move(widths)), learn_log_std};
}

ParamVector init_policy(const PolicySpec& spec, Random& rng, double initial_log_std) {
  ParamVector params = init_params(spec.mean, rng, 0.01);
  params.resize(spec.param_count(), initial_log_std);
  return params;
}

std::span<const double> mean_params(const PolicySpec& spec, std::span<const double> params) {
  check(spec, params);
  return params.subspan(0, spec.mean.param_count());
}

std::vector<double> log_std(const PolicySpec& spec, std::span<const double> params) {
  check(spec, params);
  std::vector<double> out(spec.action_dim());
  for (int j = 0; j < spec.action_dim(); ++j) {
    out[j] = std::clamp(params[spec.log_std_offset() + j], kLogStdMin, kLogStdMax);
  }
  return out;
}

Matrix mean_actions(const PolicySpec& spec, std::span<const double> params,
                    const Matrix& observations) {
  return forward(spec.mean, mean_params(spec, params), observations);
}

Matrix sample_actions(const PolicySpec& spec, std::span<const double> params,
                      const Matrix& observations, Random& rng, std::vector<double>& log_probs) {
  Matrix actions = mean_actions(spec, params, observations);
  const auto ls = log_std(spec, params);
  double log_norm = 0.0;
  for (double l : ls) log_norm += l + kHalfLog2Pi;
  log_probs.assign(actions.rows(), 0.0);
  for (Eigen::Index r = 0; r < actions.rows(); ++r) {
    double quad = 0.0;
    for (int j = 0; j < spec.action_dim(); ++j) {
      const double eps = rng.normal();
      actions(r, j) += std::exp(ls[j]) * eps;
      quad += eps * eps;
    }
    log_probs[r] = -0.5 * quad - log_norm;
  }
  return actions;
}

std::vector<double> log_prob(const PolicySpec& spec, std::span<const double> params,
                             const Matrix& observations, const Matrix& actions, Tape& tape) {
  if (actions.cols() != spec.action_dim() || actions.rows() != observations.rows()) {
    throw std::invalid_argument("log_prob: action shape mismatch");
  }
  forward(spec.mean, mean_params(spec, params), observations, tape);
  const Matrix& mean = tape.output();
  const auto ls = log_std(spec, params);
  std::vector<double> out(actions.rows());
  for (Eigen::Index r = 0; r < actions.rows(); ++r) {
    double lp = 0.0;
    for (int j = 0; j < spec.action_dim(); ++j) {
      const double z = (actions(r, j) - mean(r, j)) * std::exp(-ls[j]);
      lp += -0.5 * z * z - ls[j] - kHalfLog2Pi;
    }
    out[r] = lp;
  }
  return out;
}

double log_prob(const PolicySpec& spec, std::span<const double> params,
                std::span<const double> observation, std::span<const double> action) {
  Tape tape;
  return log_prob(spec, params, as_row(observation), as_row(action), tape)[0];
}

void log_prob_backward(const PolicySpec& spec, std::span<const double> params, const Tape& tape,
                       const Matrix& actions, std::span<const double> weights,
                       std::span<double> param_grad) {
  check(spec, params);
  const Matrix& mean = tape.output();
  const auto ls = log_std(spec, params);
  Matrix upstream(actions.rows(), spec.action_dim());
  for (int j = 0; j < spec.action_dim(); ++j) {
    const double inv_var = std::exp(-2.0 * ls[j]);
    const double raw = params[spec.log_std_offset() + j];
    const bool active = spec.learn_log_std && raw > kLogStdMin && raw < kLogStdMax;
    double dlog_std = 0.0;
    for (Eigen::Index r = 0; r < actions.rows(); ++r) {
      const double diff = actions(r, j) - mean(r, j);
      upstream(r, j) = weights[r] * diff * inv_var;
      dlog_std += weights[r] * (diff * diff * inv_var - 1.0);
    }
    if (active) param_grad[spec.log_std_offset() + j] += dlog_std;
  }
  backward(spec.mean, mean_params(spec, params), tape, upstream,
           param_grad.subspan(0, spec.mean.param_count()));
}

ParamVector log_prob_grad(const PolicySpec& spec, std::span<const double> params,
                          std::span<const double> observation, std::span<const double> action) {
  Tape tape;
  const Matrix actions = as_row(action);
  log_prob(spec, params, as_row(observation), actions, tape);
  ParamVector g(spec.param_count(), 0.0);
  const double one = 1.0;
  log_prob_backward(spec, params, tape, actions, std::span<const double>(&one, 1), g);
  return g;
}

}  // namespace wqdil::nn

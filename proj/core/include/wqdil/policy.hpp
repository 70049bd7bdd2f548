#pragma once

#include <span>
#include <vector>

#include "wqdil/mlp.hpp"
#include "wqdil/random.hpp"

namespace wqdil::nn {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian policy with a state-independent log standard deviation.
///
/// Parameter layout: mean network parameters followed by one log_std entry
/// per action dimension. When `learn_log_std` is false the log_std entries
/// receive zero gradient.
struct PolicySpec {
  MlpSpec mean;
  bool learn_log_std = true;

  int observation_dim() const { return mean.input_width(); }
  int action_dim() const { return mean.output_width(); }
  std::size_t param_count() const { return mean.param_count() + action_dim(); }
  std::size_t log_std_offset() const { return mean.param_count(); }
};

PolicySpec make_policy_spec(int observation_dim, int action_dim, const std::vector<int>& hidden,
                            bool learn_log_std = true);

/// Output layer scaled by 0.01 so initial means sit near zero.
ParamVector init_policy(const PolicySpec& spec, Random& rng, double initial_log_std);

std::span<const double> mean_params(const PolicySpec& spec, std::span<const double> params);

/// Clamped log standard deviations.
std::vector<double> log_std(const PolicySpec& spec, std::span<const double> params);

Matrix mean_actions(const PolicySpec& spec, std::span<const double> params,
                    const Matrix& observations);

/// Samples one action per row; writes log-probabilities of the samples.
Matrix sample_actions(const PolicySpec& spec, std::span<const double> params,
                      const Matrix& observations, Random& rng, std::vector<double>& log_probs);

double log_prob(const PolicySpec& spec, std::span<const double> params,
                std::span<const double> observation, std::span<const double> action);

/// Batched log-probabilities with the forward tape kept for `log_prob_backward`.
std::vector<double> log_prob(const PolicySpec& spec, std::span<const double> params,
                             const Matrix& observations, const Matrix& actions, Tape& tape);

/// Accumulates the parameter gradient of sum_r weights_r * log_prob_r.
void log_prob_backward(const PolicySpec& spec, std::span<const double> params, const Tape& tape,
                       const Matrix& actions, std::span<const double> weights,
                       std::span<double> param_grad);

/// Single-sample gradient of log_prob with respect to policy parameters.
ParamVector log_prob_grad(const PolicySpec& spec, std::span<const double> params,
                          std::span<const double> observation, std::span<const double> action);

}  // namespace wqdil::nn

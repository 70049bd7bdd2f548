#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wqdil/grid_archive.hpp"
#include "wqdil/mlp.hpp"
#include "wqdil/reward_model.hpp"
#include "wqdil/visit_archive.hpp"
#include "wqdil/vppo.hpp"
#include "wqdil/xnes.hpp"

namespace wqdil::qd {

struct QdConfig {
  int iterations = 200;
  /// Offspring per iteration (lambda).
  int branching = 8;
  /// Initial coefficient variance.
  double sigma_g = 0.5;
  int grid = 20;
  int explorer_resolution = 10;
  int eval_episodes = 4;
  int horizon = 100;
  reward::RewardVariant variant;
  /// Expert mode: environment reward, no reward model, no bonus.
  bool true_reward = false;
  std::uint64_t seed = 0;
  vppo::VppoConfig vppo;
  reward::RewardModelConfig reward;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  bool bonus_active() const { return !true_reward && variant.bonus_enabled; }
};

/// Demonstration transitions in policy-observation space.
struct ExpertData {
  nn::Matrix observations;
  nn::Matrix actions;
  std::vector<Measure> deltas;

  std::size_t size() const { return deltas.size(); }
};

struct IterationLog {
  int iteration = 0;
  ArchiveMetrics metrics;
  /// Search policy evaluation at the start of the iteration.
  double search_learned_return = 0.0;
  double search_true_return = 0.0;
  int offspring_changed = 0;
  /// Sum of clamped archive improvements over offspring.
  double total_improvement = 0.0;
  std::vector<double> offspring_true_returns;
  std::vector<double> offspring_learned_returns;
  bool restarted = false;
  reward::UpdateLosses losses;
  Eigen::VectorXd coeff_mean;
  double coeff_sigma = 0.0;
};

struct RunResult {
  GridArchive archive;
  std::vector<IterationLog> log;
  explore::VisitCountArchive explorer;
  nn::PolicySpec policy_spec;
  /// Reset seeds of the fixed evaluation episodes.
  std::vector<std::uint64_t> eval_seeds;
  /// Set when an iteration threw; archive and log hold the completed part.
  std::optional<std::string> error;
};

/// theta + c0 * grads[0] + sum_j c_j * grads[j].
nn::ParamVector branch(std::span<const double> theta, std::span<const nn::ParamVector> grads,
                       const Eigen::VectorXd& coeffs);

using IterationCallback = std::function<void(const IterationLog&)>;

/// Runs the outer loop. `expert` is required unless `config.true_reward`.
RunResult run(const QdConfig& config, const ExpertData* expert,
              const IterationCallback& on_iteration = {});

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const IterationLog& row);
void write_metrics_csv(std::ostream& os, std::span<const IterationLog> log);

}  // namespace wqdil::qd

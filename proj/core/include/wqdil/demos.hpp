#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "wqdil/grid_archive.hpp"
#include "wqdil/point_walker.hpp"
#include "wqdil/policy.hpp"
#include "wqdil/qd_loop.hpp"

namespace wqdil::demos {

struct DemoStep {
  env::EnvState state;
  /// The command the environment executed (already clamped).
  env::EnvAction action;
  Measure delta{};
};

struct Demonstration {
  std::vector<DemoStep> steps;
  /// Sum of true rewards.
  double episode_return = 0.0;
  Measure episodic_measure{};
};

struct DemoSet {
  std::vector<Demonstration> demos;
  /// Archive cell each demonstration was recorded from; empty after load.
  std::vector<qd::CellIndex> sources;
};

/// Outer loop on the environment reward with the reward model and the
/// exploration bonus disabled.
qd::RunResult generate_expert_archive(qd::QdConfig config);

/// Control: `draws` randomly initialized policies, each evaluated once with
/// the environment reward and inserted into a fresh archive.
qd::GridArchive random_policy_archive(const qd::QdConfig& config, int draws, std::uint64_t seed);

/// Top `pool_size` elites by fitness, then a greedy maximin pick of `k` in
/// measure space starting from the fittest, refined by swaps that strictly
/// raise the minimum pairwise distance (the fittest elite can be swapped
/// out). Throws when fewer than k elites exist.
std::vector<qd::CellIndex> select_demonstrators(const qd::GridArchive& archive, int pool_size,
                                                int k);

/// One deterministic episode per source. Among `candidate_seeds`, the reset
/// seed whose episode lands closest to the elite's stored measure is used.
DemoSet record_demonstrations(const qd::GridArchive& archive, std::span<const qd::CellIndex> sources,
                              const nn::PolicySpec& spec, std::span<const std::uint64_t> candidate_seeds,
                              int horizon = env::kDefaultHorizon);

/// Deterministic episode of the mean policy from `seed`.
Demonstration rollout_demonstration(const nn::PolicySpec& spec, std::span<const double> params,
                                    std::uint64_t seed, int horizon = env::kDefaultHorizon);

/// Header "demo_id,t,x,phi1,phi2,c1,c2,a1,a2,d1,d2", one row per step.
void save_demos(std::ostream& os, const DemoSet& set);
void save_demos(const std::filesystem::path& path, const DemoSet& set);

/// Validates the header against the environment's dimensions and every row
/// against the state/measure invariants. Errors carry the 1-based line
/// number. Returns and measures are recomputed from the rows.
DemoSet load_demos(std::istream& is);
DemoSet load_demos(const std::filesystem::path& path);

/// Policy-space transitions for the reward model.
qd::ExpertData to_expert_data(const DemoSet& set, int horizon = env::kDefaultHorizon);

struct SummaryStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};
SummaryStats summarize(std::span<const double> values);

/// Min/max/mean/std of episode length and return.
void print_demo_stats(std::ostream& os, const DemoSet& set);

}  // namespace wqdil::demos

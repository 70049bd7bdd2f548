#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "wqdil/environment.hpp"

namespace wqdil::env {

inline constexpr double kOmegaMin = 0.05;
inline constexpr double kOmegaMax = 0.6;
inline constexpr double kActionCost = 0.05;
inline constexpr int kDefaultHorizon = 100;
inline constexpr int kObservationDim = 7;
inline constexpr int kActionDim = 2;

struct EnvState {
  double x = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  int c1 = 0;
  int c2 = 0;
  int t = 0;

  bool operator==(const EnvState&) const = default;
};

/// Leg angular-velocity commands. Components are clamped to [-1, 1] on
/// construction; non-finite commands are rejected.
class EnvAction {
 public:
  EnvAction() = default;
  EnvAction(double a1, double a2);

  double a1() const { return a1_; }
  double a2() const { return a2_; }

  bool operator==(const EnvAction&) const = default;

 private:
  double a1_ = 0.0;
  double a2_ = 0.0;
};

struct StepOutcome {
  EnvState next_state;
  double true_reward = 0.0;
  Measure delta{};
};

/// Contact flag of a leg at phase `phi`: the foot is down on the lower half
/// of the cycle.
int contact(double phi);

/// Deterministic two-leg walker. Phases advance at a commanded rate between
/// kOmegaMin and kOmegaMax; a leg in contact pushes the body forward in
/// proportion to |cos phi|.
class PointWalker {
 public:
  explicit PointWalker(int horizon = kDefaultHorizon);

  int horizon() const { return horizon_; }

  EnvState reset(std::uint64_t seed) const;

  /// Throws std::logic_error when `state` is terminal.
  StepOutcome step(const EnvState& state, const EnvAction& action) const;

  /// (sin phi1, cos phi1, sin phi2, cos phi2, c1, c2, t/T)
  void observe(const EnvState& state, std::span<double> out) const;

  bool terminal(const EnvState& state) const { return state.t >= horizon_; }

 private:
  int horizon_;
};

/// Per-step reward the environment pays for taking `action` in `state`.
double true_reward(const EnvState& state, const EnvAction& action);

/// Single-step measure: the contact flags of the state.
Measure single_step_measure(const EnvState& state);

/// Componentwise mean of single-step measures. Throws on an empty sequence.
Measure episodic_measure(std::span<const Measure> deltas);

/// Stateful adapter used by rollout collection.
class PointWalkerEnv final : public Environment {
 public:
  explicit PointWalkerEnv(int horizon = kDefaultHorizon) : walker_(horizon) {}

  int observation_dim() const override { return kObservationDim; }
  int action_dim() const override { return kActionDim; }
  void reset(std::uint64_t seed) override;
  void observe(std::span<double> out) const override;
  Measure delta() const override { return single_step_measure(state_); }
  StepResult step(std::span<const double> action) override;
  bool done() const override { return walker_.terminal(state_); }
  std::unique_ptr<Environment> clone() const override;

  const EnvState& state() const { return state_; }
  const PointWalker& walker() const { return walker_; }

 private:
  PointWalker walker_;
  EnvState state_{};
};

/// Debug dump: one line per step, "t,x,phi1,phi2,c1,c2,a1,a2,true_reward".
struct TrajectoryRow {
  EnvState state;
  EnvAction action;
  double true_reward = 0.0;
};
void write_trajectory(std::ostream& os, std::span<const TrajectoryRow> rows);

}  // namespace wqdil::env

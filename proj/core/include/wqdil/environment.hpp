#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>

namespace wqdil {

/// Two-dimensional behavior descriptor. Single-step measures and episodic
/// measures share this representation.
using Measure = std::array<double, 2>;
inline constexpr int kMeasureDim = 2;

struct StepResult {
  double true_reward = 0.0;
  /// Single-step measure of the state the action was taken in.
  Measure delta{};
  bool done = false;
};

/// Stateful episodic environment as seen by the policy-gradient machinery.
///
/// Each instance owns exactly one episode in flight. Instances are
/// independent and may be stepped from different threads as long as no
/// instance is shared.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;

  virtual void reset(std::uint64_t seed) = 0;
  virtual void observe(std::span<double> out) const = 0;
  /// Single-step measure of the current state.
  virtual Measure delta() const = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual bool done() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace wqdil

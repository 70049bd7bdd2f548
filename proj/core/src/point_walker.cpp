#include "wqdil/point_walker.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "wqdil/random.hpp"

namespace wqdil::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double advance_phase(double phi, double command) {
  const double omega = kOmegaMin + (kOmegaMax - kOmegaMin) * (command + 1.0) / 2.0;
  return std::fmod(phi + omega, kTwoPi);
}

}  // namespace

EnvAction::EnvAction(double a1, double a2) {
  if (!std::isfinite(a1) || !std::isfinite(a2)) {
    throw std::invalid_argument("EnvAction: non-finite command");
  }
  a1_ = std::clamp(a1, -1.0, 1.0);
  a2_ = std::clamp(a2, -1.0, 1.0);
}

int contact(double phi) { return std::sin(phi) < 0.0 ? 1 : 0; }

PointWalker::PointWalker(int horizon) : horizon_(horizon) {
  if (horizon <= 0) throw std::invalid_argument("PointWalker: horizon must be positive");
}

EnvState PointWalker::reset(std::uint64_t seed) const {
  Random rng(seed);
  EnvState s;
  s.phi1 = rng.uniform() * kTwoPi;
  s.phi2 = rng.uniform() * kTwoPi;
  if (s.phi1 >= kTwoPi) s.phi1 = 0.0;
  if (s.phi2 >= kTwoPi) s.phi2 = 0.0;
  s.c1 = contact(s.phi1);
  s.c2 = contact(s.phi2);
  return s;
}

double true_reward(const EnvState& state, const EnvAction& action) {
  const double v =
      0.5 * (state.c1 * std::abs(std::cos(state.phi1)) + state.c2 * std::abs(std::cos(state.phi2)));
  return v - kActionCost * (action.a1() * action.a1() + action.a2() * action.a2());
}

Measure single_step_measure(const EnvState& state) {
  return {static_cast<double>(state.c1), static_cast<double>(state.c2)};
}

StepOutcome PointWalker::step(const EnvState& state, const EnvAction& action) const {
  if (terminal(state)) {
    throw std::logic_error("PointWalker::step: episode already terminal at t=" +
                           std::to_string(state.t));
  }
  StepOutcome out;
  const double v =
      0.5 * (state.c1 * std::abs(std::cos(state.phi1)) + state.c2 * std::abs(std::cos(state.phi2)));
  out.true_reward = true_reward(state, action);
  out.delta = single_step_measure(state);

  EnvState& next = out.next_state;
  next.x = state.x + v;
  next.phi1 = advance_phase(state.phi1, action.a1());
  next.phi2 = advance_phase(state.phi2, action.a2());
  next.c1 = contact(next.phi1);
  next.c2 = contact(next.phi2);
  next.t = state.t + 1;
  return out;
}

void PointWalker::observe(const EnvState& state, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(kObservationDim)) {
    throw std::invalid_argument("PointWalker::observe: output width mismatch");
  }
  out[0] = std::sin(state.phi1);
  out[1] = std::cos(state.phi1);
  out[2] = std::sin(state.phi2);
  out[3] = std::cos(state.phi2);
  out[4] = state.c1;
  out[5] = state.c2;
  out[6] = static_cast<double>(state.t) / horizon_;
}

Measure episodic_measure(std::span<const Measure> deltas) {
  if (deltas.empty()) throw std::invalid_argument("episodic_measure: empty sequence");
  Measure sum{0.0, 0.0};
  for (const auto& d : deltas) {
    sum[0] += d[0];
    sum[1] += d[1];
  }
  const auto n = static_cast<double>(deltas.size());
  return {sum[0] / n, sum[1] / n};
}

void PointWalkerEnv::reset(std::uint64_t seed) { state_ = walker_.reset(seed); }

void PointWalkerEnv::observe(std::span<double> out) const { walker_.observe(state_, out); }

StepResult PointWalkerEnv::step(std::span<const double> action) {
  if (action.size() != static_cast<std::size_t>(kActionDim)) {
    throw std::invalid_argument("PointWalkerEnv::step: action width mismatch");
  }
  const auto outcome = walker_.step(state_, EnvAction(action[0], action[1]));
  state_ = outcome.next_state;
  return {outcome.true_reward, outcome.delta, walker_.terminal(state_)};
}

std::unique_ptr<Environment> PointWalkerEnv::clone() const {
  return std::make_unique<PointWalkerEnv>(*this);
}

void write_trajectory(std::ostream& os, std::span<const TrajectoryRow> rows) {
  const auto old_precision = os.precision(17);
  for (const auto& r : rows) {
    os << r.state.t << ',' << r.state.x << ',' << r.state.phi1 << ',' << r.state.phi2 << ','
       << r.state.c1 << ',' << r.state.c2 << ',' << r.action.a1() << ',' << r.action.a2() << ','
       << r.true_reward << '\n';
  }
  os.precision(old_precision);
}

}  // namespace wqdil::env

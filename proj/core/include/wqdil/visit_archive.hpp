#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "wqdil/environment.hpp"

namespace wqdil::explore {

/// Visitation counts over single-step measures, discretized into an H x H
/// grid on [0,1]^2. Counts only ever grow; `total()` is their sum.
class VisitCountArchive {
 public:
  explicit VisitCountArchive(int resolution = 10);

  int resolution() const { return resolution_; }

  /// Throws std::out_of_range for deltas outside [0,1]^2.
  void visit(const Measure& delta);
  void visit_all(std::span<const Measure> deltas);

  std::uint64_t count(int row, int col) const;
  std::uint64_t count_at(const Measure& delta) const;
  std::uint64_t total() const { return total_; }

  /// n(C(delta)) / total, 0 for an empty archive.
  double proportion(const Measure& delta) const;

  /// 1 / (1 + proportion(delta)); always within [0.5, 1].
  double bonus(const Measure& delta) const;

  /// H x H CSV of integer counts.
  void write_csv(std::ostream& os) const;

 private:
  std::size_t cell(const Measure& delta) const;

  int resolution_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Learned reward plus the exploration bonus when enabled.
double combined_reward(const VisitCountArchive& visits, double base, const Measure& delta,
                       bool bonus_enabled);

}  // namespace wqdil::explore

#include "wqdil/visit_archive.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace wqdil::explore {

VisitCountArchive::VisitCountArchive(int resolution) : resolution_(resolution) {
  if (resolution < 1) throw std::invalid_argument("VisitCountArchive: resolution must be >= 1");
  counts_.assign(static_cast<std::size_t>(resolution) * resolution, 0);
}

std::size_t VisitCountArchive::cell(const Measure& delta) const {
  std::size_t idx[2];
  for (int d = 0; d < 2; ++d) {
    const double m = delta[d];
    if (!std::isfinite(m) || m < 0.0 || m > 1.0) {
      throw std::out_of_range("VisitCountArchive: delta component " + std::to_string(m) +
                              " outside [0,1]");
    }
    idx[d] = static_cast<std::size_t>(
        std::min(static_cast<int>(std::floor(m * resolution_)), resolution_ - 1));
  }
  return idx[0] * resolution_ + idx[1];
}

void VisitCountArchive::visit(const Measure& delta) {
  ++counts_[cell(delta)];
  ++total_;
}

void VisitCountArchive::visit_all(std::span<const Measure> deltas) {
  for (const auto& d : deltas) visit(d);
}

std::uint64_t VisitCountArchive::count(int row, int col) const {
  if (row < 0 || row >= resolution_ || col < 0 || col >= resolution_) {
    throw std::out_of_range("VisitCountArchive::count: cell out of range");
  }
  return counts_[static_cast<std::size_t>(row) * resolution_ + col];
}

std::uint64_t VisitCountArchive::count_at(const Measure& delta) const {
  return counts_[cell(delta)];
}

double VisitCountArchive::proportion(const Measure& delta) const {
  if (total_ == 0) return 0.0;
  const Measure clamped{std::clamp(delta[0], 0.0, 1.0), std::clamp(delta[1], 0.0, 1.0)};
  return static_cast<double>(counts_[cell(clamped)]) / static_cast<double>(total_);
}

double VisitCountArchive::bonus(const Measure& delta) const {
  return 1.0 / (1.0 + proportion(delta));
}

void VisitCountArchive::write_csv(std::ostream& os) const {
  for (int r = 0; r < resolution_; ++r) {
    for (int c = 0; c < resolution_; ++c) {
      if (c > 0) os << ',';
      os << count(r, c);
    }
    os << '\n';
  }
}

double combined_reward(const VisitCountArchive& visits, double base, const Measure& delta,
                       bool bonus_enabled) {
  return bonus_enabled ? base + visits.bonus(delta) : base;
}

}  // namespace wqdil::explore

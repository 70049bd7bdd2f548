#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wqdil/environment.hpp"
#include "wqdil/mlp.hpp"
#include "wqdil/random.hpp"

namespace wqdil::qd {

struct Elite {
  nn::ParamVector params;
  /// True-reward episode return; the archive fitness.
  double fitness = 0.0;
  Measure measure{};
  /// Learned-reward return recorded alongside for diagnostics.
  double learned_fitness = 0.0;
};

struct CellIndex {
  int row = 0;
  int col = 0;

  bool operator==(const CellIndex&) const = default;
  auto operator<=>(const CellIndex&) const = default;
};

enum class InsertStatus { kNotAdded, kNewCell, kImproved };

struct InsertResult {
  InsertStatus status = InsertStatus::kNotAdded;
  /// Elitist improvement clamped at zero.
  double improvement = 0.0;
  /// Unclamped improvement; used to rank offspring.
  double raw_improvement = 0.0;

  bool changed() const { return status != InsertStatus::kNotAdded; }
};

struct ArchiveMetrics {
  /// Sum over elites of max(fitness - floor, 0).
  double qd_score = 0.0;
  /// Percentage of nonempty cells.
  double coverage = 0.0;
  std::optional<double> best;
  std::optional<double> average;
  int occupied = 0;
};

/// MAP-Elites grid over [0,1]^2 with `resolution` cells per dimension.
class GridArchive {
 public:
  explicit GridArchive(int resolution, double fitness_floor = 0.0);

  int resolution() const { return resolution_; }
  int cell_count() const { return resolution_ * resolution_; }
  double fitness_floor() const { return floor_; }

  /// floor(m * G) per dimension with the upper edge folded into the last
  /// cell. Measures within 1e-9 of the bounds are clamped; anything further
  /// out throws std::out_of_range.
  CellIndex cell_index(const Measure& measure) const;

  InsertResult insert(Elite elite);

  const std::optional<Elite>& at(CellIndex cell) const;
  int occupied() const { return occupied_; }
  bool empty() const { return occupied_ == 0; }

  /// Occupied cells in row-major order.
  std::vector<CellIndex> occupied_cells() const;

  /// Uniform over occupied cells. Throws on an empty archive.
  const Elite& sample_elite(Random& rng) const;

  ArchiveMetrics metrics() const;

  /// "row,col,fitness,measure1,measure2" plus a binary sidecar of
  /// (row u32, col u32, param vector) records.
  void save(const std::filesystem::path& csv_path, const std::filesystem::path& params_path,
            const nn::MlpSpec& spec) const;
  static GridArchive load(const std::filesystem::path& csv_path,
                          const std::filesystem::path& params_path, const nn::MlpSpec& spec,
                          std::size_t param_count, int resolution);
  /// Loads the CSV only; elites carry empty parameter vectors.
  static GridArchive load_csv(const std::filesystem::path& csv_path, int resolution);

  /// G x G fitness grid, blank entries for empty cells. Row index = measure 1.
  void write_heatmap_csv(std::ostream& os) const;
  /// 8-bit binary PGM, fitness min-max normalized over nonempty cells;
  /// empty cells are black, occupied cells span 1..255.
  void write_heatmap_pgm(std::ostream& os) const;

 private:
  int resolution_;
  double floor_;
  int occupied_ = 0;
  std::vector<std::optional<Elite>> cells_;
};

}  // namespace wqdil::qd

#include "wqdil/grid_archive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "wqdil/param_io.hpp"

namespace wqdil::qd {

namespace {

constexpr double kBoundSlack = 1e-9;

int bin(double m, int resolution) {
  if (!std::isfinite(m) || m < -kBoundSlack || m > 1.0 + kBoundSlack) {
    throw std::out_of_range("GridArchive: measure " + std::to_string(m) + " outside [0,1]");
  }
  const double clamped = std::clamp(m, 0.0, 1.0);
  return std::min(static_cast<int>(std::floor(clamped * resolution)), resolution - 1);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("archive params: truncated");
    v |= static_cast<std::uint32_t>(c & 0xff) << (8 * i);
  }
  return v;
}

}  // namespace

GridArchive::GridArchive(int resolution, double fitness_floor)
    : resolution_(resolution), floor_(fitness_floor) {
  if (resolution < 1) throw std::invalid_argument("GridArchive: resolution must be >= 1");
  cells_.resize(static_cast<std::size_t>(resolution) * resolution);
}

CellIndex GridArchive::cell_index(const Measure& measure) const {
  return {bin(measure[0], resolution_), bin(measure[1], resolution_)};
}

InsertResult GridArchive::insert(Elite elite) {
  if (!std::isfinite(elite.fitness)) throw std::invalid_argument("GridArchive: non-finite fitness");
  const CellIndex cell = cell_index(elite.measure);
  for (double& m : elite.measure) m = std::clamp(m, 0.0, 1.0);
  auto& slot = cells_[static_cast<std::size_t>(cell.row) * resolution_ + cell.col];

  InsertResult result;
  if (!slot) {
    result.status = InsertStatus::kNewCell;
    result.raw_improvement = elite.fitness - floor_;
    slot = std::move(elite);
    ++occupied_;
  } else if (elite.fitness > slot->fitness) {
    result.status = InsertStatus::kImproved;
    result.raw_improvement = elite.fitness - slot->fitness;
    slot = std::move(elite);
  }
  result.improvement = std::max(0.0, result.raw_improvement);
  return result;
}

const std::optional<Elite>& GridArchive::at(CellIndex cell) const {
  if (cell.row < 0 || cell.row >= resolution_ || cell.col < 0 || cell.col >= resolution_) {
    throw std::out_of_range("GridArchive::at: cell out of range");
  }
  return cells_[static_cast<std::size_t>(cell.row) * resolution_ + cell.col];
}

std::vector<CellIndex> GridArchive::occupied_cells() const {
  std::vector<CellIndex> out;
  out.reserve(occupied_);
  for (int r = 0; r < resolution_; ++r) {
    for (int c = 0; c < resolution_; ++c) {
      if (cells_[static_cast<std::size_t>(r) * resolution_ + c]) out.push_back({r, c});
    }
  }
  return out;
}

const Elite& GridArchive::sample_elite(Random& rng) const {
  if (empty()) throw std::logic_error("GridArchive::sample_elite: archive is empty");
  const auto cells = occupied_cells();
  return *at(cells[rng.index(cells.size())]);
}

ArchiveMetrics GridArchive::metrics() const {
  ArchiveMetrics m;
  double best = -std::numeric_limits<double>::infinity();
  double fitness_sum = 0.0;
  for (const auto& slot : cells_) {
    if (!slot) continue;
    m.qd_score += std::max(0.0, slot->fitness - floor_);
    fitness_sum += slot->fitness;
    best = std::max(best, slot->fitness);
    ++m.occupied;
  }
  m.coverage = 100.0 * m.occupied / cell_count();
  if (m.occupied > 0) {
    m.best = best;
    m.average = fitness_sum / m.occupied;
  }
  return m;
}

void GridArchive::save(const std::filesystem::path& csv_path,
                       const std::filesystem::path& params_path, const nn::MlpSpec& spec) const {
  std::ofstream csv(csv_path);
  std::ofstream bin(params_path, std::ios::binary);
  if (!csv || !bin) throw std::runtime_error("GridArchive::save: cannot open output files");
  csv.precision(17);
  csv << "row,col,fitness,measure1,measure2\n";
  for (const auto& cell : occupied_cells()) {
    const Elite& e = *at(cell);
    csv << cell.row << ',' << cell.col << ',' << e.fitness << ',' << e.measure[0] << ','
        << e.measure[1] << '\n';
    put_u32(bin, static_cast<std::uint32_t>(cell.row));
    put_u32(bin, static_cast<std::uint32_t>(cell.col));
    put_u32(bin, static_cast<std::uint32_t>(e.params.size()));
    nn::write_params(bin, spec, e.params);
  }
}

GridArchive GridArchive::load_csv(const std::filesystem::path& csv_path, int resolution) {
  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("GridArchive::load_csv: cannot open " + csv_path.string());
  GridArchive archive(resolution);
  std::string line;
  std::getline(csv, line);
  if (line != "row,col,fitness,measure1,measure2") {
    throw std::runtime_error("GridArchive::load_csv: unexpected header");
  }
  int line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int row = 0, col = 0;
    Elite e;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ss >> row >> c1 >> col >> c2 >> e.fitness >> c3 >> e.measure[0] >> c4 >> e.measure[1]) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::runtime_error("GridArchive::load_csv: malformed line " + std::to_string(line_no));
    }
    if (archive.cell_index(e.measure) != CellIndex{row, col}) {
      throw std::runtime_error("GridArchive::load_csv: measure does not map to its cell on line " +
                               std::to_string(line_no));
    }
    archive.insert(std::move(e));
  }
  return archive;
}

GridArchive GridArchive::load(const std::filesystem::path& csv_path,
                              const std::filesystem::path& params_path, const nn::MlpSpec& spec,
                              std::size_t param_count, int resolution) {
  GridArchive archive = load_csv(csv_path, resolution);
  std::ifstream bin(params_path, std::ios::binary);
  if (!bin) throw std::runtime_error("GridArchive::load: cannot open " + params_path.string());
  for (int i = 0; i < archive.occupied(); ++i) {
    const int row = static_cast<int>(get_u32(bin));
    const int col = static_cast<int>(get_u32(bin));
    const std::size_t count = get_u32(bin);
    if (count != param_count) throw std::runtime_error("GridArchive::load: parameter count mismatch");
    auto& slot = archive.cells_.at(static_cast<std::size_t>(row) * resolution + col);
    if (!slot) throw std::runtime_error("GridArchive::load: parameters for an empty cell");
    slot->params = nn::read_params(bin, spec, count);
  }
  return archive;
}

void GridArchive::write_heatmap_csv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  for (int r = 0; r < resolution_; ++r) {
    for (int c = 0; c < resolution_; ++c) {
      if (c > 0) os << ',';
      if (const auto& slot = at({r, c})) os << slot->fitness;
    }
    os << '\n';
  }
  os.precision(old_precision);
}

void GridArchive::write_heatmap_pgm(std::ostream& os) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& slot : cells_) {
    if (!slot) continue;
    lo = std::min(lo, slot->fitness);
    hi = std::max(hi, slot->fitness);
  }
  os << "P5\n" << resolution_ << ' ' << resolution_ << "\n255\n";
  for (int r = 0; r < resolution_; ++r) {
    for (int c = 0; c < resolution_; ++c) {
      const auto& slot = at({r, c});
      unsigned char px = 0;
      if (slot) {
        const double u = hi > lo ? (slot->fitness - lo) / (hi - lo) : 1.0;
        px = static_cast<unsigned char>(1 + std::lround(u * 254.0));
      }
      os.put(static_cast<char>(px));
    }
  }
}

}  // namespace wqdil::qd

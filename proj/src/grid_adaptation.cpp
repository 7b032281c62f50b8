#include "scoreloc/grid_adaptation.hpp"

#include <cmath>
#include <limits>

#include "scoreloc/errors.hpp"

namespace scoreloc {

void GridConfig::validate() const {
  if (!(cell_size > 0.0)) throw ConfigError("grid: cellSize must be positive");
  if (cells_per_side < 1) throw ConfigError("grid: cellsPerSide must be at least 1");
  // C^3 must fit in int64.
  if (cells_per_side > 2097151) throw ConfigError("grid: cellsPerSide too large for 64-bit cell indices");
}

std::int64_t cell_index_1d(double p_k, const GridConfig& cfg) {
  const double c = static_cast<double>(cfg.cells_per_side);
  // std::round rounds halfway cases away from zero.
  const double v = std::round(p_k / cfg.cell_size + c / 2.0);
  if (!(v > 0.0)) return 0;
  if (v >= c - 1.0) return cfg.cells_per_side - 1;
  return static_cast<std::int64_t>(v);
}

std::int64_t cell_index(const Eigen::Vector3d& p, const GridConfig& cfg) {
  const std::int64_t c = cfg.cells_per_side;
  return c * c * cell_index_1d(p.z(), cfg) + c * cell_index_1d(p.y(), cfg) +
         cell_index_1d(p.x(), cfg);
}

Eigen::Matrix<std::int64_t, 3, 1> decode_cell_index(std::int64_t g, const GridConfig& cfg) {
  const std::int64_t c = cfg.cells_per_side;
  return {g % c, (g / c) % c, g / (c * c)};
}

ReservoirLookupTable::ReservoirLookupTable(std::int32_t reservoir_count, std::uint64_t seed)
    : reservoir_count_(reservoir_count), seed_(seed), rng_(seed) {
  if (reservoir_count < 1) throw ConfigError("lookup table: reservoirCount must be at least 1");
}

std::int32_t ReservoirLookupTable::lookup_or_assign(std::int64_t cell) {
  if (auto it = entries_.find(cell); it != entries_.end()) return it->second;
  std::int32_t r;
  if (next_free_ < reservoir_count_) {
    r = next_free_++;
  } else {
    std::uniform_int_distribution<std::int32_t> pick(0, next_free_ - 1);
    r = pick(rng_);
    ++draws_;
  }
  entries_.emplace(cell, r);
  return r;
}

std::optional<std::int32_t> ReservoirLookupTable::find(std::int64_t cell) const {
  if (auto it = entries_.find(cell); it != entries_.end()) return it->second;
  return std::nullopt;
}

ReservoirLookupTable ReservoirLookupTable::Restore(
    std::int32_t reservoir_count, std::uint64_t seed,
    std::vector<std::pair<std::int64_t, std::int32_t>> entries, std::int32_t next_free,
    std::uint64_t draws) {
  ReservoirLookupTable t(reservoir_count, seed);
  for (const auto& [cell, r] : entries) {
    if (r < 0 || r >= reservoir_count) throw FormatError("lookup table entry out of range");
    t.entries_.emplace(cell, r);
  }
  t.next_free_ = next_free;
  // Replay the sharing stream so that future assignments continue identically.
  std::uniform_int_distribution<std::int32_t> pick(0, std::max(next_free, 1) - 1);
  for (std::uint64_t i = 0; i < draws; ++i) pick(t.rng_);
  t.draws_ = draws;
  return t;
}

ReservoirIndexImage adapt(const PredictionGrid& pred, ReservoirLookupTable& table,
                          const GridConfig& cfg) {
  ReservoirIndexImage out(pred.width, pred.height);
  for (std::size_t i = 0; i < pred.cell_count(); ++i) {
    if (!pred.valid[i]) continue;
    out.indices[i] = table.lookup_or_assign(cell_index(pred.points[i].cast<double>(), cfg));
  }
  return out;
}

ReservoirIndexImage adapt_lookup(const PredictionGrid& pred, const ReservoirLookupTable& table,
                                 const GridConfig& cfg) {
  ReservoirIndexImage out(pred.width, pred.height);
  for (std::size_t i = 0; i < pred.cell_count(); ++i) {
    if (!pred.valid[i]) continue;
    if (auto r = table.find(cell_index(pred.points[i].cast<double>(), cfg))) out.indices[i] = *r;
  }
  return out;
}

}  // namespace scoreloc

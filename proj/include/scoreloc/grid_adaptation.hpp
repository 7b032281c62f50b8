#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "scoreloc/prediction_grid.hpp"

namespace scoreloc {

/// Bounded cubic grid over the pre-training scene: C cells of side l per axis.
struct GridConfig {
  double cell_size = 0.1;              // l, metres
  std::int64_t cells_per_side = 10000; // C

  void validate() const;
  std::int64_t cell_count() const { return cells_per_side * cells_per_side * cells_per_side; }
};

/// g(p_k) = clamp(round(p_k / l + C / 2), 0, C - 1), rounding half away from zero.
std::int64_t cell_index_1d(double p_k, const GridConfig& cfg);

/// G(p) = C^2 g(p_z) + C g(p_y) + g(p_x).
std::int64_t cell_index(const Eigen::Vector3d& p, const GridConfig& cfg);

/// Inverse of the raster combination: G -> (g_x, g_y, g_z).
Eigen::Matrix<std::int64_t, 3, 1> decode_cell_index(std::int64_t g, const GridConfig& cfg);

/// Sparse map from grid cells to a fixed pool of N reservoirs. The first N
/// distinct cells take reservoirs 0..N-1 in order of arrival; later cells are
/// mapped permanently to a uniformly chosen, already assigned reservoir.
class ReservoirLookupTable {
 public:
  ReservoirLookupTable(std::int32_t reservoir_count, std::uint64_t seed);

  std::int32_t lookup_or_assign(std::int64_t cell);
  std::optional<std::int32_t> find(std::int64_t cell) const;

  std::int32_t reservoir_count() const { return reservoir_count_; }
  std::int32_t assigned_reservoirs() const { return next_free_; }
  std::size_t mapped_cells() const { return entries_.size(); }
  const std::unordered_map<std::int64_t, std::int32_t>& entries() const { return entries_; }

  /// Restores a previously saved table (entries plus the sharing RNG stream).
  static ReservoirLookupTable Restore(std::int32_t reservoir_count, std::uint64_t seed,
                                      std::vector<std::pair<std::int64_t, std::int32_t>> entries,
                                      std::int32_t next_free, std::uint64_t draws);
  std::uint64_t seed() const { return seed_; }
  std::uint64_t sharing_draws() const { return draws_; }

 private:
  std::int32_t reservoir_count_;
  std::int32_t next_free_ = 0;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 rng_;
  std::unordered_map<std::int64_t, std::int32_t> entries_;
};

/// Reservoir index per prediction cell; -1 where no reservoir applies.
struct ReservoirIndexImage {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> indices;

  ReservoirIndexImage() = default;
  ReservoirIndexImage(int w, int h)
      : width(w), height(h), indices(static_cast<std::size_t>(w) * h, -1) {}

  std::optional<std::int32_t> at(int x, int y) const {
    const std::int32_t v = indices[static_cast<std::size_t>(y) * width + x];
    return v < 0 ? std::nullopt : std::optional<std::int32_t>(v);
  }

  friend bool operator==(const ReservoirIndexImage&, const ReservoirIndexImage&) = default;
};

/// Online-training adaptation: unseen cells are assigned reservoirs.
ReservoirIndexImage adapt(const PredictionGrid& pred, ReservoirLookupTable& table,
                          const GridConfig& cfg);

/// Test-time adaptation: the table is read-only and unseen cells stay empty.
ReservoirIndexImage adapt_lookup(const PredictionGrid& pred, const ReservoirLookupTable& table,
                                 const GridConfig& cfg);

}  // namespace scoreloc

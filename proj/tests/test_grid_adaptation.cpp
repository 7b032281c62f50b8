#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "scoreloc/errors.hpp"
#include "scoreloc/grid_adaptation.hpp"

using namespace scoreloc;

namespace {

// Reference g(p): scan the cells for the one whose centre interval holds p.
std::int64_t brute_force_1d(double p, double l, std::int64_t c) {
  const double x = p / l + static_cast<double>(c) / 2.0;  // continuous cell coordinate
  for (std::int64_t g = 0; g < c; ++g) {
    const double lo = static_cast<double>(g) - 0.5, hi = static_cast<double>(g) + 0.5;
    // Half-way points round away from zero.
    const bool inside = x >= 0 ? (x >= lo && x < hi) : (x > lo && x <= hi);
    if (inside) return g;
  }
  return x < 0 ? 0 : c - 1;
}

}  // namespace

TEST(CellIndex1d, Examples) {
  const GridConfig cfg{1.0, 4};
  EXPECT_EQ(cell_index_1d(0.0, cfg), 2);
  EXPECT_EQ(cell_index_1d(1e6, cfg), 3);
  EXPECT_EQ(cell_index_1d(-1e6, cfg), 0);
  // Half-way points round away from zero.
  EXPECT_EQ(cell_index_1d(0.5, cfg), 3);
  EXPECT_EQ(cell_index_1d(-0.5, cfg), 2);
}

TEST(CellIndex1d, BruteForceSweep) {
  const GridConfig cfg{0.1, 16};
  for (int i = -61; i <= 61; ++i) {
    const double p = 0.05 * i;
    EXPECT_EQ(cell_index_1d(p, cfg), brute_force_1d(p, 0.1, 16)) << "p = " << p;
  }
}

TEST(CellIndex, WorkedExamples) {
  const GridConfig cfg{1.0, 4};
  // Cell centres sit at (g - C/2) l.
  EXPECT_EQ(cell_index(Eigen::Vector3d(0.0, -1.0, 1.0), cfg), 54);
  EXPECT_EQ(cell_index(Eigen::Vector3d::Zero(), cfg), 42);
}

TEST(CellIndex, BijectiveRasterC8) {
  const GridConfig cfg{1.0, 8};
  std::set<std::int64_t> seen;
  for (std::int64_t g = 0; g < cfg.cell_count(); ++g) {
    const auto xyz = decode_cell_index(g, cfg);
    EXPECT_EQ(xyz.z() * 64 + xyz.y() * 8 + xyz.x(), g);
    const Eigen::Vector3d centre = (xyz.cast<double>().array() - 4.0).matrix();
    EXPECT_EQ(cell_index(centre, cfg), g);
    seen.insert(g);
  }
  EXPECT_EQ(seen.size(), 512u);
}

TEST(CellIndex, SameCubeSameIndex) {
  const GridConfig cfg{0.1, 10000};
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cell(-2000, 2000);
  std::uniform_real_distribution<double> inside(-0.49, 0.49);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d centre(cell(rng) * 0.1, cell(rng) * 0.1, cell(rng) * 0.1);
    const std::int64_t g = cell_index(centre, cfg);
    for (int j = 0; j < 5; ++j) {
      const Eigen::Vector3d p = centre + 0.1 * Eigen::Vector3d(inside(rng), inside(rng), inside(rng));
      EXPECT_EQ(cell_index(p, cfg), g);
    }
  }
}

TEST(GridConfig, Validation) {
  EXPECT_THROW((GridConfig{0.0, 4}.validate()), ConfigError);
  EXPECT_THROW((GridConfig{0.1, 0}.validate()), ConfigError);
  EXPECT_THROW((GridConfig{0.1, 3000000}.validate()), ConfigError);
  EXPECT_NO_THROW((GridConfig{1.0, 1000}.validate()));
}

TEST(LookupTable, SequentialAndStable) {
  ReservoirLookupTable t(8, 1);
  EXPECT_EQ(t.lookup_or_assign(54), 0);
  EXPECT_EQ(t.lookup_or_assign(7), 1);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(t.lookup_or_assign(54), 0);
  EXPECT_EQ(t.find(7), 1);
  EXPECT_FALSE(t.find(8).has_value());
}

TEST(LookupTable, SharingSeededReplay) {
  ReservoirLookupTable t(2, 7);
  EXPECT_EQ(t.lookup_or_assign(100), 0);
  EXPECT_EQ(t.lookup_or_assign(200), 1);
  // Frozen from a reference run: uniform pick over {0, 1} on mt19937_64(7).
  EXPECT_EQ(t.lookup_or_assign(300), 1);
  EXPECT_EQ(t.lookup_or_assign(400), 1);
  EXPECT_EQ(t.lookup_or_assign(500), 0);
  EXPECT_EQ(t.lookup_or_assign(300), 1);
  ReservoirLookupTable u(2, 7);
  for (std::int64_t g : {100, 200, 300, 400, 500}) u.lookup_or_assign(g);
  EXPECT_EQ(u.entries(), t.entries());
}

TEST(LookupTable, NeverExceedsNAndInjectiveBelowN) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> cell(0, 1'000'000);
  ReservoirLookupTable t(64, 11);
  std::set<std::int32_t> first;
  std::set<std::int64_t> cells;
  while (cells.size() < 64) {
    const auto g = cell(rng);
    if (cells.insert(g).second) first.insert(t.lookup_or_assign(g));
  }
  EXPECT_EQ(first.size(), 64u);
  for (int i = 0; i < 1000; ++i) {
    const auto r = t.lookup_or_assign(cell(rng));
    EXPECT_GE(r, 0);
    EXPECT_LT(r, 64);
  }
  EXPECT_EQ(t.assigned_reservoirs(), 64);
}

TEST(LookupTable, RestoreContinuesStream) {
  ReservoirLookupTable a(3, 5);
  for (std::int64_t g = 0; g < 10; ++g) a.lookup_or_assign(g);
  std::vector<std::pair<std::int64_t, std::int32_t>> entries(a.entries().begin(), a.entries().end());
  ReservoirLookupTable b = ReservoirLookupTable::Restore(3, 5, entries, a.assigned_reservoirs(),
                                                         a.sharing_draws());
  for (std::int64_t g = 10; g < 30; ++g) EXPECT_EQ(a.lookup_or_assign(g), b.lookup_or_assign(g));
}

TEST(Adapt, SingleCellSharesOneReservoir) {
  const GridConfig cfg{0.1, 10000};
  PredictionGrid pred(80, 60);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 80; ++x) pred.set(x, y, Eigen::Vector3f(0.01f * (x % 3), 0.0f, 0.02f));
  ReservoirLookupTable t(16, 1);
  const ReservoirIndexImage img = adapt(pred, t, cfg);
  EXPECT_EQ(img.width, 80);
  EXPECT_EQ(img.height, 60);
  for (auto v : img.indices) EXPECT_EQ(v, 0);
}

TEST(Adapt, TwoBlobsTwoReservoirs) {
  const GridConfig cfg{0.1, 10000};
  PredictionGrid pred(8, 4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> jitter(-0.04f, 0.04f);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) {
      const Eigen::Vector3f centre = x < 4 ? Eigen::Vector3f(0, 0, 0) : Eigen::Vector3f(5, 5, 5);
      pred.set(x, y, centre + Eigen::Vector3f(jitter(rng), jitter(rng), jitter(rng)));
    }
  }
  ReservoirLookupTable t(16, 1);
  const ReservoirIndexImage img = adapt(pred, t, cfg);
  const std::set<std::int32_t> used(img.indices.begin(), img.indices.end());
  EXPECT_EQ(used, (std::set<std::int32_t>{0, 1}));
}

TEST(Adapt, InvalidCellsAndReadOnlyLookup) {
  const GridConfig cfg{0.1, 10000};
  PredictionGrid pred(2, 1);
  pred.set(0, 0, Eigen::Vector3f(1, 1, 1));
  ReservoirLookupTable t(4, 1);
  const ReservoirIndexImage img = adapt(pred, t, cfg);
  EXPECT_EQ(img.at(0, 0), 0);
  EXPECT_FALSE(img.at(1, 0).has_value());

  PredictionGrid unseen(2, 1);
  unseen.set(0, 0, Eigen::Vector3f(1, 1, 1));
  unseen.set(1, 0, Eigen::Vector3f(-3, 2, 1));
  const ReservoirIndexImage looked = adapt_lookup(unseen, t, cfg);
  EXPECT_EQ(looked.at(0, 0), 0);
  EXPECT_FALSE(looked.at(1, 0).has_value());
  EXPECT_EQ(t.mapped_cells(), 1u);
}

TEST(Adapt, ReplayBitIdentical) {
  const GridConfig cfg{0.1, 10000};
  PredictionGrid pred(80, 60);
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n(0.0f, 2.0f);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 80; ++x) pred.set(x, y, Eigen::Vector3f(n(rng), n(rng), n(rng)));
  ReservoirLookupTable a(100, 9), b(100, 9);
  EXPECT_EQ(adapt(pred, a, cfg), adapt(pred, b, cfg));
  EXPECT_EQ(a.entries(), b.entries());
}

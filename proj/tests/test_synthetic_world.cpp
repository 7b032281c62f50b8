#include <random>

#include <gtest/gtest.h>

#include "scoreloc/errors.hpp"
#include "scoreloc/evaluation.hpp"
#include "scoreloc/synthetic_world.hpp"
#include "test_support.hpp"

using namespace scoreloc;

namespace {

WorldSpec tiny_spec() {
  WorldSpec spec;
  spec.point_count = 2000;
  spec.train_frames = 1;
  spec.test_frames = 1;
  return spec;
}

}  // namespace

TEST(World, SingleFrameTrajectory) {
  const SyntheticWorld world(tiny_spec());
  ASSERT_EQ(world.train().size(), 1u);
  ASSERT_EQ(world.test().size(), 1u);
  EXPECT_EQ(world.train()[0].index, 0u);
  EXPECT_EQ(world.test()[0].index, 1u);
  EXPECT_EQ(world.reference_model().size(), 2000u);
}

TEST(World, DepthLiesOnTheSurface) {
  const auto& world = fixtures::small_world();
  std::mt19937_64 rng(1);
  for (const FrameRecord& f : {world.train()[2], world.test()[1]}) {
    std::uniform_int_distribution<int> ux(0, f.depth.width() - 1), uy(0, f.depth.height() - 1);
    int checked = 0;
    while (checked < 500) {
      const int x = ux(rng), y = uy(rng);
      if (!is_valid_depth(f.depth(x, y))) continue;
      const Eigen::Vector3d p = back_project({x, y}, f.depth, f.intrinsics, f.pose);
      EXPECT_LT(world.surface_distance(p), 1e-3);
      ++checked;
    }
  }
}

TEST(World, ReferencePointsOnTheSurface) {
  const auto& world = fixtures::small_world();
  for (std::size_t i = 0; i < world.reference_model().size(); i += 97) {
    EXPECT_LT(world.surface_distance(world.reference_model().positions()[i].cast<double>()), 1e-4);
  }
}

TEST(World, RayCastMatchesSurface) {
  const auto& world = fixtures::small_world();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  const Eigen::Vector3d origin(0.1, -0.2, 1.5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const auto hit = world.cast_ray(origin, dir);
    ASSERT_TRUE(hit.has_value());  // closed room
    EXPECT_LT(world.surface_distance(origin + *hit * dir), 1e-6);
  }
}

TEST(World, TestOffsetsAreBounded) {
  const auto& world = fixtures::small_world();
  std::vector<RigidPosed> train, test;
  for (const auto& f : world.train()) train.push_back(f.pose);
  for (const auto& f : world.test()) test.push_back(f.pose);
  const auto d = novelty_distances(train, test);
  ASSERT_EQ(world.test_offsets().size(), test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    EXPECT_LE(d[i].translation, world.test_offsets()[i] + 1e-9);
    EXPECT_TRUE(is_valid_rotation(test[i].rotation));
  }
}

TEST(World, DeterministicAndValidated) {
  const SyntheticWorld a(tiny_spec()), b(tiny_spec());
  EXPECT_EQ(a.train()[0].depth, b.train()[0].depth);
  EXPECT_EQ(a.train()[0].rgb, b.train()[0].rgb);
  EXPECT_EQ(a.reference_model(), b.reference_model());
  WorldSpec bad = tiny_spec();
  bad.point_count = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(World, LookRotationIsProper) {
  const Eigen::Matrix3d r = look_rotation(Eigen::Vector3d(1, 1, 0));
  EXPECT_TRUE(is_valid_rotation(r));
  EXPECT_LT((r.col(2) - Eigen::Vector3d(1, 1, 0).normalized()).norm(), 1e-12);
  // Image down is world down.
  EXPECT_LT(r.col(1).z(), 0.0);
}

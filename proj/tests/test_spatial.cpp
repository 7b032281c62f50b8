#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "scoreloc/kd_tree.hpp"
#include "scoreloc/scene_model.hpp"

using namespace scoreloc;

namespace {

std::vector<Eigen::Vector3f> random_points(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  std::vector<Eigen::Vector3f> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

}  // namespace

TEST(KdTree, NearestMatchesBruteForce) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(5000, rng);
  const KdTree tree(pts);
  for (const auto& q : random_points(500, rng)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if ((pts[i] - q).squaredNorm() < (pts[best] - q).squaredNorm()) best = i;
    }
    const auto nn = tree.nearest(q);
    ASSERT_TRUE(nn.has_value());
    EXPECT_EQ(nn->index, best);
    // Bounded query: nothing strictly closer than the bound.
    const float d = std::sqrt(nn->squared_distance);
    EXPECT_FALSE(tree.nearest(q, d * 0.999f).has_value());
  }
  EXPECT_FALSE(KdTree().nearest(Eigen::Vector3f::Zero()).has_value());
}

TEST(KdTree, KNearestAndRadiusMatchBruteForce) {
  std::mt19937_64 rng(2);
  const auto pts = random_points(3000, rng);
  const KdTree tree(pts);
  for (const auto& q : random_points(100, rng)) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const float da = (pts[a] - q).squaredNorm(), db = (pts[b] - q).squaredNorm();
      return da < db || (da == db && a < b);
    });
    const auto knn = tree.k_nearest(q, 10);
    ASSERT_EQ(knn.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(knn[i].index, order[i]);

    std::vector<std::size_t> found;
    tree.radius_search(q, 0.4f, found);
    std::sort(found.begin(), found.end());
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if ((pts[i] - q).squaredNorm() <= 0.16f) expected.push_back(i);
    EXPECT_EQ(found, expected);
  }
  EXPECT_EQ(KdTree(std::vector<Eigen::Vector3f>(3, Eigen::Vector3f::Zero())).k_nearest({0, 0, 0}, 5).size(), 3u);
}

TEST(SceneModel, NormalsOfAPlane) {
  std::vector<Eigen::Vector3f> pts;
  std::vector<Rgb8> cols;
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) {
      pts.emplace_back(0.01f * x, 0.01f * y, 0.5f * 0.01f * x);
      cols.push_back({0, 0, 0});
    }
  const ScenePointModel model(pts, cols);
  const Eigen::Vector3f expected = Eigen::Vector3f(-0.5f, 0.0f, 1.0f).normalized();
  for (const auto& n : model.normals()) EXPECT_NEAR(std::abs(n.dot(expected)), 1.0f, 1e-4f);
}

TEST(SceneModel, BuilderVoxelCentroids) {
  SceneModelBuilder builder(0.1);
  builder.add({0.01, 0.01, 0.01}, {1, 0, 0});
  builder.add({0.03, 0.05, 0.07}, {0, 0, 1});
  builder.add({0.51, 0.01, 0.01}, {0, 1, 0});
  EXPECT_EQ(builder.voxel_count(), 2u);
  const ScenePointModel m = builder.build();
  ASSERT_EQ(m.size(), 2u);
  const auto it = std::find_if(m.positions().begin(), m.positions().end(),
                               [](const Eigen::Vector3f& p) { return p.x() < 0.1f; });
  ASSERT_NE(it, m.positions().end());
  EXPECT_LT((*it - Eigen::Vector3f(0.02f, 0.03f, 0.04f)).norm(), 1e-6f);
  const Rgb8 c = m.colours()[static_cast<std::size_t>(it - m.positions().begin())];
  EXPECT_EQ(c[0], c[2]);
  // Build order does not depend on insertion order.
  SceneModelBuilder other(0.1);
  other.add({0.51, 0.01, 0.01}, {0, 1, 0});
  other.add({0.03, 0.05, 0.07}, {0, 0, 1});
  other.add({0.01, 0.01, 0.01}, {1, 0, 0});
  EXPECT_EQ(other.build(), m);
}

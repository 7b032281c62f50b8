#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "scoreloc/errors.hpp"
#include "scoreloc/refinement.hpp"
#include "test_support.hpp"

using namespace scoreloc;

namespace {

// Every valid pixel of a frame, back-projected at its true pose.
ScenePointModel dense_model(const FrameRecord& f) {
  std::vector<Eigen::Vector3f> pts;
  std::vector<Rgb8> cols;
  for (int y = 0; y < f.depth.height(); ++y) {
    for (int x = 0; x < f.depth.width(); ++x) {
      if (!is_valid_depth(f.depth(x, y))) continue;
      pts.push_back(back_project({x, y}, f.depth, f.intrinsics, f.pose).cast<float>());
      cols.push_back(f.rgb(x, y));
    }
  }
  return ScenePointModel(std::move(pts), std::move(cols));
}

const FrameRecord& view() { return fixtures::small_world().train()[0]; }

const ScenePointModel& view_model() {
  static const ScenePointModel m = dense_model(view());
  return m;
}

RigidPosed tilt(const RigidPosed& p, double metres, double degrees) {
  const RigidPosed d(Eigen::AngleAxisd(degrees * M_PI / 180.0, Eigen::Vector3d(1, 2, -1).normalized())
                         .toRotationMatrix(),
                     Eigen::Vector3d(metres, 0, 0));
  return d * p;
}

}  // namespace

TEST(Icp, GroundTruthIsAFixedPoint) {
  const IcpResult r = icp_refine(view().pose, view().depth, view().intrinsics, view_model());
  const PoseError e = pose_error(r.pose, view().pose);
  EXPECT_LT(e.translation_error, 1e-6);
  EXPECT_LT(e.angular_error, 1e-4);
  EXPECT_TRUE(r.converged);
}

TEST(Icp, RecoversThreeCentimetresThreeDegrees) {
  const IcpResult r =
      icp_refine(tilt(view().pose, 0.03, 3.0), view().depth, view().intrinsics, view_model());
  const PoseError e = pose_error(r.pose, view().pose);
  EXPECT_LT(e.translation_error, 1e-3);
  EXPECT_LT(e.angular_error, 0.1);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.final_residual, r.initial_residual);
}

TEST(Icp, FarStartDoesNotConverge) {
  RigidPosed start = view().pose;
  start.translation += Eigen::Vector3d(1.0, 0.0, 0.0);
  try {
    const IcpResult r = icp_refine(start, view().depth, view().intrinsics, view_model());
    EXPECT_FALSE(r.converged);
  } catch (const EmptyOverlap&) {
  }
}

TEST(Icp, ResidualNeverIncreases) {
  const auto& world = fixtures::small_world();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> shift(0.0, 0.3), deg(0.0, 10.0);
  for (int i = 0; i < 8; ++i) {
    const FrameRecord& f = world.test()[i % world.test().size()];
    const RigidPosed start = tilt(f.pose, shift(rng), deg(rng));
    try {
      const IcpResult r = icp_refine(start, f.depth, f.intrinsics, world.reference_model());
      EXPECT_LE(r.final_residual, r.initial_residual);
      const auto live = sample_live_points(f.depth, f.intrinsics, IcpParams{}.pixel_stride);
      EXPECT_NEAR(r.initial_residual,
                  icp_residual(start, live, world.reference_model(), IcpParams{}.rejection_distance),
                  1e-9);
    } catch (const EmptyOverlap&) {
    }
  }
}

TEST(Render, EmptyModelIsAllInvalid) {
  const DepthImage d = render_depth({}, RigidPosed::Identity(), view().intrinsics);
  for (float v : d.data()) EXPECT_EQ(v, kInvalidDepth);
}

TEST(Render, SinglePointAtPrincipalPixel) {
  const CameraIntrinsics k{600.0, 600.0, 320.0, 240.0, 640, 480};
  const ScenePointModel m({Eigen::Vector3f(0, 0, 2)}, {Rgb8{1, 2, 3}});
  const DepthImage d = render_depth(m, RigidPosed::Identity(), k, 0);
  EXPECT_EQ(d(320, 240), 2.0f);
  std::size_t valid = 0;
  for (float v : d.data()) valid += is_valid_depth(v);
  EXPECT_EQ(valid, 1u);
}

TEST(Render, DepthIsCameraZ) {
  std::mt19937_64 rng(2);
  const CameraIntrinsics k{600.0, 600.0, 320.0, 240.0, 640, 480};
  const RigidPosed pose = fixtures::random_pose(rng);
  std::uniform_real_distribution<double> ux(-1.0, 1.0), uz(1.0, 6.0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d cam(ux(rng), ux(rng), uz(rng));
    const ScenePointModel m({(pose * cam).cast<float>()}, {Rgb8{}});
    const DepthImage d = render_depth(m, pose, k, 0);
    const Eigen::Vector2d uv = project(cam, k);
    const int x = static_cast<int>(std::lround(uv.x())), y = static_cast<int>(std::lround(uv.y()));
    if (x < 0 || y < 0 || x >= 640 || y >= 480) continue;
    EXPECT_NEAR(d(x, y), cam.z(), 1e-5);
  }
}

TEST(Render, GroundTruthMatchesSensor) {
  const auto& world = fixtures::small_world();
  const FrameRecord& f = world.test()[0];
  const DepthImage rendered = render_depth(world.reference_model(), f.pose, f.intrinsics);
  std::vector<double> diffs;
  for (int y = 0; y < f.depth.height(); ++y) {
    for (int x = 0; x < f.depth.width(); ++x) {
      if (is_valid_depth(rendered(x, y)) && is_valid_depth(f.depth(x, y))) {
        diffs.push_back(std::abs(rendered(x, y) - f.depth(x, y)));
      }
    }
  }
  ASSERT_GT(diffs.size(), 1000u);
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  EXPECT_LT(diffs[diffs.size() / 2], 0.01);
}

TEST(DepthScore, Arithmetic) {
  DepthImage a(3, 1), b(3, 1);
  a(0, 0) = 1.0f;
  b(0, 0) = 1.1f;
  a(1, 0) = 1.0f;
  b(1, 0) = 5.0f;  // truncated to 0.2
  a(2, 0) = 1.0f;  // b invalid here
  EXPECT_NEAR(depth_score(a, b), (0.1 + 0.2) / 2.0, 1e-6);
  EXPECT_TRUE(std::isinf(depth_score(a, DepthImage(3, 1))));
}

TEST(Ranking, SingleCandidate) {
  const auto& world = fixtures::small_world();
  const FrameRecord& f = world.test()[0];
  const std::vector<RigidPosed> one{f.pose};
  const RankedResult r = rank_hypotheses(one, f.depth, f.intrinsics, world.reference_model());
  EXPECT_EQ(r.candidate_index, 0u);
  EXPECT_TRUE(is_success(pose_error(r.pose, f.pose)));
}

TEST(Ranking, PicksTruthAmongDistantPoses) {
  const auto& world = fixtures::small_world();
  const FrameRecord& f = world.test()[1];
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RigidPosed> cands;
  for (int i = 0; i < 15; ++i) {
    RigidPosed p = tilt(f.pose, 0.0, 20.0 + 10.0 * i);
    p.translation = f.pose.translation + Eigen::Vector3d(u(rng), u(rng), 0.3 * u(rng)).normalized();
    cands.push_back(p);
  }
  cands.insert(cands.begin() + 7, f.pose);
  RankingOptions opts;
  opts.icp = false;
  const RankedResult r = rank_hypotheses(cands, f.depth, f.intrinsics, world.reference_model(), opts);
  EXPECT_EQ(r.candidate_index, 7u);
  EXPECT_EQ(r.pose.matrix(), cands[7].matrix());

  // Order of the candidates does not change the winner.
  std::vector<RigidPosed> shuffled = cands;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const RankedResult s =
      rank_hypotheses(shuffled, f.depth, f.intrinsics, world.reference_model(), opts);
  EXPECT_EQ(s.pose.matrix(), f.pose.matrix());
  EXPECT_EQ(s.depth_score, r.depth_score);
}

TEST(Ranking, ResultIsOneOfTheRefinedInputs) {
  const auto& world = fixtures::small_world();
  const FrameRecord& f = world.test()[2];
  std::vector<RigidPosed> cands;
  for (int i = 0; i < 4; ++i) cands.push_back(tilt(f.pose, 0.02 * i, 1.0 * i));
  const RankedResult r = rank_hypotheses(cands, f.depth, f.intrinsics, world.reference_model());
  ASSERT_LT(r.candidate_index, cands.size());
  const IcpResult refined =
      icp_refine(cands[r.candidate_index], f.depth, f.intrinsics, world.reference_model());
  EXPECT_EQ(r.pose.matrix(), refined.pose.matrix());
  EXPECT_EQ(r.icp_converged, refined.converged);
}

TEST(Ranking, NoOverlapIsAllFailed) {
  const auto& world = fixtures::small_world();
  const FrameRecord& f = world.test()[0];
  RigidPosed away = f.pose;
  away.translation += Eigen::Vector3d(100, 0, 0);
  const std::vector<RigidPosed> cands{away};
  EXPECT_THROW(rank_hypotheses(cands, f.depth, f.intrinsics, world.reference_model()), AllFailed);
}

#pragma once

#include <random>

#include <Eigen/Geometry>

#include "scoreloc/geometry.hpp"
#include "scoreloc/synthetic_world.hpp"

namespace scoreloc::fixtures {

inline RigidPosed random_pose(std::mt19937_64& rng, double max_translation = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return RigidPosed::FromQuaternion(q, Eigen::Vector3d(u(rng), u(rng), u(rng)));
}

/// Left-multiplies by a rotation of `degrees` about `axis` and adds `shift`.
inline RigidPosed perturb(const RigidPosed& pose, const Eigen::Vector3d& shift, double degrees,
                          const Eigen::Vector3d& axis = Eigen::Vector3d(1, 2, -1)) {
  const RigidPosed d(Eigen::AngleAxisd(degrees * M_PI / 180.0, axis.normalized()).toRotationMatrix(),
                     shift);
  RigidPosed out = d * pose;
  // Keep the camera centre offset exactly `shift` from the original.
  out.translation = pose.translation + shift;
  return out;
}

/// A small room shared by the tests that need rendered frames.
inline const SyntheticWorld& small_world() {
  static const SyntheticWorld world([] {
    WorldSpec spec;
    spec.point_count = 20000;
    spec.train_frames = 24;
    spec.test_frames = 6;
    return spec;
  }());
  return world;
}

}  // namespace scoreloc::fixtures

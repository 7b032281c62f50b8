#include "scoreloc/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <string>

namespace scoreloc {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw ConfigError("camera intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw ConfigError("camera intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw ConfigError("camera intrinsics: principal point outside the image");
  }
}

void normalise_depth(DepthImage& depth) {
  for (float& d : depth.data()) {
    if (!is_valid_depth(d)) d = kInvalidDepth;
  }
}

Rgb8 unit_to_rgb(const Eigen::Vector3d& c) {
  Rgb8 out{};
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(c[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

Eigen::Vector3d back_project_camera(const Eigen::Vector2d& pixel, double depth,
                                    const CameraIntrinsics& k) {
  return {depth * (pixel.x() - k.cx) / k.fx, depth * (pixel.y() - k.cy) / k.fy, depth};
}

Eigen::Vector3d back_project(const Eigen::Vector2i& pixel, const DepthImage& depth,
                             const CameraIntrinsics& k, const RigidPosed& pose) {
  if (!depth.contains(pixel.x(), pixel.y())) {
    throw OutOfBounds("pixel (" + std::to_string(pixel.x()) + ", " +
                      std::to_string(pixel.y()) + ") outside the depth image");
  }
  const float d = depth(pixel.x(), pixel.y());
  if (!is_valid_depth(d)) throw InvalidDepth("no valid depth at requested pixel");
  return pose * back_project_camera(pixel.cast<double>(), d, k);
}

Eigen::Vector2d project(const Eigen::Vector3d& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) throw BehindCamera("point is not in front of the camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

double rotation_angle_degrees(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

PoseError pose_error(const RigidPosed& a, const RigidPosed& b) {
  return {(a.translation - b.translation).norm(),
          rotation_angle_degrees(a.rotation * b.rotation.transpose())};
}

}  // namespace scoreloc

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "scoreloc/errors.hpp"

namespace scoreloc {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

/// Rigid transform in SE(3). Poses in this library map camera space to world
/// space unless stated otherwise.
template <typename Scalar>
struct RigidPose {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  RigidPose() = default;
  RigidPose(const Matrix3<Scalar>& r, const Vector3<Scalar>& t)
      : rotation(r), translation(t) {}

  static RigidPose Identity() { return {}; }

  static RigidPose FromMatrix(const Matrix4<Scalar>& m) {
    return {m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>()};
  }

  static RigidPose FromQuaternion(const Eigen::Quaternion<Scalar>& q,
                                  const Vector3<Scalar>& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  Eigen::Quaternion<Scalar> quaternion() const {
    return Eigen::Quaternion<Scalar>(rotation).normalized();
  }

  RigidPose inverse() const {
    const Matrix3<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  template <typename Derived>
  Vector3<Scalar> operator*(const Eigen::MatrixBase<Derived>& p) const {
    return rotation * p + translation;
  }

  RigidPose operator*(const RigidPose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  template <typename Other>
  RigidPose<Other> cast() const {
    return {rotation.template cast<Other>(), translation.template cast<Other>()};
  }
};

using RigidPosed = RigidPose<double>;

template <typename Scalar>
RigidPose<Scalar> compose(const RigidPose<Scalar>& a, const RigidPose<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
RigidPose<Scalar> invert(const RigidPose<Scalar>& p) {
  return p.inverse();
}

template <typename Scalar>
bool is_valid_rotation(const Matrix3<Scalar>& r, Scalar tolerance = Scalar(1e-9)) {
  const Matrix3<Scalar> residual = r.transpose() * r - Matrix3<Scalar>::Identity();
  return residual.cwiseAbs().maxCoeff() <= tolerance &&
         std::abs(r.determinant() - Scalar(1)) <= tolerance;
}

/// Left-multiplies `pose` by exp(twist); twist = (axis-angle, translation).
template <typename Scalar>
RigidPose<Scalar> apply_twist(const Eigen::Matrix<Scalar, 6, 1>& twist,
                              const RigidPose<Scalar>& pose) {
  const Vector3<Scalar> omega = twist.template head<3>();
  const Scalar angle = omega.norm();
  Matrix3<Scalar> r = Matrix3<Scalar>::Identity();
  if (angle > Scalar(0)) {
    r = Eigen::AngleAxis<Scalar>(angle, omega / angle).toRotationMatrix();
  }
  return RigidPose<Scalar>(r, twist.template tail<3>()) * pose;
}

/// Re-orthonormalises a rotation that has drifted numerically.
template <typename Scalar>
Matrix3<Scalar> orthonormalise(const Matrix3<Scalar>& r) {
  return Eigen::Quaternion<Scalar>(r).normalized().toRotationMatrix();
}

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws ConfigError if the invariants fx, fy > 0 and a principal point
  /// inside the image do not hold.
  void validate() const;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Rgb8 = std::array<std::uint8_t, 3>;
using ColourImage = Image<Rgb8>;

/// Depth in metres. Invalid pixels hold kInvalidDepth.
using DepthImage = Image<float>;

inline constexpr float kInvalidDepth = 0.0f;

inline bool is_valid_depth(float d) { return std::isfinite(d) && d > 0.0f; }

/// Rewrites every non-positive or non-finite depth to kInvalidDepth.
void normalise_depth(DepthImage& depth);

inline Eigen::Vector3d rgb_to_unit(const Rgb8& c) {
  return Eigen::Vector3d(c[0], c[1], c[2]) / 255.0;
}

Rgb8 unit_to_rgb(const Eigen::Vector3d& c);

/// D(u) K^-1 [u; 1] for a pixel with known depth.
Eigen::Vector3d back_project_camera(const Eigen::Vector2d& pixel, double depth,
                                    const CameraIntrinsics& k);

/// World point observed at integer pixel `pixel`: pose * (D(u) K^-1 [u; 1]).
/// Throws OutOfBounds or InvalidDepth.
Eigen::Vector3d back_project(const Eigen::Vector2i& pixel, const DepthImage& depth,
                             const CameraIntrinsics& k, const RigidPosed& pose);

/// Pinhole projection of a camera-space point. Throws BehindCamera if z <= 0.
Eigen::Vector2d project(const Eigen::Vector3d& p, const CameraIntrinsics& k);

struct PoseError {
  double translation_error = 0.0;  // metres
  double angular_error = 0.0;      // degrees
};

PoseError pose_error(const RigidPosed& a, const RigidPosed& b);

/// Angle of r in degrees, via the trace with the arccos argument clamped.
double rotation_angle_degrees(const Eigen::Matrix3d& r);

inline constexpr double kSuccessTranslation = 0.05;
inline constexpr double kSuccessAngleDegrees = 5.0;

/// Both thresholds must hold.
inline bool is_success(const PoseError& e, double max_translation = kSuccessTranslation,
                       double max_angle_degrees = kSuccessAngleDegrees) {
  return e.translation_error <= max_translation && e.angular_error <= max_angle_degrees;
}

}  // namespace scoreloc

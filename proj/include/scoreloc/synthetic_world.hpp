#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "scoreloc/geometry.hpp"
#include "scoreloc/io_formats.hpp"
#include "scoreloc/scene_model.hpp"

namespace scoreloc {

/// Parameters of a generated room: a box of size `extent` (x, y centred on the
/// origin, z from the floor up) with furniture against the walls and smaller
/// clutter boxes.
struct WorldSpec {
  std::uint64_t seed = 1;
  Eigen::Vector3d extent = Eigen::Vector3d(4.0, 4.0, 3.0);
  std::size_t point_count = 50000;
  std::size_t train_frames = 200;
  std::size_t test_frames = 50;
  int furniture_count = 3;
  // Small boxes on the walls and floor; they give every view geometric
  // structure that ICP and depth ranking can lock onto.
  int clutter_count = 60;

  // Training loop: radius and camera height, metres.
  double loop_radius = 0.9;
  double camera_height = 1.5;

  // Test offsets are spread evenly over these bins (metres); the last bin is
  // the open one.
  std::vector<double> test_offset_edges = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7};
  double test_max_rotation_degrees = 5.0;

  CameraIntrinsics intrinsics{554.2562584220407, 554.2562584220407, 320.0, 240.0, 640, 480};

  void validate() const;
};

class SyntheticWorld {
 public:
  explicit SyntheticWorld(const WorldSpec& spec);

  const WorldSpec& spec() const { return spec_; }

  /// Ray cast against the room and furniture: distance along the unit
  /// direction to the first surface, if any.
  std::optional<double> cast_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) const;

  /// Distance from p to the nearest room or furniture surface.
  double surface_distance(const Eigen::Vector3d& p) const;

  Eigen::Vector3d colour_at(const Eigen::Vector3d& p) const;

  /// Sensor frame at `pose`: ray-cast depth (float metres) and shaded colour.
  FrameRecord render_frame(const RigidPosed& pose, std::uint32_t index) const;

  /// Reference point model of point_count surface samples.
  const ScenePointModel& reference_model() const { return reference_; }

  const std::vector<FrameRecord>& train() const { return train_; }
  const std::vector<FrameRecord>& test() const { return test_; }

  /// Requested offset of each test pose from its parent training pose.
  const std::vector<double>& test_offsets() const { return test_offsets_; }

  /// Outward-looking camera on the training loop at angle theta.
  RigidPosed loop_pose(double theta) const;

  /// Furniture and clutter boxes.
  const std::vector<Eigen::AlignedBox3d>& boxes() const { return furniture_; }

 private:
  std::optional<double> cast_ray_among(const Eigen::Vector3d& origin,
                                       const Eigen::Vector3d& direction,
                                       std::span<const std::size_t> boxes) const;

  WorldSpec spec_;
  Eigen::AlignedBox3d room_;
  std::vector<Eigen::AlignedBox3d> furniture_;
  // Colour field: per channel, a sum of sinusoids.
  std::vector<Eigen::Vector3d> wave_dirs_;
  std::vector<double> wave_phases_;
  ScenePointModel reference_;
  std::vector<FrameRecord> train_;
  std::vector<FrameRecord> test_;
  std::vector<double> test_offsets_;
};

/// Camera-to-world rotation of a camera looking along `forward` with the
/// world z axis up in the image.
Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward);

}  // namespace scoreloc

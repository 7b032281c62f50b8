#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "scoreloc/geometry.hpp"
#include "scoreloc/kd_tree.hpp"

namespace scoreloc {

/// Coloured world-space point cloud with a nearest-neighbour index and
/// per-point normals. Both are derived on construction, so a model is always
/// consistent with its points.
class ScenePointModel {
 public:
  ScenePointModel() = default;
  ScenePointModel(std::vector<Eigen::Vector3f> positions, std::vector<Rgb8> colours);

  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }

  const std::vector<Eigen::Vector3f>& positions() const { return positions_; }
  const std::vector<Rgb8>& colours() const { return colours_; }
  const KdTree& index() const { return index_; }

  /// Unit normal of the plane fitted to each point's kNormalNeighbours
  /// nearest points (unoriented). Zero where fewer than three points exist.
  const std::vector<Eigen::Vector3f>& normals() const { return normals_; }

  static constexpr std::size_t kNormalNeighbours = 10;

  friend bool operator==(const ScenePointModel& a, const ScenePointModel& b) {
    return a.positions_ == b.positions_ && a.colours_ == b.colours_;
  }

 private:
  std::vector<Eigen::Vector3f> positions_;
  std::vector<Rgb8> colours_;
  KdTree index_;
  std::vector<Eigen::Vector3f> normals_;
};

/// Accumulates points into a voxel grid; each occupied voxel contributes the
/// centroid of its points (and their mean colour) to the built model.
class SceneModelBuilder {
 public:
  explicit SceneModelBuilder(double voxel_size = 0.01);

  void add(const Eigen::Vector3d& position, const Eigen::Vector3d& colour);
  std::size_t voxel_count() const { return voxels_.size(); }
  double voxel_size() const { return voxel_size_; }

  ScenePointModel build() const;

 private:
  struct Accumulator {
    Eigen::Vector3d position_sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d colour_sum = Eigen::Vector3d::Zero();
    std::uint32_t count = 0;
  };

  double voxel_size_;
  std::unordered_map<std::int64_t, Accumulator> voxels_;
};

}  // namespace scoreloc

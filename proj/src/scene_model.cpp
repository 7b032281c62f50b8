#include "scoreloc/scene_model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace scoreloc {

ScenePointModel::ScenePointModel(std::vector<Eigen::Vector3f> positions,
                                 std::vector<Rgb8> colours)
    : positions_(std::move(positions)), colours_(std::move(colours)) {
  if (positions_.size() != colours_.size()) {
    throw FormatError("scene model: position and colour counts differ");
  }
  for (const auto& p : positions_) {
    if (!p.allFinite()) throw FormatError("scene model: non-finite point position");
  }
  index_ = KdTree(positions_);

  normals_.assign(positions_.size(), Eigen::Vector3f::Zero());
  if (positions_.size() < 3) return;
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const auto nn = index_.k_nearest(positions_[i], kNormalNeighbours);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& n : nn) mean += positions_[n.index].cast<double>();
    mean /= static_cast<double>(nn.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& n : nn) {
      const Eigen::Vector3d d = positions_[n.index].cast<double>() - mean;
      scatter += d * d.transpose();
    }
    // Eigenvalues come sorted ascending: column 0 is the normal.
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
    normals_[i] = es.eigenvectors().col(0).cast<float>();
  }
}

SceneModelBuilder::SceneModelBuilder(double voxel_size) : voxel_size_(voxel_size) {
  if (!(voxel_size > 0.0)) throw ConfigError("scene model voxel size must be positive");
}

namespace {

// 21 bits per axis; covers +-2^20 voxels around the origin.
std::int64_t voxel_key(const Eigen::Vector3d& p, double voxel_size) {
  constexpr std::int64_t kOffset = 1 << 20;
  constexpr std::int64_t kMask = (std::int64_t{1} << 21) - 1;
  std::int64_t key = 0;
  for (int i = 0; i < 3; ++i) {
    const auto v = static_cast<std::int64_t>(std::floor(p[i] / voxel_size)) + kOffset;
    key = (key << 21) | (v & kMask);
  }
  return key;
}

}  // namespace

void SceneModelBuilder::add(const Eigen::Vector3d& position, const Eigen::Vector3d& colour) {
  Accumulator& acc = voxels_[voxel_key(position, voxel_size_)];
  acc.position_sum += position;
  acc.colour_sum += colour;
  ++acc.count;
}

ScenePointModel SceneModelBuilder::build() const {
  std::vector<std::int64_t> keys;
  keys.reserve(voxels_.size());
  for (const auto& [key, acc] : voxels_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  std::vector<Eigen::Vector3f> positions;
  std::vector<Rgb8> colours;
  positions.reserve(keys.size());
  colours.reserve(keys.size());
  for (std::int64_t key : keys) {
    const Accumulator& acc = voxels_.at(key);
    positions.push_back((acc.position_sum / acc.count).cast<float>());
    colours.push_back(unit_to_rgb(acc.colour_sum / acc.count));
  }
  return {std::move(positions), std::move(colours)};
}

}  // namespace scoreloc

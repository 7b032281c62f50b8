#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace scoreloc {

/// Static 3D kd-tree over float points with bounded nearest-neighbour and
/// radius queries. Node layout is implicit: the median of each index range is
/// the node, its halves are the children.
class KdTree {
 public:
  struct Neighbour {
    std::size_t index;      // into the point array the tree was built from
    float squared_distance;
  };

  KdTree() = default;
  explicit KdTree(std::span<const Eigen::Vector3f> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Nearest point strictly closer than max_distance, if any.
  std::optional<Neighbour> nearest(const Eigen::Vector3f& query,
                                   float max_distance = std::numeric_limits<float>::infinity()) const;

  /// Up to k nearest points, closest first.
  std::vector<Neighbour> k_nearest(const Eigen::Vector3f& query, std::size_t k) const;

  /// Appends the original indices of every point within radius of query.
  void radius_search(const Eigen::Vector3f& query, float radius,
                     std::vector<std::size_t>& out) const;

 private:
  static constexpr std::size_t kLeafSize = 8;

  void build(std::size_t begin, std::size_t end);
  void nearest_in(std::size_t begin, std::size_t end, const Eigen::Vector3f& q,
                  Neighbour& best) const;
  void k_nearest_in(std::size_t begin, std::size_t end, const Eigen::Vector3f& q, std::size_t k,
                    std::vector<Neighbour>& heap) const;
  void radius_in(std::size_t begin, std::size_t end, const Eigen::Vector3f& q, float r2,
                 std::vector<std::size_t>& out) const;

  std::vector<Eigen::Vector3f> points_;   // tree order
  std::vector<std::uint32_t> original_;   // tree order -> input order
  std::vector<std::uint8_t> axis_;        // split axis of the node at each median slot
};

}  // namespace scoreloc

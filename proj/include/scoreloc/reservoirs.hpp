#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace scoreloc {

struct ReservoirPoint {
  Eigen::Vector3d position;  // world, metres
  Eigen::Vector3d colour;    // RGB in [0, 1]
};

/// Summary statistics of one spatial cluster of reservoir points (a "mode").
struct ClusterSummary {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d colour_centroid = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();  // covariance^-1
  std::size_t size = 0;
};

struct ClustererParams {
  double sigma = 0.1;                 // clustererSigma
  double tau = 0.05;                  // clustererTau
  std::size_t max_cluster_count = 50; // maxClusterCount
  std::size_t min_cluster_size = 20;  // minClusterSize

  void validate() const;
};

/// Added to the covariance of clusters that are too small or rank deficient.
inline constexpr double kCovarianceRegulariser = 1e-6;

/// Summary of an arbitrary point set: mean position and colour, sample
/// covariance (n - 1 denominator), regularised when degenerate.
ClusterSummary summarise(std::span<const ReservoirPoint> points);

/// Quick-shift clustering: each point links to its nearest strictly denser
/// neighbour within tau (ties to the lowest index); the trees of the link
/// forest are the clusters. Returns per-point parent indices.
std::vector<std::size_t> quick_shift_parents(std::span<const ReservoirPoint> points,
                                             const ClustererParams& params);

/// Groups points into clusters, drops those below min_cluster_size, and keeps
/// the largest max_cluster_count. Each inner vector lists member indices.
std::vector<std::vector<std::size_t>> quick_shift_clusters(std::span<const ReservoirPoint> points,
                                                           const ClustererParams& params);

class Reservoir {
 public:
  explicit Reservoir(std::size_t capacity = 4096);

  /// Reservoir sampling: append while below capacity, otherwise replace a
  /// uniformly chosen slot with probability capacity / seen_count.
  void add_point(const ReservoirPoint& p, std::mt19937_64& rng);

  /// Recomputes the cluster summaries from the current contents.
  const std::vector<ClusterSummary>& recluster(const ClustererParams& params);

  /// Current summaries, largest cluster first; empty until the first recluster.
  const std::vector<ClusterSummary>& modes() const { return clusters_; }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return points_.size(); }
  std::uint64_t seen_count() const { return seen_count_; }
  std::uint64_t inserts_since_recluster() const { return inserts_since_recluster_; }
  const std::vector<ReservoirPoint>& points() const { return points_; }

  /// Rebuilds a reservoir from saved contents; clusters must be recomputed.
  static Reservoir Restore(std::size_t capacity, std::vector<ReservoirPoint> points,
                           std::uint64_t seen_count);

 private:
  std::size_t capacity_;
  std::vector<ReservoirPoint> points_;
  std::uint64_t seen_count_ = 0;
  std::uint64_t inserts_since_recluster_ = 0;
  std::vector<ClusterSummary> clusters_;
};

}  // namespace scoreloc

#include "scoreloc/reservoirs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "scoreloc/errors.hpp"

namespace scoreloc {

void ClustererParams::validate() const {
  if (!(sigma > 0.0) || !(tau > 0.0) || max_cluster_count == 0 || min_cluster_size == 0) {
    throw ConfigError("clusterer parameters must all be positive");
  }
}

ClusterSummary summarise(std::span<const ReservoirPoint> points) {
  ClusterSummary s;
  s.size = points.size();
  if (points.empty()) return s;

  const double n = static_cast<double>(points.size());
  for (const auto& p : points) {
    s.centroid += p.position;
    s.colour_centroid += p.colour;
  }
  s.centroid /= n;
  s.colour_centroid /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p.position - s.centroid;
    cov.noalias() += d * d.transpose();
  }
  if (points.size() > 1) cov /= (n - 1.0);

  bool degenerate = points.size() < 4;
  if (!degenerate) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov, Eigen::EigenvaluesOnly);
    degenerate = eig.eigenvalues().minCoeff() < kCovarianceRegulariser;
  }
  if (degenerate) cov += kCovarianceRegulariser * Eigen::Matrix3d::Identity();
  s.covariance = cov;
  s.information = cov.inverse();
  return s;
}

std::vector<std::size_t> quick_shift_parents(std::span<const ReservoirPoint> points,
                                             const ClustererParams& params) {
  const std::size_t n = points.size();
  std::vector<double> xs(n), ys(n), zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i].position.x();
    ys[i] = points[i].position.y();
    zs[i] = points[i].position.z();
  }

  // Gaussian kernel density; self term included.
  const double inv_two_sigma2 = 1.0 / (2.0 * params.sigma * params.sigma);
  std::vector<double> density(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = xs[i] - xs[j], dy = ys[i] - ys[j], dz = zs[i] - zs[j];
      const double k = std::exp(-(dx * dx + dy * dy + dz * dz) * inv_two_sigma2);
      acc += k;
      density[j] += k;
    }
    density[i] += acc;
  }

  // Link each point to its nearest denser neighbour within tau. Partners of a
  // point are visited in increasing index order, so a strict comparison keeps
  // the lowest index on distance ties.
  const double tau2 = params.tau * params.tau;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = xs[i] - xs[j], dy = ys[i] - ys[j], dz = zs[i] - zs[j];
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 > tau2) continue;
      if (density[j] > density[i] && d2 < best[i]) {
        best[i] = d2;
        parent[i] = j;
      } else if (density[i] > density[j] && d2 < best[j]) {
        best[j] = d2;
        parent[j] = i;
      }
    }
  }
  return parent;
}

std::vector<std::vector<std::size_t>> quick_shift_clusters(std::span<const ReservoirPoint> points,
                                                           const ClustererParams& params) {
  const std::vector<std::size_t> parent = quick_shift_parents(points, params);
  const std::size_t n = parent.size();

  // Density strictly increases along links, so the forest is acyclic.
  std::vector<std::size_t> root(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    root[i] = r;
  }

  std::vector<std::vector<std::size_t>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) by_root[root[i]].push_back(i);

  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t r = 0; r < n; ++r) {
    if (by_root[r].size() >= params.min_cluster_size) clusters.push_back(std::move(by_root[r]));
  }
  // Largest first; equal sizes keep root order.
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  if (clusters.size() > params.max_cluster_count) clusters.resize(params.max_cluster_count);
  return clusters;
}

Reservoir::Reservoir(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("reservoirCapacity must be positive");
}

void Reservoir::add_point(const ReservoirPoint& p, std::mt19937_64& rng) {
  ++seen_count_;
  ++inserts_since_recluster_;
  if (points_.size() < capacity_) {
    points_.push_back(p);
    return;
  }
  std::uniform_int_distribution<std::uint64_t> slot(0, seen_count_ - 1);
  const std::uint64_t k = slot(rng);
  if (k < capacity_) points_[k] = p;
}

const std::vector<ClusterSummary>& Reservoir::recluster(const ClustererParams& params) {
  const auto clusters = quick_shift_clusters(points_, params);
  clusters_.clear();
  clusters_.reserve(clusters.size());
  std::vector<ReservoirPoint> members;
  for (const auto& c : clusters) {
    members.clear();
    for (std::size_t i : c) members.push_back(points_[i]);
    clusters_.push_back(summarise(members));
  }
  inserts_since_recluster_ = 0;
  return clusters_;
}

Reservoir Reservoir::Restore(std::size_t capacity, std::vector<ReservoirPoint> points,
                             std::uint64_t seen_count) {
  if (points.size() > capacity || seen_count < points.size()) {
    throw FormatError("reservoir contents inconsistent with its capacity");
  }
  Reservoir r(capacity);
  r.points_ = std::move(points);
  r.seen_count_ = seen_count;
  return r;
}

}  // namespace scoreloc

#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "scoreloc/geometry.hpp"
#include "scoreloc/scene_model.hpp"

namespace scoreloc {

/// Z-buffer point splat of the model seen from `pose` (camera -> world). Each
/// point covers a (2r+1)^2 pixel square; the nearest depth wins. Uncovered
/// pixels hold kInvalidDepth.
DepthImage render_depth(const ScenePointModel& model, const RigidPosed& pose,
                        const CameraIntrinsics& k, int splat_radius = 1);

struct IcpParams {
  int max_iterations = 20;
  double rejection_distance = 0.1;     // metres
  double relative_tolerance = 1e-4;
  double convergence_residual = 0.02;  // metres; mean over matched points
  int pixel_stride = 16;               // live depth subsampling
  // Pairs further apart than this multiple of the median pair distance are
  // also dropped (never below min_gate); 0 disables.
  double adaptive_rejection = 0.0;
  double min_gate = 0.01;
};

struct IcpResult {
  RigidPosed pose;
  bool converged = false;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  int iterations = 0;
};

/// Camera-space points of every stride-th valid depth pixel.
std::vector<Eigen::Vector3d> sample_live_points(const DepthImage& depth, const CameraIntrinsics& k,
                                                int stride);

/// Mean nearest-neighbour distance of the posed live points, rejected
/// matches counted at the rejection distance. Returns the match count via
/// `matches`.
double icp_residual(const RigidPosed& pose, std::span<const Eigen::Vector3d> live,
                    const ScenePointModel& model, double rejection_distance,
                    std::size_t* matches = nullptr);

/// Point-to-point ICP. The returned pose is the best one visited, so the
/// residual never increases. Throws EmptyOverlap if nothing matches at the
/// initial pose.
IcpResult icp_refine(const RigidPosed& initial, const DepthImage& live_depth,
                     const CameraIntrinsics& k, const ScenePointModel& model,
                     const IcpParams& params = {});

inline constexpr double kDepthScoreTruncation = 0.2;

/// Mean of min(|rendered - live|, truncation) over pixels valid in both;
/// +inf when there is no such pixel.
double depth_score(const DepthImage& rendered, const DepthImage& live,
                   double truncation = kDepthScoreTruncation);

struct RankingOptions {
  bool icp = true;
  IcpParams icp_params;
  int splat_radius = 1;
};

struct RankedResult {
  RigidPosed pose;
  double depth_score = 0.0;
  bool icp_converged = false;
  std::size_t candidate_index = 0;
};

/// Refines each candidate, renders it and keeps the lowest depth score; ties
/// go to the earlier candidate. Throws AllFailed if no candidate overlaps the
/// live depth.
RankedResult rank_hypotheses(std::span<const RigidPosed> candidates, const DepthImage& live_depth,
                             const CameraIntrinsics& k, const ScenePointModel& model,
                             const RankingOptions& options = {});

}  // namespace scoreloc

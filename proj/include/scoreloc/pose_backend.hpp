#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scoreloc/geometry.hpp"
#include "scoreloc/grid_adaptation.hpp"
#include "scoreloc/kabsch.hpp"
#include "scoreloc/prediction_grid.hpp"
#include "scoreloc/reservoirs.hpp"

namespace scoreloc {

/// A sampled pixel, its back-projected camera-space point and the candidate
/// world points (modes) it may correspond to.
struct Correspondence {
  Eigen::Vector2i pixel = Eigen::Vector2i::Zero();
  Eigen::Vector3d camera_point = Eigen::Vector3d::Zero();
  Eigen::Vector3d colour = Eigen::Vector3d::Zero();  // pixel colour in [0, 1]
  std::span<const ClusterSummary> modes;
};

/// Correspondences plus any mode storage they refer to. Modes either live in
/// reservoirs (which must outlive the set) or in `owned_modes`. Move-only so
/// that the spans stay valid.
class CorrespondenceSet {
 public:
  CorrespondenceSet() = default;
  CorrespondenceSet(CorrespondenceSet&&) = default;
  CorrespondenceSet& operator=(CorrespondenceSet&&) = default;
  CorrespondenceSet(const CorrespondenceSet&) = delete;
  CorrespondenceSet& operator=(const CorrespondenceSet&) = delete;

  std::vector<Correspondence> items;
  std::vector<ClusterSummary> owned_modes;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::span<const Correspondence> view() const { return items; }
};

/// One correspondence per grid cell that has a reservoir index, a valid depth
/// at its source pixel, and at least one mode.
CorrespondenceSet build_correspondences(const ReservoirIndexImage& index_image,
                                        const DepthImage& depth, const ColourImage& rgb,
                                        const CameraIntrinsics& k,
                                        std::span<const Reservoir> reservoirs);

/// Isotropic covariance given to raw predictions, which carry no cluster
/// statistics.
inline constexpr double kRawPredictionVariance = 0.05 * 0.05;

/// Bypasses adaptation: each valid prediction becomes the single mode of its
/// pixel.
CorrespondenceSet build_raw_correspondences(const PredictionGrid& pred, const DepthImage& depth,
                                            const ColourImage& rgb, const CameraIntrinsics& k);

struct RansacParams {
  std::size_t max_pose_candidates = 1024;                // N_max
  std::size_t max_pose_candidates_after_cull = 64;       // N_cull
  std::size_t inliers_per_iteration = 512;               // eta
  std::size_t max_candidate_generation_iterations = 6000;
  double min_squared_distance_between_sampled_modes = 0.09;
  double max_translation_error_for_correct_pose = 0.05;
  bool pose_update = true;
  bool use_prediction_covariance = true;
  std::size_t final_count = 16;

  // Hypothesis checks.
  double rigidity_tolerance = 0.05;  // metres
  double colour_tolerance = 0.3;     // per channel, colours in [0, 1]

  void validate() const;

  /// Residual truncation for the energy and the LM inlier gate.
  double energy_truncation() const { return 2.0 * max_translation_error_for_correct_pose; }
};

/// A camera point paired with the world mode it was matched to.
struct InlierPair {
  Eigen::Vector3d camera_point;
  Eigen::Vector3d world_point;
  Eigen::Matrix3d information;  // inverse mode covariance
};

struct PoseHypothesis {
  RigidPosed pose;  // camera -> world
  double energy = 0.0;
  std::vector<InlierPair> inliers;
};

/// min over modes of |pose * x^C - centroid|, truncated. best_mode receives
/// the arg-min.
double correspondence_residual(const RigidPosed& pose, const Correspondence& c, double truncation,
                               std::size_t* best_mode = nullptr);

/// Mean truncated residual over the listed correspondences.
double hypothesis_energy(const RigidPosed& pose, std::span<const Correspondence> cs,
                         std::span<const std::size_t> sample, double truncation);

struct GenerationResult {
  std::vector<PoseHypothesis> hypotheses;
  std::size_t attempts = 0;
};

/// Samples three (pixel, mode) pairs per attempt, applies the colour,
/// mode-separation and rigidity checks, and solves Kabsch for survivors.
/// Stops at max_pose_candidates hypotheses or after
/// max_candidate_generation_iterations attempts. Throws NoHypotheses.
GenerationResult generate_hypotheses(std::span<const Correspondence> cs, const RansacParams& params,
                                     std::mt19937_64& rng);

/// Scores every hypothesis on inliers_per_iteration sampled correspondences
/// and keeps the best max_pose_candidates_after_cull (lowest energy first).
std::vector<PoseHypothesis> score_and_cull(std::vector<PoseHypothesis> hs,
                                           std::span<const Correspondence> cs,
                                           const RansacParams& params, std::mt19937_64& rng);

struct LmOptions {
  double initial_lambda = 1e-3;
  int max_iterations = 20;
  double step_tolerance = 1e-6;
  double huber_euclidean = 0.05;  // metres
  double huber_whitened = 3.0;    // standard deviations
  double energy_truncation = 0.1;
};

struct LmResult {
  PoseHypothesis hypothesis;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool singular = false;  // normal equations failed; input pose returned
};

/// Robust objective minimised by lm_refine.
double lm_objective(const RigidPosed& pose, std::span<const InlierPair> inliers,
                    bool use_covariance, const LmOptions& options);

/// Levenberg-Marquardt over a left-multiplied twist. Only steps that lower
/// the objective are accepted, so the result is never worse than the input.
LmResult lm_refine(const PoseHypothesis& h, std::span<const InlierPair> inliers,
                   bool use_covariance, const LmOptions& options = {});

struct RansacTimings {
  double inlier_sampling_ms = 0.0;
  double optimisation_ms = 0.0;
};

/// Halves the hypothesis set on freshly sampled inliers (optionally
/// LM-refining survivors each round) until final_count remain; pads by
/// repeating the best hypotheses if fewer were supplied. Output is sorted by
/// energy and has exactly final_count entries.
std::vector<PoseHypothesis> preemptive_ransac(std::vector<PoseHypothesis> hs,
                                              std::span<const Correspondence> cs,
                                              const RansacParams& params, std::mt19937_64& rng,
                                              RansacTimings* timings = nullptr,
                                              std::size_t* rounds = nullptr);

}  // namespace scoreloc

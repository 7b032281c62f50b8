#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include <Eigen/Geometry>

#include "scoreloc/io_formats.hpp"
#include "scoreloc/prediction_grid.hpp"

namespace scoreloc {

/// Stand-in for a scene coordinate network trained on another scene: ground
/// truth world points are pushed through an invertible affine warp, perturbed
/// with isotropic Gaussian noise, and replaced by uniform outliers with
/// probability outlier_fraction.
struct SyntheticPredictorConfig {
  Eigen::Matrix3d warp_linear = Eigen::Matrix3d::Identity();
  Eigen::Vector3d warp_offset = Eigen::Vector3d::Zero();
  double noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  Eigen::AlignedBox3d outlier_box{Eigen::Vector3d(-2, -2, 0), Eigen::Vector3d(2, 2, 3)};
  std::uint64_t seed = 0;

  void validate() const;

  Eigen::Vector3d warp(const Eigen::Vector3d& p) const { return warp_linear * p + warp_offset; }

  /// Operator (spectral) norm of the linear part of the warp.
  double warp_lipschitz() const;
};

/// Derives the independent RNG stream seed for one frame.
std::uint64_t frame_stream_seed(std::uint64_t seed, std::uint32_t frame_index);

PredictionGrid predict_synthetic(const FrameRecord& frame, const SyntheticPredictorConfig& config);

/// Replays stored predictions from a directory of prediction files.
PredictionGrid predict_from_file(std::uint32_t frame_index, const std::filesystem::path& store);

/// Source of prediction grids for the relocaliser.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictionGrid predict(const FrameRecord& frame) const = 0;
};

class SyntheticPredictor final : public Predictor {
 public:
  explicit SyntheticPredictor(SyntheticPredictorConfig config);
  PredictionGrid predict(const FrameRecord& frame) const override;
  const SyntheticPredictorConfig& config() const { return config_; }

 private:
  SyntheticPredictorConfig config_;
};

class FilePredictor final : public Predictor {
 public:
  explicit FilePredictor(std::filesystem::path store) : store_(std::move(store)) {}
  PredictionGrid predict(const FrameRecord& frame) const override;

 private:
  std::filesystem::path store_;
};

}  // namespace scoreloc

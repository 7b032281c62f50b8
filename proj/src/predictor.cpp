#include "scoreloc/predictor.hpp"

#include <random>

#include <Eigen/SVD>

namespace scoreloc {

void SyntheticPredictorConfig::validate() const {
  if (!(std::abs(warp_linear.determinant()) > 1e-6)) {
    throw ConfigError("synthetic predictor: warp must be invertible");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic predictor: noise_sigma must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw ConfigError("synthetic predictor: outlier_fraction must lie in [0, 1]");
  }
  if (outlier_fraction > 0.0 && outlier_box.isEmpty()) {
    throw ConfigError("synthetic predictor: outlier box is empty");
  }
}

double SyntheticPredictorConfig::warp_lipschitz() const {
  return Eigen::JacobiSVD<Eigen::Matrix3d>(warp_linear).singularValues()(0);
}

std::uint64_t frame_stream_seed(std::uint64_t seed, std::uint32_t frame_index) {
  // splitmix64 finaliser over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t{frame_index} + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PredictionGrid predict_synthetic(const FrameRecord& frame, const SyntheticPredictorConfig& config) {
  PredictionGrid grid = PredictionGrid::ForImage(frame.depth.width(), frame.depth.height());
  std::mt19937_64 rng(frame_stream_seed(config.seed, frame.index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Eigen::Vector3d box_min = config.outlier_box.min();
  const Eigen::Vector3d box_size = config.outlier_box.sizes();

  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const Eigen::Vector2i u = PredictionGrid::source_pixel(x, y);
      if (!is_valid_depth(frame.depth(u.x(), u.y()))) continue;
      const Eigen::Vector3d world = back_project(u, frame.depth, frame.intrinsics, frame.pose);

      Eigen::Vector3d p;
      if (unit(rng) < config.outlier_fraction) {
        for (int k = 0; k < 3; ++k) p[k] = box_min[k] + unit(rng) * box_size[k];
      } else {
        p = config.warp(world);
        if (config.noise_sigma > 0.0) {
          for (int k = 0; k < 3; ++k) p[k] += config.noise_sigma * gauss(rng);
        }
      }
      grid.set(x, y, p.cast<float>());
    }
  }
  return grid;
}

PredictionGrid predict_from_file(std::uint32_t frame_index, const std::filesystem::path& store) {
  const auto path = prediction_path(store, frame_index);
  if (!std::filesystem::exists(path)) {
    throw MissingPrediction("no stored prediction for frame " + std::to_string(frame_index));
  }
  PredictionFile file = load_predictions(path);
  if (file.frame_index != frame_index) {
    throw FormatError(path.string() + ": frame index mismatch");
  }
  return std::move(file.grid);
}

SyntheticPredictor::SyntheticPredictor(SyntheticPredictorConfig config) : config_(std::move(config)) {
  config_.validate();
}

PredictionGrid SyntheticPredictor::predict(const FrameRecord& frame) const {
  return predict_synthetic(frame, config_);
}

PredictionGrid FilePredictor::predict(const FrameRecord& frame) const {
  PredictionGrid grid = predict_from_file(frame.index, store_);
  const PredictionGrid expected = PredictionGrid::ForImage(frame.rgb.width(), frame.rgb.height());
  if (grid.width != expected.width || grid.height != expected.height) {
    throw FormatError("stored prediction grid does not match the frame size");
  }
  return grid;
}

}  // namespace scoreloc

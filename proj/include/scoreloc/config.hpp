#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "scoreloc/grid_adaptation.hpp"
#include "scoreloc/pose_backend.hpp"
#include "scoreloc/predictor.hpp"
#include "scoreloc/refinement.hpp"
#include "scoreloc/reservoirs.hpp"
#include "scoreloc/synthetic_world.hpp"

namespace scoreloc {

struct RelocaliserConfig {
  GridConfig grid;
  std::int32_t reservoir_count = 131072;  // N
  std::size_t reservoir_capacity = 4096;
  ClustererParams clusterer;
  RansacParams ransac;
  IcpParams icp;
  bool icp_enabled = true;
  bool ranking_enabled = true;
  double model_voxel_size = 0.01;
  std::size_t model_frame_stride = 10;  // every Kth training frame feeds the scene model
  std::uint64_t seed = 42;

  /// Published indoor / outdoor settings (cell size 10 cm / 1 m, C l = 1 km).
  static RelocaliserConfig Indoor();
  static RelocaliserConfig Outdoor();

  void validate() const;
};

/// Everything a harness run needs: the relocaliser, the synthetic world and
/// the synthetic predictor used for training and testing.
struct HarnessConfig {
  RelocaliserConfig relocaliser = RelocaliserConfig::Indoor();
  WorldSpec world;
  SyntheticPredictorConfig predictor = DefaultPredictor();

  /// Identity warp, 5 cm noise, 30% outliers.
  static SyntheticPredictorConfig DefaultPredictor();

  void validate() const;
};

/// Applies one `key = value` setting. Relocaliser keys use the published
/// hyperparameter names (clustererSigma, maxPoseCandidates, ...). Throws
/// ConfigError for unknown keys or malformed values.
void apply_setting(HarnessConfig& config, const std::string& key, const std::string& value);

/// Parses key-value text: one `key = value` per line, `#` starts a comment.
HarnessConfig parse_config(const std::string& text, HarnessConfig base = {});
HarnessConfig load_config(const std::filesystem::path& path);

/// Serialises every setting in a form parse_config reads back exactly.
std::string format_config(const HarnessConfig& config);

}  // namespace scoreloc

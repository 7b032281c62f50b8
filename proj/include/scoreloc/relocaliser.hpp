#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "scoreloc/config.hpp"
#include "scoreloc/grid_adaptation.hpp"
#include "scoreloc/io_formats.hpp"
#include "scoreloc/predictor.hpp"
#include "scoreloc/reservoirs.hpp"
#include "scoreloc/scene_model.hpp"

namespace scoreloc {

/// Wall-clock milliseconds per relocalisation stage.
struct StageTimings {
  static constexpr std::array<std::string_view, 6> kNames = {
      "hypothesis_generation", "hypothesis_pruning", "inlier_sampling_and_energy",
      "optimisation",          "hypothesis_ranking", "total"};

  std::array<double, 6> ms{};

  double& operator[](std::size_t i) { return ms[i]; }
  double operator[](std::size_t i) const { return ms[i]; }
  double stage_sum() const { return ms[0] + ms[1] + ms[2] + ms[3] + ms[4]; }
};

class RelocaliserState {
 public:
  explicit RelocaliserState(RelocaliserConfig config);

  const RelocaliserConfig& config() const { return config_; }
  const ReservoirLookupTable& table() const { return table_; }
  const std::vector<Reservoir>& reservoirs() const { return reservoirs_; }
  const ScenePointModel& scene_model() const { return model_; }
  const std::vector<RigidPosed>& train_poses() const { return train_poses_; }
  std::size_t frames_trained() const { return train_poses_.size(); }

  /// Online training: predict, adapt, and add every back-projected world point
  /// to the reservoir its predicted cell maps to. Every model_frame_stride-th
  /// frame also feeds the scene model. Reservoirs touched by the call are
  /// reclustered before it returns.
  void train_online(std::span<const FrameRecord> frames, const Predictor& predictor);

  void save(const std::filesystem::path& path) const;
  static RelocaliserState Load(const std::filesystem::path& path);

  /// Relocaliser settings that do not change what training stored (RANSAC,
  /// ICP and ranking toggles) may be swapped between runs.
  void set_test_settings(const RelocaliserConfig& config);

 private:
  RelocaliserConfig config_;
  ReservoirLookupTable table_;
  std::vector<Reservoir> reservoirs_;
  SceneModelBuilder builder_;
  ScenePointModel model_;
  std::vector<RigidPosed> train_poses_;
  std::mt19937_64 rng_;
};

struct RelocaliseOptions {
  bool raw = false;  // bypass reservoirs and use predictions as world points
};

struct RelocaliseResult {
  RigidPosed pose;
  StageTimings timings;
  std::size_t correspondences = 0;
  std::size_t generation_attempts = 0;
};

/// Full test-time chain: predict, adapt (read-only), build correspondences,
/// generate, cull, preemptive RANSAC, then ICP and ranking. Throws
/// RelocalisationFailed when no hypothesis can be generated or none survives
/// ranking. The RNG stream depends only on the config seed and frame index.
RelocaliseResult relocalise(const RelocaliserState& state, const FrameRecord& frame,
                            const Predictor& predictor, const RelocaliseOptions& options = {});

}  // namespace scoreloc

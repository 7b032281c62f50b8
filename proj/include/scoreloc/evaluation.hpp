#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scoreloc/config.hpp"
#include "scoreloc/relocaliser.hpp"
#include "scoreloc/synthetic_world.hpp"

namespace scoreloc {

struct FrameOutcome {
  std::uint32_t index = 0;
  std::optional<RigidPosed> pose;  // empty when relocalisation failed
  RigidPosed ground_truth;
  PoseError error;                 // +inf components for failed frames
  bool success = false;
  std::string failure;
  std::optional<StageTimings> timings;
  std::size_t correspondences = 0;
};

struct EvalReport {
  std::vector<FrameOutcome> frames;
  double success_rate = 0.0;
  double median_translation = 0.0;  // metres
  double median_rotation = 0.0;     // degrees
  StageTimings mean_timings;        // over frames that produced a pose
};

/// Median by selection; the mean of the two middle values for even sizes.
double median(std::vector<double> values);

/// Success rate and medians over every outcome; failures count as failures.
EvalReport make_report(std::vector<FrameOutcome> frames);

EvalReport evaluate(const RelocaliserState& state, std::span<const FrameRecord> test,
                    const Predictor& predictor, const RelocaliseOptions& options = {});

struct NoveltyDistance {
  double translation = 0.0;  // metres to the nearest training position
  double rotation = 0.0;     // degrees to the nearest training orientation
};

/// Nearest training pose by translation and, separately, by rotation.
std::vector<NoveltyDistance> novelty_distances(std::span<const RigidPosed> train,
                                               std::span<const RigidPosed> test);

struct NoveltyBinning {
  std::vector<double> translation_edges;  // metres, increasing
  std::vector<double> rotation_edges;     // degrees, increasing
  std::vector<std::size_t> bin_of;        // per test frame; edges.size() is the open bin
  std::vector<std::size_t> counts;
  std::vector<std::size_t> successes;

  std::size_t bin_count() const { return translation_edges.size() + 1; }
  double success_rate(std::size_t bin) const {
    return counts[bin] == 0 ? 0.0 : static_cast<double>(successes[bin]) / counts[bin];
  }
  std::string label(std::size_t bin) const;
};

inline const std::vector<double> kDefaultNoveltyTranslationEdges = {0.1, 0.2, 0.3, 0.4, 0.5};
inline const std::vector<double> kDefaultNoveltyRotationEdges = {10, 20, 30, 40, 50};

/// A test frame falls in the first bin whose translation AND rotation limits
/// both hold; frames beyond the last limits go to the open bin.
NoveltyBinning novelty_binning(std::span<const RigidPosed> train, std::span<const RigidPosed> test,
                               std::span<const bool> success,
                               std::vector<double> translation_edges = kDefaultNoveltyTranslationEdges,
                               std::vector<double> rotation_edges = kDefaultNoveltyRotationEdges);

std::string to_csv(const NoveltyBinning& binning);

/// Probability that an inlier prediction with isotropic noise sigma lands
/// within `radius` of the truth (chi distribution with three dof).
double inlier_good_probability(double sigma, double radius = 0.1);

/// Outlier fraction that makes the expected share of predictions within
/// `radius` of the truth equal `good_fraction` (clamped to [0, 1]).
double outlier_fraction_for_good_fraction(double good_fraction, double sigma, double radius = 0.1);

/// Share of valid predictions within radius of the warped ground truth.
double measured_good_fraction(std::span<const FrameRecord> frames,
                              const SyntheticPredictorConfig& predictor, double radius = 0.1);

/// Share of correspondences with a mode within radius of the ground-truth
/// world point.
double correspondence_good_fraction(const RelocaliserState& state,
                                    std::span<const FrameRecord> frames, const Predictor& predictor,
                                    bool raw, double radius = 0.1);

struct ReservoirSweepRow {
  std::int32_t reservoir_count = 0;
  std::size_t occupied_cells = 0;
  std::int32_t assigned_reservoirs = 0;
  double success_rate = 0.0;
  double median_translation = 0.0;
  double median_rotation = 0.0;
};

/// Cells touched by training with the given predictor (no sharing limit).
std::size_t count_occupied_cells(std::span<const FrameRecord> train, const Predictor& predictor,
                                 const GridConfig& grid);

std::vector<ReservoirSweepRow> sweep_reservoir_count(const HarnessConfig& config,
                                                     const SyntheticWorld& world,
                                                     std::span<const std::int32_t> counts);

std::string to_csv(std::span<const ReservoirSweepRow> rows);

struct QualityToggles {
  bool pose_update = true;
  bool icp = true;
  bool ranking = true;
};

struct QualitySweepRow {
  double target_good_fraction = 0.0;
  double outlier_fraction = 0.0;
  double measured_good_fraction = 0.0;
  QualityToggles toggles;
  double adapted_success = 0.0;
  double raw_success = 0.0;
  double adapted_correspondence_good = 0.0;
  double raw_correspondence_good = 0.0;
};

/// Trains once with config.predictor, then relocalises the test frames with
/// predictors whose outlier fraction hits each target good fraction, in both
/// adapted and raw mode, for every toggle set.
std::vector<QualitySweepRow> sweep_correspondence_quality(RelocaliserState& trained,
                                                          const HarnessConfig& config,
                                                          const SyntheticWorld& world,
                                                          std::span<const double> good_fractions,
                                                          std::span<const QualityToggles> toggles);

std::string to_csv(std::span<const QualitySweepRow> rows);

/// JSON report: per-frame poses, errors and timings plus the summary.
std::string to_json(const EvalReport& report);

}  // namespace scoreloc

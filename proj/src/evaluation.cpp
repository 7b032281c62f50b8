#include "scoreloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "scoreloc/errors.hpp"
#include "scoreloc/kd_tree.hpp"

namespace scoreloc {

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

EvalReport make_report(std::vector<FrameOutcome> frames) {
  EvalReport r;
  r.frames = std::move(frames);
  std::vector<double> t, a;
  std::size_t successes = 0, timed = 0;
  for (const auto& f : r.frames) {
    t.push_back(f.error.translation_error);
    a.push_back(f.error.angular_error);
    if (f.success) ++successes;
    if (f.timings) {
      ++timed;
      for (std::size_t i = 0; i < f.timings->ms.size(); ++i) r.mean_timings[i] += (*f.timings)[i];
    }
  }
  if (!r.frames.empty()) {
    r.success_rate = static_cast<double>(successes) / static_cast<double>(r.frames.size());
    r.median_translation = median(t);
    r.median_rotation = median(a);
  }
  if (timed > 0) {
    for (double& ms : r.mean_timings.ms) ms /= static_cast<double>(timed);
  }
  return r;
}

EvalReport evaluate(const RelocaliserState& state, std::span<const FrameRecord> test,
                    const Predictor& predictor, const RelocaliseOptions& options) {
  std::vector<FrameOutcome> out;
  out.reserve(test.size());
  for (const auto& frame : test) {
    FrameOutcome o;
    o.index = frame.index;
    o.ground_truth = frame.pose;
    o.error = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    try {
      const RelocaliseResult r = relocalise(state, frame, predictor, options);
      o.pose = r.pose;
      o.error = pose_error(r.pose, frame.pose);
      o.success = is_success(o.error);
      o.timings = r.timings;
      o.correspondences = r.correspondences;
    } catch (const RelocalisationFailed& e) {
      o.failure = e.what();
    }
    out.push_back(std::move(o));
  }
  return make_report(std::move(out));
}

std::vector<NoveltyDistance> novelty_distances(std::span<const RigidPosed> train,
                                               std::span<const RigidPosed> test) {
  std::vector<NoveltyDistance> out(test.size());
  if (train.empty()) {
    for (auto& d : out) d = {std::numeric_limits<double>::infinity(), 180.0};
    return out;
  }
  std::vector<Eigen::Vector3f> positions;
  for (const auto& p : train) positions.push_back(p.translation.cast<float>());
  const KdTree tree(positions);
  for (std::size_t i = 0; i < test.size(); ++i) {
    // The float index finds the neighbourhood; distances are recomputed in
    // double over every point within float slack of the best.
    const auto nn = tree.nearest(test[i].translation.cast<float>());
    const double approx = std::sqrt(static_cast<double>(nn->squared_distance));
    std::vector<std::size_t> near;
    tree.radius_search(test[i].translation.cast<float>(), static_cast<float>(approx * (1 + 1e-5) + 1e-5), near);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j : near) best = std::min(best, (train[j].translation - test[i].translation).norm());
    out[i].translation = best;

    double best_angle = std::numeric_limits<double>::infinity();
    for (const auto& p : train) {
      best_angle = std::min(best_angle, rotation_angle_degrees(p.rotation * test[i].rotation.transpose()));
    }
    out[i].rotation = best_angle;
  }
  return out;
}

std::string NoveltyBinning::label(std::size_t bin) const {
  std::ostringstream s;
  if (bin < translation_edges.size()) {
    s << "<=" << translation_edges[bin] * 100 << "cm&<=" << rotation_edges[bin] << "deg";
  } else {
    s << ">" << translation_edges.back() * 100 << "cm|>" << rotation_edges.back() << "deg";
  }
  return s.str();
}

NoveltyBinning novelty_binning(std::span<const RigidPosed> train, std::span<const RigidPosed> test,
                               std::span<const bool> success,
                               std::vector<double> translation_edges,
                               std::vector<double> rotation_edges) {
  if (translation_edges.empty() || translation_edges.size() != rotation_edges.size()) {
    throw ConfigError("novelty bins need matching, non-empty translation and rotation edges");
  }
  if (success.size() != test.size()) throw ConfigError("one success flag per test pose required");
  NoveltyBinning b;
  b.translation_edges = std::move(translation_edges);
  b.rotation_edges = std::move(rotation_edges);
  b.counts.assign(b.bin_count(), 0);
  b.successes.assign(b.bin_count(), 0);
  const auto d = novelty_distances(train, test);
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t bin = b.translation_edges.size();
    for (std::size_t k = 0; k < b.translation_edges.size(); ++k) {
      if (d[i].translation <= b.translation_edges[k] && d[i].rotation <= b.rotation_edges[k]) {
        bin = k;
        break;
      }
    }
    b.bin_of.push_back(bin);
    ++b.counts[bin];
    if (success[i]) ++b.successes[bin];
  }
  return b;
}

std::string to_csv(const NoveltyBinning& binning) {
  std::ostringstream s;
  s << "bin,label,count,successes,success_rate\n";
  for (std::size_t k = 0; k < binning.bin_count(); ++k) {
    s << k << "," << binning.label(k) << "," << binning.counts[k] << "," << binning.successes[k]
      << "," << binning.success_rate(k) << "\n";
  }
  return s.str();
}

double inlier_good_probability(double sigma, double radius) {
  if (!(sigma > 0.0)) return 1.0;
  const double k = radius / sigma;
  return std::erf(k / std::numbers::sqrt2) -
         std::sqrt(2.0 / std::numbers::pi) * k * std::exp(-0.5 * k * k);
}

double outlier_fraction_for_good_fraction(double good_fraction, double sigma, double radius) {
  return std::clamp(1.0 - good_fraction / inlier_good_probability(sigma, radius), 0.0, 1.0);
}

double measured_good_fraction(std::span<const FrameRecord> frames,
                              const SyntheticPredictorConfig& predictor, double radius) {
  std::size_t good = 0, total = 0;
  for (const auto& f : frames) {
    const PredictionGrid g = predict_synthetic(f, predictor);
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        if (!g.is_valid(x, y)) continue;
        const Eigen::Vector3d truth =
            predictor.warp(back_project(PredictionGrid::source_pixel(x, y), f.depth, f.intrinsics, f.pose));
        ++total;
        if ((g.at(x, y).cast<double>() - truth).norm() <= radius) ++good;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(total);
}

double correspondence_good_fraction(const RelocaliserState& state,
                                    std::span<const FrameRecord> frames, const Predictor& predictor,
                                    bool raw, double radius) {
  std::size_t good = 0, total = 0;
  for (const auto& f : frames) {
    const PredictionGrid pred = predictor.predict(f);
    CorrespondenceSet cs =
        raw ? build_raw_correspondences(pred, f.depth, f.rgb, f.intrinsics)
            : build_correspondences(adapt_lookup(pred, state.table(), state.config().grid), f.depth,
                                    f.rgb, f.intrinsics, state.reservoirs());
    for (const auto& c : cs.items) {
      const Eigen::Vector3d truth = f.pose * c.camera_point;
      ++total;
      for (const auto& m : c.modes) {
        if ((m.centroid - truth).norm() <= radius) {
          ++good;
          break;
        }
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(total);
}

std::size_t count_occupied_cells(std::span<const FrameRecord> train, const Predictor& predictor,
                                 const GridConfig& grid) {
  std::unordered_set<std::int64_t> cells;
  for (const auto& f : train) {
    const PredictionGrid g = predictor.predict(f);
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      if (g.valid[i]) cells.insert(cell_index(g.points[i].cast<double>(), grid));
    }
  }
  return cells.size();
}

std::vector<ReservoirSweepRow> sweep_reservoir_count(const HarnessConfig& config,
                                                     const SyntheticWorld& world,
                                                     std::span<const std::int32_t> counts) {
  const SyntheticPredictor predictor(config.predictor);
  const std::size_t occupied = count_occupied_cells(world.train(), predictor, config.relocaliser.grid);
  std::vector<ReservoirSweepRow> rows;
  for (const std::int32_t n : counts) {
    RelocaliserConfig rc = config.relocaliser;
    rc.reservoir_count = n;
    RelocaliserState state(rc);
    state.train_online(world.train(), predictor);
    const EvalReport report = evaluate(state, world.test(), predictor);
    rows.push_back({n, occupied, state.table().assigned_reservoirs(), report.success_rate,
                    report.median_translation, report.median_rotation});
  }
  return rows;
}

std::string to_csv(std::span<const ReservoirSweepRow> rows) {
  std::ostringstream s;
  s << "reservoir_count,occupied_cells,assigned_reservoirs,success_rate,median_translation_m,"
       "median_rotation_deg\n";
  for (const auto& r : rows) {
    s << r.reservoir_count << "," << r.occupied_cells << "," << r.assigned_reservoirs << ","
      << r.success_rate << "," << r.median_translation << "," << r.median_rotation << "\n";
  }
  return s.str();
}

std::vector<QualitySweepRow> sweep_correspondence_quality(RelocaliserState& trained,
                                                          const HarnessConfig& config,
                                                          const SyntheticWorld& world,
                                                          std::span<const double> good_fractions,
                                                          std::span<const QualityToggles> toggles) {
  const RelocaliserConfig original = trained.config();
  std::vector<QualitySweepRow> rows;
  for (const double g : good_fractions) {
    SyntheticPredictorConfig pc = config.predictor;
    pc.outlier_fraction = outlier_fraction_for_good_fraction(g, pc.noise_sigma);
    const SyntheticPredictor predictor(pc);
    const double measured = measured_good_fraction(world.test(), pc);
    const double adapted_good = correspondence_good_fraction(trained, world.test(), predictor, false);
    const double raw_good = correspondence_good_fraction(trained, world.test(), predictor, true);
    for (const auto& t : toggles) {
      RelocaliserConfig rc = original;
      rc.ransac.pose_update = t.pose_update;
      rc.icp_enabled = t.icp;
      rc.ranking_enabled = t.ranking;
      trained.set_test_settings(rc);
      const double adapted = evaluate(trained, world.test(), predictor).success_rate;
      const double raw = evaluate(trained, world.test(), predictor, {.raw = true}).success_rate;
      rows.push_back({g, pc.outlier_fraction, measured, t, adapted, raw, adapted_good, raw_good});
    }
  }
  trained.set_test_settings(original);
  return rows;
}

std::string to_csv(std::span<const QualitySweepRow> rows) {
  std::ostringstream s;
  s << "target_good_fraction,outlier_fraction,measured_good_fraction,pose_update,icp,ranking,"
       "adapted_success,raw_success,adapted_correspondence_good,raw_correspondence_good\n";
  for (const auto& r : rows) {
    s << r.target_good_fraction << "," << r.outlier_fraction << "," << r.measured_good_fraction
      << "," << r.toggles.pose_update << "," << r.toggles.icp << "," << r.toggles.ranking << ","
      << r.adapted_success << "," << r.raw_success << "," << r.adapted_correspondence_good << ","
      << r.raw_correspondence_good << "\n";
  }
  return s.str();
}

std::string to_json(const EvalReport& report) {
  using nlohmann::json;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  auto timings_json = [](const StageTimings& t) {
    json j = json::object();
    for (std::size_t i = 0; i < t.ms.size(); ++i) j[std::string(StageTimings::kNames[i])] = t[i];
    return j;
  };
  auto pose_json = [](const RigidPosed& p) {
    json rows = json::array();
    const Eigen::Matrix4d m = p.matrix();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    return rows;
  };

  json frames = json::array();
  for (const auto& f : report.frames) {
    json j;
    j["index"] = f.index;
    j["success"] = f.success;
    j["pose"] = f.pose ? pose_json(*f.pose) : json(nullptr);
    j["ground_truth"] = pose_json(f.ground_truth);
    j["translation_error_m"] = finite_or_null(f.error.translation_error);
    j["angular_error_deg"] = finite_or_null(f.error.angular_error);
    j["correspondences"] = f.correspondences;
    if (f.timings) j["timings_ms"] = timings_json(*f.timings);
    if (!f.failure.empty()) j["failure"] = f.failure;
    frames.push_back(std::move(j));
  }
  json out;
  out["success_rate_5cm5deg"] = report.success_rate;
  out["median_translation_m"] = finite_or_null(report.median_translation);
  out["median_rotation_deg"] = finite_or_null(report.median_rotation);
  out["mean_timings_ms"] = timings_json(report.mean_timings);
  out["frames"] = std::move(frames);
  return out.dump(2);
}

}  // namespace scoreloc

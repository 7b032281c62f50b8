#include "scoreloc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "scoreloc/errors.hpp"

namespace scoreloc {

RelocaliserConfig RelocaliserConfig::Indoor() {
  RelocaliserConfig c;
  c.grid = {0.1, 10000};
  c.clusterer = {0.1, 0.05, 50, 20};
  c.reservoir_capacity = 4096;
  c.ransac.max_pose_candidates = 1024;
  c.ransac.max_pose_candidates_after_cull = 64;
  c.ransac.inliers_per_iteration = 512;
  c.ransac.max_candidate_generation_iterations = 6000;
  c.ransac.min_squared_distance_between_sampled_modes = 0.09;
  c.ransac.max_translation_error_for_correct_pose = 0.05;
  c.ransac.pose_update = true;
  c.ransac.use_prediction_covariance = true;
  c.model_voxel_size = 0.01;
  return c;
}

RelocaliserConfig RelocaliserConfig::Outdoor() {
  RelocaliserConfig c = Indoor();
  c.grid = {1.0, 1000};
  c.clusterer = {0.1, 0.4, 50, 5};
  c.ransac.max_pose_candidates = 2048;
  c.ransac.min_squared_distance_between_sampled_modes = 0.0225;
  c.ransac.max_translation_error_for_correct_pose = 0.1;
  c.ransac.use_prediction_covariance = false;
  c.model_voxel_size = 0.1;
  return c;
}

void RelocaliserConfig::validate() const {
  grid.validate();
  clusterer.validate();
  ransac.validate();
  if (reservoir_count < 1) throw ConfigError("reservoirCount must be at least 1");
  if (reservoir_capacity < 1) throw ConfigError("reservoirCapacity must be at least 1");
  if (!(model_voxel_size > 0.0)) throw ConfigError("modelVoxelSize must be positive");
  if (model_frame_stride < 1) throw ConfigError("modelFrameStride must be at least 1");
  if (icp.max_iterations < 0 || icp.pixel_stride < 1 || !(icp.rejection_distance > 0.0)) {
    throw ConfigError("invalid ICP settings");
  }
}

SyntheticPredictorConfig HarnessConfig::DefaultPredictor() {
  SyntheticPredictorConfig p;
  p.noise_sigma = 0.05;
  p.outlier_fraction = 0.3;
  p.seed = 7;
  return p;
}

void HarnessConfig::validate() const {
  relocaliser.validate();
  world.validate();
  predictor.validate();
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "True" || text == "1") return true;
  if (text == "false" || text == "False" || text == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    if (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(parse_number<double>(key, tok));
  }
  return out;
}

std::string format_list(const double* v, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

struct Entry {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename T>
Entry number_entry(const std::string& key, T& field) {
  if constexpr (std::is_floating_point_v<T>) {
    return {key, [&field] { return format_double(field); },
            [&field, key](const std::string& v) { field = parse_number<T>(key, v); }};
  } else {
    return {key, [&field] { return std::to_string(field); },
            [&field, key](const std::string& v) { field = parse_number<T>(key, v); }};
  }
}

Entry bool_entry(const std::string& key, bool& field) {
  return {key, [&field] { return std::string(field ? "true" : "false"); },
          [&field, key](const std::string& v) { field = parse_bool(key, v); }};
}

template <typename Derived>
Entry fixed_list_entry(const std::string& key, Eigen::MatrixBase<Derived>& m) {
  // Row-major text for matrices.
  return {key,
          [&m] {
            std::vector<double> v;
            for (Eigen::Index r = 0; r < m.rows(); ++r)
              for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
            return format_list(v.data(), v.size());
          },
          [&m, key](const std::string& text) {
            const auto v = parse_list(key, text);
            if (static_cast<Eigen::Index>(v.size()) != m.size()) {
              throw ConfigError(key + " expects " + std::to_string(m.size()) + " numbers");
            }
            std::size_t i = 0;
            for (Eigen::Index r = 0; r < m.rows(); ++r)
              for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[i++];
          }};
}

std::vector<Entry> entries(HarnessConfig& c) {
  RelocaliserConfig& r = c.relocaliser;
  WorldSpec& w = c.world;
  SyntheticPredictorConfig& p = c.predictor;
  std::vector<Entry> e;
  e.push_back(number_entry("cellSize", r.grid.cell_size));
  e.push_back(number_entry("cellsPerSide", r.grid.cells_per_side));
  e.push_back(number_entry("reservoirCount", r.reservoir_count));
  e.push_back(number_entry("reservoirCapacity", r.reservoir_capacity));
  e.push_back(number_entry("clustererSigma", r.clusterer.sigma));
  e.push_back(number_entry("clustererTau", r.clusterer.tau));
  e.push_back(number_entry("maxClusterCount", r.clusterer.max_cluster_count));
  e.push_back(number_entry("minClusterSize", r.clusterer.min_cluster_size));
  e.push_back(number_entry("maxCandidateGenerationIterations",
                           r.ransac.max_candidate_generation_iterations));
  e.push_back(number_entry("maxPoseCandidates", r.ransac.max_pose_candidates));
  e.push_back(number_entry("maxPoseCandidatesAfterCull", r.ransac.max_pose_candidates_after_cull));
  e.push_back(number_entry("maxTranslationErrorForCorrectPose",
                           r.ransac.max_translation_error_for_correct_pose));
  e.push_back(number_entry("minSquaredDistanceBetweenSampledModes",
                           r.ransac.min_squared_distance_between_sampled_modes));
  e.push_back(bool_entry("poseUpdate", r.ransac.pose_update));
  e.push_back(number_entry("ransacInliersPerIteration", r.ransac.inliers_per_iteration));
  e.push_back(bool_entry("usePredictionCovarianceForPoseOptimization",
                         r.ransac.use_prediction_covariance));
  e.push_back(number_entry("finalCandidateCount", r.ransac.final_count));
  e.push_back(number_entry("rigidityTolerance", r.ransac.rigidity_tolerance));
  e.push_back(number_entry("colourTolerance", r.ransac.colour_tolerance));
  e.push_back(bool_entry("icpEnabled", r.icp_enabled));
  e.push_back(number_entry("icpMaxIterations", r.icp.max_iterations));
  e.push_back(number_entry("icpRejectionDistance", r.icp.rejection_distance));
  e.push_back(number_entry("icpRelativeTolerance", r.icp.relative_tolerance));
  e.push_back(number_entry("icpConvergenceResidual", r.icp.convergence_residual));
  e.push_back(number_entry("icpPixelStride", r.icp.pixel_stride));
  e.push_back(bool_entry("rankingEnabled", r.ranking_enabled));
  e.push_back(number_entry("modelVoxelSize", r.model_voxel_size));
  e.push_back(number_entry("modelFrameStride", r.model_frame_stride));
  e.push_back(number_entry("seed", r.seed));

  e.push_back(number_entry("worldSeed", w.seed));
  e.push_back(fixed_list_entry("worldExtent", w.extent));
  e.push_back(number_entry("worldPointCount", w.point_count));
  e.push_back(number_entry("trainFrames", w.train_frames));
  e.push_back(number_entry("testFrames", w.test_frames));
  e.push_back(number_entry("furnitureCount", w.furniture_count));
  e.push_back(number_entry("clutterCount", w.clutter_count));
  e.push_back(number_entry("loopRadius", w.loop_radius));
  e.push_back(number_entry("cameraHeight", w.camera_height));
  e.push_back({"testOffsetEdges",
               [&w] { return format_list(w.test_offset_edges.data(), w.test_offset_edges.size()); },
               [&w](const std::string& v) { w.test_offset_edges = parse_list("testOffsetEdges", v); }});
  e.push_back(number_entry("testMaxRotationDegrees", w.test_max_rotation_degrees));
  e.push_back(number_entry("fx", w.intrinsics.fx));
  e.push_back(number_entry("fy", w.intrinsics.fy));
  e.push_back(number_entry("cx", w.intrinsics.cx));
  e.push_back(number_entry("cy", w.intrinsics.cy));
  e.push_back(number_entry("width", w.intrinsics.width));
  e.push_back(number_entry("height", w.intrinsics.height));

  e.push_back(fixed_list_entry("predictorWarpLinear", p.warp_linear));
  e.push_back(fixed_list_entry("predictorWarpOffset", p.warp_offset));
  e.push_back(number_entry("predictorNoiseSigma", p.noise_sigma));
  e.push_back(number_entry("predictorOutlierFraction", p.outlier_fraction));
  e.push_back({"predictorOutlierBoxMin",
               [&p] { return format_list(p.outlier_box.min().data(), 3); },
               [&p](const std::string& v) {
                 Eigen::Vector3d m = p.outlier_box.min();
                 fixed_list_entry("predictorOutlierBoxMin", m).set(v);
                 p.outlier_box.min() = m;
               }});
  e.push_back({"predictorOutlierBoxMax",
               [&p] { return format_list(p.outlier_box.max().data(), 3); },
               [&p](const std::string& v) {
                 Eigen::Vector3d m = p.outlier_box.max();
                 fixed_list_entry("predictorOutlierBoxMax", m).set(v);
                 p.outlier_box.max() = m;
               }});
  e.push_back(number_entry("predictorSeed", p.seed));
  return e;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_setting(HarnessConfig& config, const std::string& key, const std::string& value) {
  for (auto& e : entries(config)) {
    if (e.key == key) {
      e.set(value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

HarnessConfig parse_config(const std::string& text, HarnessConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const HarnessConfig& config) {
  HarnessConfig copy = config;
  std::string out;
  for (const auto& e : entries(copy)) out += e.key + " = " + e.get() + "\n";
  return out;
}

}  // namespace scoreloc

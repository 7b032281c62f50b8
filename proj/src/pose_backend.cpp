#include "scoreloc/pose_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

namespace scoreloc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

std::vector<std::size_t> sample_indices(std::size_t count, std::size_t population,
                                        std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, population - 1);
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick(rng);
  return out;
}

// Orders by energy, earlier position first on ties.
void sort_by_energy(std::vector<PoseHypothesis>& hs) {
  std::stable_sort(hs.begin(), hs.end(), [](const PoseHypothesis& a, const PoseHypothesis& b) {
    return a.energy < b.energy;
  });
}

}  // namespace

CorrespondenceSet build_correspondences(const ReservoirIndexImage& index_image,
                                        const DepthImage& depth, const ColourImage& rgb,
                                        const CameraIntrinsics& k,
                                        std::span<const Reservoir> reservoirs) {
  CorrespondenceSet set;
  for (int y = 0; y < index_image.height; ++y) {
    for (int x = 0; x < index_image.width; ++x) {
      const auto r = index_image.at(x, y);
      if (!r) continue;
      const Eigen::Vector2i u = PredictionGrid::source_pixel(x, y);
      if (!depth.contains(u.x(), u.y())) continue;
      const float d = depth(u.x(), u.y());
      if (!is_valid_depth(d)) continue;
      const auto& modes = reservoirs[static_cast<std::size_t>(*r)].modes();
      if (modes.empty()) continue;
      set.items.push_back({u, back_project_camera(u.cast<double>(), d, k),
                           rgb_to_unit(rgb(u.x(), u.y())), modes});
    }
  }
  return set;
}

CorrespondenceSet build_raw_correspondences(const PredictionGrid& pred, const DepthImage& depth,
                                            const ColourImage& rgb, const CameraIntrinsics& k) {
  CorrespondenceSet set;
  std::vector<Eigen::Vector2i> pixels;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      if (!pred.is_valid(x, y)) continue;
      const Eigen::Vector2i u = PredictionGrid::source_pixel(x, y);
      if (!depth.contains(u.x(), u.y()) || !is_valid_depth(depth(u.x(), u.y()))) continue;
      ClusterSummary mode;
      mode.centroid = pred.at(x, y).cast<double>();
      mode.colour_centroid = rgb_to_unit(rgb(u.x(), u.y()));
      mode.covariance = kRawPredictionVariance * Eigen::Matrix3d::Identity();
      mode.information = mode.covariance.inverse();
      mode.size = 1;
      set.owned_modes.push_back(mode);
      pixels.push_back(u);
    }
  }
  set.items.reserve(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const Eigen::Vector2i& u = pixels[i];
    set.items.push_back({u, back_project_camera(u.cast<double>(), depth(u.x(), u.y()), k),
                         set.owned_modes[i].colour_centroid,
                         std::span<const ClusterSummary>(&set.owned_modes[i], 1)});
  }
  return set;
}

void RansacParams::validate() const {
  if (max_pose_candidates < 1 || max_pose_candidates_after_cull < 1 || final_count < 1 ||
      inliers_per_iteration < 1 || max_candidate_generation_iterations < 1) {
    throw ConfigError("RANSAC counts must all be at least 1");
  }
  if (!(final_count <= max_pose_candidates_after_cull &&
        max_pose_candidates_after_cull <= max_pose_candidates)) {
    throw ConfigError("RANSAC counts must satisfy final <= after-cull <= max candidates");
  }
  if (!(max_translation_error_for_correct_pose > 0.0)) {
    throw ConfigError("maxTranslationErrorForCorrectPose must be positive");
  }
}

double correspondence_residual(const RigidPosed& pose, const Correspondence& c, double truncation,
                               std::size_t* best_mode) {
  const Eigen::Vector3d w = pose * c.camera_point;
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t m = 0; m < c.modes.size(); ++m) {
    const double d2 = (w - c.modes[m].centroid).squaredNorm();
    if (d2 < best) {
      best = d2;
      arg = m;
    }
  }
  if (best_mode) *best_mode = arg;
  return std::min(std::sqrt(best), truncation);
}

double hypothesis_energy(const RigidPosed& pose, std::span<const Correspondence> cs,
                         std::span<const std::size_t> sample, double truncation) {
  if (sample.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : sample) sum += correspondence_residual(pose, cs[i], truncation);
  return sum / static_cast<double>(sample.size());
}

GenerationResult generate_hypotheses(std::span<const Correspondence> cs, const RansacParams& params,
                                     std::mt19937_64& rng) {
  GenerationResult result;
  if (cs.size() < 3) throw NoHypotheses("fewer than three correspondences", 0);

  std::uniform_int_distribution<std::size_t> pick_pixel(0, cs.size() - 1);
  const double min_sep2 = params.min_squared_distance_between_sampled_modes;

  while (result.hypotheses.size() < params.max_pose_candidates &&
         result.attempts < params.max_candidate_generation_iterations) {
    ++result.attempts;

    std::size_t idx[3];
    idx[0] = pick_pixel(rng);
    do { idx[1] = pick_pixel(rng); } while (idx[1] == idx[0]);
    do { idx[2] = pick_pixel(rng); } while (idx[2] == idx[0] || idx[2] == idx[1]);

    Eigen::Matrix3d camera, world;
    const ClusterSummary* modes[3];
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      const Correspondence& c = cs[idx[k]];
      std::uniform_int_distribution<std::size_t> pick_mode(0, c.modes.size() - 1);
      modes[k] = &c.modes[pick_mode(rng)];
      ok = ((c.colour - modes[k]->colour_centroid).cwiseAbs().array() <= params.colour_tolerance).all();
      camera.col(k) = c.camera_point;
      world.col(k) = modes[k]->centroid;
    }
    if (!ok) continue;

    for (int a = 0; a < 3 && ok; ++a) {
      for (int b = a + 1; b < 3 && ok; ++b) {
        const double dw2 = (world.col(a) - world.col(b)).squaredNorm();
        if (dw2 < min_sep2) {
          ok = false;
          break;
        }
        const double dc = (camera.col(a) - camera.col(b)).norm();
        ok = std::abs(dc - std::sqrt(dw2)) <= params.rigidity_tolerance;
      }
    }
    if (!ok) continue;

    try {
      PoseHypothesis h;
      h.pose = kabsch(camera, world);
      result.hypotheses.push_back(std::move(h));
    } catch (const DegenerateConfiguration&) {
    }
  }

  if (result.hypotheses.empty()) {
    throw NoHypotheses("no hypothesis passed the checks within the attempt budget",
                       result.attempts);
  }
  return result;
}

std::vector<PoseHypothesis> score_and_cull(std::vector<PoseHypothesis> hs,
                                           std::span<const Correspondence> cs,
                                           const RansacParams& params, std::mt19937_64& rng) {
  if (hs.empty() || cs.empty()) return hs;
  const auto sample = sample_indices(params.inliers_per_iteration, cs.size(), rng);
  for (auto& h : hs) h.energy = hypothesis_energy(h.pose, cs, sample, params.energy_truncation());
  sort_by_energy(hs);
  if (hs.size() > params.max_pose_candidates_after_cull) {
    hs.resize(params.max_pose_candidates_after_cull);
  }
  return hs;
}

namespace {

struct WhitenedInlier {
  Eigen::Vector3d camera_point;
  Eigen::Vector3d world_point;
  Eigen::Matrix3d sqrt_information;  // L^T with information = L L^T
};

std::vector<WhitenedInlier> whiten(std::span<const InlierPair> inliers, bool use_covariance) {
  std::vector<WhitenedInlier> out;
  out.reserve(inliers.size());
  for (const auto& p : inliers) {
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    if (use_covariance) {
      Eigen::LLT<Eigen::Matrix3d> llt(p.information);
      if (llt.info() == Eigen::Success) s = llt.matrixL().transpose();
    }
    out.push_back({p.camera_point, p.world_point, s});
  }
  return out;
}

double huber(double r, double delta) {
  return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

double objective(const RigidPosed& pose, const std::vector<WhitenedInlier>& inliers, double delta) {
  double sum = 0.0;
  for (const auto& p : inliers) {
    sum += huber((p.sqrt_information * (pose * p.camera_point - p.world_point)).norm(), delta);
  }
  return sum;
}

double inlier_energy(const RigidPosed& pose, std::span<const InlierPair> inliers, double truncation) {
  if (inliers.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : inliers) {
    sum += std::min((pose * p.camera_point - p.world_point).norm(), truncation);
  }
  return sum / static_cast<double>(inliers.size());
}

}  // namespace

double lm_objective(const RigidPosed& pose, std::span<const InlierPair> inliers,
                    bool use_covariance, const LmOptions& options) {
  return objective(pose, whiten(inliers, use_covariance),
                   use_covariance ? options.huber_whitened : options.huber_euclidean);
}

LmResult lm_refine(const PoseHypothesis& h, std::span<const InlierPair> inliers,
                   bool use_covariance, const LmOptions& options) {
  LmResult result;
  result.hypothesis = h;
  result.hypothesis.inliers.assign(inliers.begin(), inliers.end());

  const auto w = whiten(inliers, use_covariance);
  const double delta = use_covariance ? options.huber_whitened : options.huber_euclidean;
  RigidPosed pose = h.pose;
  double cost = objective(pose, w, delta);
  result.initial_objective = cost;
  double lambda = options.initial_lambda;

  using Matrix6 = Eigen::Matrix<double, 6, 6>;
  using Vector6 = Eigen::Matrix<double, 6, 1>;

  for (int it = 0; it < options.max_iterations && w.size() >= 3; ++it) {
    result.iterations = it + 1;
    Matrix6 a = Matrix6::Zero();
    Vector6 g = Vector6::Zero();
    for (const auto& p : w) {
      const Eigen::Vector3d y = pose * p.camera_point;
      const Eigen::Vector3d e = p.sqrt_information * (y - p.world_point);
      const double r = e.norm();
      const double weight = r <= delta ? 1.0 : delta / r;
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = -p.sqrt_information * skew(y);
      j.rightCols<3>() = p.sqrt_information;
      a.noalias() += weight * j.transpose() * j;
      g.noalias() += weight * j.transpose() * e;
    }
    if (g.norm() == 0.0) break;

    Matrix6 damped = a;
    damped.diagonal() += lambda * a.diagonal().cwiseMax(1e-12);
    Eigen::LDLT<Matrix6> ldlt(damped);
    const Vector6 step = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      result.singular = true;
      pose = h.pose;
      cost = result.initial_objective;
      break;
    }

    RigidPosed candidate = apply_twist(step, pose);
    candidate.rotation = orthonormalise(candidate.rotation);
    const double candidate_cost = objective(candidate, w, delta);
    if (candidate_cost < cost) {
      pose = candidate;
      cost = candidate_cost;
      lambda = std::max(lambda / 10.0, 1e-12);
      if (step.norm() < options.step_tolerance) break;
    } else {
      lambda *= 10.0;
      if (step.norm() < options.step_tolerance || lambda > 1e12) break;
    }
  }

  result.hypothesis.pose = pose;
  result.final_objective = cost;
  result.hypothesis.energy = inlier_energy(pose, inliers, options.energy_truncation);
  return result;
}

std::vector<PoseHypothesis> preemptive_ransac(std::vector<PoseHypothesis> hs,
                                              std::span<const Correspondence> cs,
                                              const RansacParams& params, std::mt19937_64& rng,
                                              RansacTimings* timings, std::size_t* rounds) {
  if (rounds) *rounds = 0;
  if (hs.empty()) return hs;
  const double truncation = params.energy_truncation();
  LmOptions lm;
  lm.huber_euclidean = params.max_translation_error_for_correct_pose;
  lm.energy_truncation = truncation;

  std::vector<std::size_t> sampled;
  std::vector<double> energy_sum(hs.size(), 0.0);

  auto run_round = [&](bool drop) {
    auto t0 = Clock::now();
    const auto fresh = cs.empty() ? std::vector<std::size_t>{}
                                  : sample_indices(params.inliers_per_iteration, cs.size(), rng);
    sampled.insert(sampled.end(), fresh.begin(), fresh.end());
    for (std::size_t i = 0; i < hs.size(); ++i) {
      for (std::size_t c : fresh) energy_sum[i] += correspondence_residual(hs[i].pose, cs[c], truncation);
      hs[i].energy = sampled.empty() ? 0.0 : energy_sum[i] / static_cast<double>(sampled.size());
    }
    if (timings) timings->inlier_sampling_ms += elapsed_ms(t0);

    if (params.pose_update) {
      t0 = Clock::now();
      std::vector<InlierPair> inliers;
      for (std::size_t i = 0; i < hs.size(); ++i) {
        inliers.clear();
        for (std::size_t c : sampled) {
          std::size_t m = 0;
          if (correspondence_residual(hs[i].pose, cs[c], truncation, &m) < truncation) {
            inliers.push_back({cs[c].camera_point, cs[c].modes[m].centroid,
                               cs[c].modes[m].information});
          }
        }
        if (inliers.size() < 3) continue;
        LmResult r = lm_refine(hs[i], inliers, params.use_prediction_covariance, lm);
        hs[i].pose = r.hypothesis.pose;
        hs[i].inliers = std::move(r.hypothesis.inliers);
        energy_sum[i] = hypothesis_energy(hs[i].pose, cs, sampled, truncation) *
                        static_cast<double>(sampled.size());
        hs[i].energy = energy_sum[i] / static_cast<double>(sampled.size());
      }
      if (timings) timings->optimisation_ms += elapsed_ms(t0);
    }

    // Sort hypotheses together with their accumulated sums.
    std::vector<std::size_t> order(hs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return hs[a].energy < hs[b].energy; });
    std::size_t keep = hs.size();
    if (drop) keep = std::max(params.final_count, (hs.size() + 1) / 2);
    std::vector<PoseHypothesis> next;
    std::vector<double> next_sum;
    for (std::size_t k = 0; k < keep; ++k) {
      next.push_back(std::move(hs[order[k]]));
      next_sum.push_back(energy_sum[order[k]]);
    }
    hs = std::move(next);
    energy_sum = std::move(next_sum);
    if (rounds) ++*rounds;
  };

  if (hs.size() <= params.final_count) {
    run_round(false);
  } else {
    while (hs.size() > params.final_count) run_round(true);
  }

  sort_by_energy(hs);
  const std::size_t have = hs.size();
  for (std::size_t k = 0; hs.size() < params.final_count; ++k) hs.push_back(hs[k % have]);
  return hs;
}

}  // namespace scoreloc

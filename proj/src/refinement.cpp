#include "scoreloc/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>

#include "scoreloc/errors.hpp"

namespace scoreloc {

DepthImage render_depth(const ScenePointModel& model, const RigidPosed& pose,
                        const CameraIntrinsics& k, int splat_radius) {
  DepthImage out(k.width, k.height, std::numeric_limits<float>::infinity());
  const RigidPosed world_to_camera = pose.inverse();
  const Eigen::Matrix3f r = world_to_camera.rotation.cast<float>();
  const Eigen::Vector3f t = world_to_camera.translation.cast<float>();
  for (const Eigen::Vector3f& p : model.positions()) {
    const Eigen::Vector3f c = r * p + t;
    if (!(c.z() > 0.0f)) continue;
    const double u = k.fx * c.x() / c.z() + k.cx;
    const double v = k.fy * c.y() / c.z() + k.cy;
    if (!(u > -splat_radius - 1 && v > -splat_radius - 1 && u < k.width + splat_radius &&
          v < k.height + splat_radius)) {
      continue;
    }
    const int x0 = static_cast<int>(std::lround(u));
    const int y0 = static_cast<int>(std::lround(v));
    for (int y = std::max(0, y0 - splat_radius); y <= std::min(k.height - 1, y0 + splat_radius); ++y) {
      for (int x = std::max(0, x0 - splat_radius); x <= std::min(k.width - 1, x0 + splat_radius); ++x) {
        float& d = out(x, y);
        d = std::min(d, c.z());
      }
    }
  }
  for (float& d : out.data()) {
    if (std::isinf(d)) d = kInvalidDepth;
  }
  return out;
}

std::vector<Eigen::Vector3d> sample_live_points(const DepthImage& depth, const CameraIntrinsics& k,
                                                int stride) {
  std::vector<Eigen::Vector3d> pts;
  stride = std::max(stride, 1);
  for (int y = 0; y < depth.height(); y += stride) {
    for (int x = 0; x < depth.width(); x += stride) {
      const float d = depth(x, y);
      if (is_valid_depth(d)) pts.push_back(back_project_camera(Eigen::Vector2d(x, y), d, k));
    }
  }
  return pts;
}

namespace {

struct Matches {
  std::vector<Eigen::Vector3d> world;   // posed live points
  std::vector<Eigen::Vector3d> target;  // nearest model points
  std::vector<Eigen::Vector3d> normal;
  double residual = 0.0;          // rejected points count at the rejection distance
  double matched_residual = 0.0;  // over matched points only
};

Matches match(const RigidPosed& pose, std::span<const Eigen::Vector3d> live,
              const ScenePointModel& model, double rejection) {
  Matches m;
  double sum = 0.0, matched_sum = 0.0;
  for (const auto& x : live) {
    const Eigen::Vector3d w = pose * x;
    const auto nn = model.index().nearest(w.cast<float>(), static_cast<float>(rejection));
    if (!nn) {
      sum += rejection;
      continue;
    }
    const Eigen::Vector3d target = model.positions()[nn->index].cast<double>();
    const double d = std::min((w - target).norm(), rejection);
    sum += d;
    matched_sum += d;
    m.world.push_back(w);
    m.target.push_back(target);
    m.normal.push_back(model.normals()[nn->index].cast<double>());
  }
  const auto n = m.world.size();
  m.residual = live.empty() ? 0.0 : sum / static_cast<double>(live.size());
  m.matched_residual = n == 0 ? rejection : matched_sum / static_cast<double>(n);
  return m;
}

// One linearised point-to-plane step: the world-space correction minimising
// sum (n . (delta * w - target))^2, rotation taken about the pair centroid.
// Empty if the system is degenerate.
std::optional<RigidPosed> point_to_plane_step(const Matches& m, double gate) {
  Eigen::Vector3d centre = Eigen::Vector3d::Zero();
  for (const auto& w : m.world) centre += w;
  centre /= static_cast<double>(m.world.size());

  Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
  std::size_t used = 0;
  for (std::size_t i = 0; i < m.world.size(); ++i) {
    const Eigen::Vector3d& n = m.normal[i];
    if (n.isZero() || (m.world[i] - m.target[i]).norm() > gate) continue;
    Eigen::Matrix<double, 6, 1> j;
    j << (m.world[i] - centre).cross(n), n;
    const double r = n.dot(m.world[i] - m.target[i]);
    a += j * j.transpose();
    b -= j * r;
    ++used;
  }
  if (used < 6) return std::nullopt;
  // A whisker of damping keeps sliding directions (planar views) bounded.
  a.diagonal().array() += 1e-9 * a.trace();
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(a);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Eigen::Matrix<double, 6, 1> x = ldlt.solve(b);
  if (!x.allFinite()) return std::nullopt;

  const RigidPosed step = apply_twist<double>(x, RigidPosed::Identity());
  // Rotate about the centre: c + R (w - c) + t.
  return RigidPosed(step.rotation, centre - step.rotation * centre + step.translation);
}

}  // namespace

double icp_residual(const RigidPosed& pose, std::span<const Eigen::Vector3d> live,
                    const ScenePointModel& model, double rejection_distance,
                    std::size_t* matches) {
  const Matches m = match(pose, live, model, rejection_distance);
  if (matches) *matches = m.world.size();
  return m.residual;
}

IcpResult icp_refine(const RigidPosed& initial, const DepthImage& live_depth,
                     const CameraIntrinsics& k, const ScenePointModel& model,
                     const IcpParams& params) {
  if (model.empty()) throw EmptyOverlap("ICP against an empty scene model");
  const auto live = sample_live_points(live_depth, k, params.pixel_stride);

  IcpResult result;
  result.pose = initial;
  Matches m = match(initial, live, model, params.rejection_distance);
  if (m.world.empty()) throw EmptyOverlap("no live point is near the model at the initial pose");
  result.initial_residual = m.residual;
  result.final_residual = m.residual;
  double best_matched = m.matched_residual;

  RigidPosed current = initial;
  for (int it = 0; it < params.max_iterations; ++it) {
    double gate = params.rejection_distance;
    if (params.adaptive_rejection > 0.0) {
      std::vector<double> d(m.world.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = (m.world[i] - m.target[i]).norm();
      std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
      gate = std::min(gate, std::max(params.adaptive_rejection * d[d.size() / 2], params.min_gate));
    }
    const auto delta = point_to_plane_step(m, gate);
    if (!delta) break;
    const double previous = m.residual;
    current = *delta * current;
    current.rotation = orthonormalise(current.rotation);
    m = match(current, live, model, params.rejection_distance);
    result.iterations = it + 1;
    if (m.residual <= result.final_residual) {
      result.final_residual = m.residual;
      result.pose = current;
      best_matched = m.matched_residual;
    }
    if (m.world.empty()) break;
    if (std::abs(previous - m.residual) <= params.relative_tolerance * std::max(previous, 1e-12)) {
      break;
    }
  }
  result.converged = best_matched < params.convergence_residual;
  return result;
}

double depth_score(const DepthImage& rendered, const DepthImage& live, double truncation) {
  const int w = std::min(rendered.width(), live.width());
  const int h = std::min(rendered.height(), live.height());
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float r = rendered(x, y);
      const float l = live(x, y);
      if (!is_valid_depth(r) || !is_valid_depth(l)) continue;
      sum += std::min(static_cast<double>(std::abs(r - l)), truncation);
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(n);
}

RankedResult rank_hypotheses(std::span<const RigidPosed> candidates, const DepthImage& live_depth,
                             const CameraIntrinsics& k, const ScenePointModel& model,
                             const RankingOptions& options) {
  struct Scored {
    RigidPosed pose;
    double score;
    bool converged;
  };
  std::vector<Scored> done;  // parallel to candidates, for duplicate reuse
  done.reserve(candidates.size());

  std::optional<RankedResult> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const RigidPosed& c = candidates[i];
    std::optional<Scored> s;
    for (std::size_t j = 0; j < i && !s; ++j) {
      if (candidates[j].rotation == c.rotation && candidates[j].translation == c.translation) {
        s = done[j];
      }
    }
    if (!s) {
      Scored fresh{c, std::numeric_limits<double>::infinity(), false};
      try {
        if (options.icp) {
          const IcpResult r = icp_refine(c, live_depth, k, model, options.icp_params);
          fresh.pose = r.pose;
          fresh.converged = r.converged;
        }
        fresh.score = depth_score(render_depth(model, fresh.pose, k, options.splat_radius),
                                  live_depth);
      } catch (const EmptyOverlap&) {
      }
      s = fresh;
    }
    done.push_back(*s);
    if (std::isfinite(s->score) && (!best || s->score < best->depth_score)) {
      best = RankedResult{s->pose, s->score, s->converged, i};
    }
  }
  if (!best) throw AllFailed("no candidate pose overlaps the live depth");
  return *best;
}

}  // namespace scoreloc

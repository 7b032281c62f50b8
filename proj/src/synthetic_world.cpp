#include "scoreloc/synthetic_world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "scoreloc/errors.hpp"

namespace scoreloc {

namespace {

constexpr int kWavesPerChannel = 2;

// Entry distance of a ray into a box from outside, if it hits.
std::optional<double> ray_box_entry(const Eigen::AlignedBox3d& box, const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < box.min()[k] || o[k] > box.max()[k]) return std::nullopt;
      continue;
    }
    double t0 = (box.min()[k] - o[k]) / d[k];
    double t1 = (box.max()[k] - o[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || !(t_near > 0.0)) return std::nullopt;
  return t_near;
}

double box_surface_distance(const Eigen::AlignedBox3d& box, const Eigen::Vector3d& p) {
  if (box.contains(p)) {
    const Eigen::Vector3d in = (p - box.min()).cwiseMin(box.max() - p);
    return in.minCoeff();
  }
  return std::sqrt(box.squaredExteriorDistance(p));
}

struct Face {
  Eigen::Vector3d origin, u, v;  // spans origin + a u + b v, a, b in [0, 1]
  double area() const { return u.cross(v).norm(); }
};

void add_box_faces(const Eigen::AlignedBox3d& b, std::vector<Face>& faces) {
  const Eigen::Vector3d lo = b.min();
  const Eigen::Vector3d s = b.sizes();
  const Eigen::Vector3d ex(s.x(), 0, 0), ey(0, s.y(), 0), ez(0, 0, s.z());
  faces.push_back({lo, ey, ez});
  faces.push_back({lo + ex, ey, ez});
  faces.push_back({lo, ex, ez});
  faces.push_back({lo + ey, ex, ez});
  faces.push_back({lo, ex, ey});
  faces.push_back({lo + ez, ex, ey});
}

}  // namespace

void WorldSpec::validate() const {
  if (!(extent.array() > 0.0).all()) throw ConfigError("world extent must be positive");
  if (point_count < 1 || train_frames < 1) throw ConfigError("world counts must be at least 1");
  if (test_offset_edges.size() < 2 ||
      !std::is_sorted(test_offset_edges.begin(), test_offset_edges.end())) {
    throw ConfigError("test offset edges must be an increasing list of at least two values");
  }
  if (!(loop_radius > 0.0) || loop_radius + 0.5 > 0.5 * std::min(extent.x(), extent.y()) ||
      !(camera_height > 0.0 && camera_height < extent.z())) {
    throw ConfigError("training loop does not fit inside the room");
  }
  if (test_offset_edges.back() > loop_radius) {
    throw ConfigError("test offsets must not exceed the loop radius");
  }
  intrinsics.validate();
}

Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward) {
  const Eigen::Vector3d f = forward.normalized();
  const Eigen::Vector3d right = f.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = f.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = f;
  return r;
}

SyntheticWorld::SyntheticWorld(const WorldSpec& spec) : spec_(spec) {
  spec_.validate();
  const Eigen::Vector3d half(spec.extent.x() / 2, spec.extent.y() / 2, 0.0);
  room_ = Eigen::AlignedBox3d(-half, Eigen::Vector3d(half.x(), half.y(), spec.extent.z()));

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  // Furniture against the walls, one wall per box in turn.
  for (int i = 0; i < spec.furniture_count; ++i) {
    const double width = uniform(0.5, 1.0), depth = uniform(0.3, 0.5), height = uniform(0.5, 1.2);
    const double along = uniform(-half.x() + 0.6, half.x() - 0.6);
    Eigen::Vector3d lo, hi;
    switch (i % 4) {
      case 0: lo = {half.x() - depth, along - width / 2, 0}; hi = {half.x(), along + width / 2, height}; break;
      case 1: lo = {along - width / 2, half.y() - depth, 0}; hi = {along + width / 2, half.y(), height}; break;
      case 2: lo = {-half.x(), along - width / 2, 0}; hi = {-half.x() + depth, along + width / 2, height}; break;
      default: lo = {along - width / 2, -half.y(), 0}; hi = {along + width / 2, -half.y() + depth, height}; break;
    }
    furniture_.emplace_back(lo, hi);
  }

  // Clutter: shelves and frames protruding from the walls, and boxes standing
  // on the floor against them.
  for (int i = 0; i < spec.clutter_count; ++i) {
    const double a = uniform(0.1, 0.4), b = uniform(0.1, 0.4), protrude = uniform(0.05, 0.3);
    const double along = uniform(-half.x() + 0.3, half.x() - 0.3);
    const bool on_floor = unit(rng) < 0.25;
    const double z = on_floor ? 0.0 : uniform(0.2, spec.extent.z() - 0.4);
    Eigen::Vector3d lo, hi;
    switch (static_cast<int>(uniform(0.0, 4.0))) {
      case 0: lo = {half.x() - protrude, along - a / 2, z}; hi = {half.x(), along + a / 2, z + b}; break;
      case 1: lo = {along - a / 2, half.y() - protrude, z}; hi = {along + a / 2, half.y(), z + b}; break;
      case 2: lo = {-half.x(), along - a / 2, z}; hi = {-half.x() + protrude, along + a / 2, z + b}; break;
      default: lo = {along - a / 2, -half.y(), z}; hi = {along + a / 2, -half.y() + protrude, z + b}; break;
    }
    furniture_.emplace_back(lo, hi);
  }

  for (int c = 0; c < 3 * kWavesPerChannel; ++c) {
    Eigen::Vector3d dir(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    wave_dirs_.push_back(dir.normalized() * uniform(3.0, 8.0));
    wave_phases_.push_back(uniform(0.0, 2.0 * std::numbers::pi));
  }

  // Reference points: area-weighted face samples that are not buried inside
  // another box.
  std::vector<Face> faces;
  add_box_faces(room_, faces);
  for (const auto& b : furniture_) add_box_faces(b, faces);
  std::vector<double> areas;
  for (const auto& f : faces) areas.push_back(f.area());
  std::discrete_distribution<std::size_t> pick_face(areas.begin(), areas.end());
  std::vector<Eigen::Vector3f> positions;
  std::vector<Rgb8> colours;
  positions.reserve(spec.point_count);
  while (positions.size() < spec.point_count) {
    const Face& f = faces[pick_face(rng)];
    const Eigen::Vector3d p = f.origin + unit(rng) * f.u + unit(rng) * f.v;
    bool buried = false;
    for (const auto& b : furniture_) {
      const Eigen::Vector3d in = (p - b.min()).cwiseMin(b.max() - p);
      if ((in.array() > 1e-9).all()) buried = true;
    }
    if (buried) continue;
    positions.push_back(p.cast<float>());
    colours.push_back(unit_to_rgb(colour_at(p)));
  }
  reference_ = ScenePointModel(std::move(positions), std::move(colours));

  const std::size_t n = spec.train_frames;
  std::vector<double> thetas;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    thetas.push_back(theta);
    train_.push_back(render_frame(loop_pose(theta), static_cast<std::uint32_t>(i)));
  }

  // Test poses: each moves a training pose by a set distance inward and/or
  // vertically (so its nearest training position is exactly that far away)
  // and turns it by a small random rotation.
  const std::size_t bins = spec.test_offset_edges.size() - 1;
  std::uniform_int_distribution<std::size_t> pick_parent(0, n - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t j = 0; j < spec.test_frames; ++j) {
    const std::size_t b = j % bins;
    const double d = uniform(spec.test_offset_edges[b], spec.test_offset_edges[b + 1]);
    const double theta = thetas[pick_parent(rng)];
    const double phi = uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
    const Eigen::Vector3d radial(std::cos(theta), std::sin(theta), 0.0);
    const RigidPosed parent = loop_pose(theta);
    const Eigen::Vector3d axis = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
    const double angle = uniform(0.0, spec.test_max_rotation_degrees) * std::numbers::pi / 180.0;
    RigidPosed pose;
    pose.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix() * parent.rotation;
    pose.translation =
        parent.translation + d * (-std::cos(phi) * radial + std::sin(phi) * Eigen::Vector3d::UnitZ());
    test_offsets_.push_back(d);
    test_.push_back(render_frame(pose, static_cast<std::uint32_t>(n + j)));
  }
}

RigidPosed SyntheticWorld::loop_pose(double theta) const {
  const double yaw = theta + 0.2 * std::sin(2.0 * theta);
  const double pitch = (-10.0 + 20.0 * std::sin(3.0 * theta)) * std::numbers::pi / 180.0;
  const Eigen::Vector3d forward(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch),
                                std::sin(pitch));
  return RigidPosed(look_rotation(forward),
                    Eigen::Vector3d(spec_.loop_radius * std::cos(theta),
                                    spec_.loop_radius * std::sin(theta), spec_.camera_height));
}

std::optional<double> SyntheticWorld::cast_ray(const Eigen::Vector3d& o,
                                               const Eigen::Vector3d& d) const {
  std::vector<std::size_t> all(furniture_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return cast_ray_among(o, d, all);
}

std::optional<double> SyntheticWorld::cast_ray_among(const Eigen::Vector3d& o,
                                                     const Eigen::Vector3d& d,
                                                     std::span<const std::size_t> boxes) const {
  if (!room_.contains(o)) return std::nullopt;
  double t = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d[k] > 0.0) t = std::min(t, (room_.max()[k] - o[k]) / d[k]);
    if (d[k] < 0.0) t = std::min(t, (room_.min()[k] - o[k]) / d[k]);
  }
  for (std::size_t i : boxes) {
    if (const auto hit = ray_box_entry(furniture_[i], o, d)) t = std::min(t, *hit);
  }
  if (!std::isfinite(t)) return std::nullopt;
  return t;
}

double SyntheticWorld::surface_distance(const Eigen::Vector3d& p) const {
  double best = box_surface_distance(room_, p);
  for (const auto& b : furniture_) best = std::min(best, box_surface_distance(b, p));
  return best;
}

Eigen::Vector3d SyntheticWorld::colour_at(const Eigen::Vector3d& p) const {
  Eigen::Vector3d c;
  for (int ch = 0; ch < 3; ++ch) {
    double s = 0.0;
    for (int w = 0; w < kWavesPerChannel; ++w) {
      const std::size_t i = static_cast<std::size_t>(ch * kWavesPerChannel + w);
      s += std::sin(wave_dirs_[i].dot(p) + wave_phases_[i]);
    }
    c[ch] = 0.5 + 0.5 * s / kWavesPerChannel;
  }
  return c;
}

FrameRecord SyntheticWorld::render_frame(const RigidPosed& pose, std::uint32_t index) const {
  const CameraIntrinsics& k = spec_.intrinsics;
  FrameRecord f;
  f.index = index;
  f.pose = pose;
  f.intrinsics = k;
  f.depth = DepthImage(k.width, k.height, kInvalidDepth);
  f.rgb = ColourImage(k.width, k.height, Rgb8{0, 0, 0});

  // Screen-space bounds of every box, so each ray only tests boxes whose
  // projection can contain its pixel.
  struct Bounds {
    std::size_t box;
    int x0, y0, x1, y1;
  };
  std::vector<Bounds> bounds;
  const RigidPosed to_camera = pose.inverse();
  for (std::size_t i = 0; i < furniture_.size(); ++i) {
    Bounds b{i, k.width, k.height, -1, -1};
    int behind = 0;
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d p = to_camera * furniture_[i].corner(static_cast<Eigen::AlignedBox3d::CornerType>(c));
      if (p.z() <= 1e-6) {
        ++behind;
        continue;
      }
      const double u = k.fx * p.x() / p.z() + k.cx, v = k.fy * p.y() / p.z() + k.cy;
      b.x0 = std::min(b.x0, static_cast<int>(std::floor(std::clamp(u, -1e6, 1e6))) - 1);
      b.y0 = std::min(b.y0, static_cast<int>(std::floor(std::clamp(v, -1e6, 1e6))) - 1);
      b.x1 = std::max(b.x1, static_cast<int>(std::ceil(std::clamp(u, -1e6, 1e6))) + 1);
      b.y1 = std::max(b.y1, static_cast<int>(std::ceil(std::clamp(v, -1e6, 1e6))) + 1);
    }
    if (behind == 8) continue;
    if (behind > 0) b = {i, 0, 0, k.width - 1, k.height - 1};
    if (b.x1 < 0 || b.y1 < 0 || b.x0 >= k.width || b.y0 >= k.height) continue;
    bounds.push_back(b);
  }

  std::vector<std::size_t> row, candidates;
  for (int y = 0; y < k.height; ++y) {
    row.clear();
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (y >= bounds[i].y0 && y <= bounds[i].y1) row.push_back(i);
    }
    for (int x = 0; x < k.width; ++x) {
      candidates.clear();
      for (std::size_t i : row) {
        if (x >= bounds[i].x0 && x <= bounds[i].x1) candidates.push_back(bounds[i].box);
      }
      const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const double norm = ray.norm();
      const Eigen::Vector3d dir = pose.rotation * (ray / norm);
      const auto t = cast_ray_among(pose.translation, dir, candidates);
      if (!t) continue;
      f.depth(x, y) = static_cast<float>(*t / norm);
      f.rgb(x, y) = unit_to_rgb(colour_at(pose.translation + *t * dir));
    }
  }
  return f;
}

}  // namespace scoreloc

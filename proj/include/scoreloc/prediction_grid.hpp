#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace scoreloc {

/// Subsampling stride between the source image and the prediction grid.
inline constexpr int kGridStride = 8;

inline int grid_extent(int image_extent) { return image_extent / kGridStride; }

/// Field of predicted pre-training-scene points, one per grid cell. Cell
/// (x, y) holds the prediction for source pixel (8x, 8y).
struct PredictionGrid {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3f> points;
  std::vector<std::uint8_t> valid;

  PredictionGrid() = default;
  PredictionGrid(int w, int h)
      : width(w), height(h),
        points(static_cast<std::size_t>(w) * h, Eigen::Vector3f::Zero()),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  static PredictionGrid ForImage(int image_width, int image_height) {
    return {grid_extent(image_width), grid_extent(image_height)};
  }

  static Eigen::Vector2i source_pixel(int x, int y) {
    return {kGridStride * x, kGridStride * y};
  }

  std::size_t cell_count() const { return points.size(); }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  const Eigen::Vector3f& at(int x, int y) const { return points[index(x, y)]; }

  void set(int x, int y, const Eigen::Vector3f& p) {
    points[index(x, y)] = p;
    valid[index(x, y)] = 1;
  }

  friend bool operator==(const PredictionGrid& a, const PredictionGrid& b) {
    return a.width == b.width && a.height == b.height && a.points == b.points &&
           a.valid == b.valid;
  }
};

}  // namespace scoreloc

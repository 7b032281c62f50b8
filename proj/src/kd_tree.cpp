#include "scoreloc/kd_tree.hpp"

namespace scoreloc {

KdTree::KdTree(std::span<const Eigen::Vector3f> points)
    : points_(points.begin(), points.end()),
      original_(points.size()),
      axis_(points.size(), 0) {
  for (std::size_t i = 0; i < original_.size(); ++i) original_[i] = static_cast<std::uint32_t>(i);
  build(0, points_.size());
}

void KdTree::build(std::size_t begin, std::size_t end) {
  if (end - begin <= kLeafSize) return;

  Eigen::Vector3f lo = points_[begin];
  Eigen::Vector3f hi = points_[begin];
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[i]);
    hi = hi.cwiseMax(points_[i]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  // Sort a permutation, then apply it to both arrays.
  std::vector<std::uint32_t> order(end - begin);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(begin + i);
  const std::size_t mid_offset = order.size() / 2;
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mid_offset),
                   order.end(), [&](std::uint32_t a, std::uint32_t b) {
                     const float pa = points_[a][axis];
                     const float pb = points_[b][axis];
                     return pa < pb || (pa == pb && original_[a] < original_[b]);
                   });
  std::vector<Eigen::Vector3f> p(order.size());
  std::vector<std::uint32_t> o(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    p[i] = points_[order[i]];
    o[i] = original_[order[i]];
  }
  std::copy(p.begin(), p.end(), points_.begin() + static_cast<std::ptrdiff_t>(begin));
  std::copy(o.begin(), o.end(), original_.begin() + static_cast<std::ptrdiff_t>(begin));

  const std::size_t mid = begin + mid_offset;
  axis_[mid] = static_cast<std::uint8_t>(axis);
  build(begin, mid);
  build(mid + 1, end);
}

std::optional<KdTree::Neighbour> KdTree::nearest(const Eigen::Vector3f& query,
                                                 float max_distance) const {
  Neighbour best{0, max_distance * max_distance};
  const float initial = best.squared_distance;
  nearest_in(0, points_.size(), query, best);
  if (!(best.squared_distance < initial)) return std::nullopt;
  best.index = original_[best.index];
  return best;
}

void KdTree::nearest_in(std::size_t begin, std::size_t end, const Eigen::Vector3f& q,
                        Neighbour& best) const {
  if (end - begin <= kLeafSize) {
    for (std::size_t i = begin; i < end; ++i) {
      const float d2 = (points_[i] - q).squaredNorm();
      if (d2 < best.squared_distance) best = {i, d2};
    }
    return;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  const float d2 = (points_[mid] - q).squaredNorm();
  if (d2 < best.squared_distance) best = {mid, d2};

  const int axis = axis_[mid];
  const float diff = q[axis] - points_[mid][axis];
  if (diff < 0.0f) {
    nearest_in(begin, mid, q, best);
    if (diff * diff < best.squared_distance) nearest_in(mid + 1, end, q, best);
  } else {
    nearest_in(mid + 1, end, q, best);
    if (diff * diff < best.squared_distance) nearest_in(begin, mid, q, best);
  }
}

namespace {

bool closer(const KdTree::Neighbour& a, const KdTree::Neighbour& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

}  // namespace

std::vector<KdTree::Neighbour> KdTree::k_nearest(const Eigen::Vector3f& query, std::size_t k) const {
  std::vector<Neighbour> heap;  // max-heap on distance while searching
  if (k == 0) return heap;
  heap.reserve(k + 1);
  k_nearest_in(0, points_.size(), query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  for (auto& n : heap) n.index = original_[n.index];
  return heap;
}

void KdTree::k_nearest_in(std::size_t begin, std::size_t end, const Eigen::Vector3f& q,
                          std::size_t k, std::vector<Neighbour>& heap) const {
  const auto offer = [&](std::size_t i) {
    const Neighbour n{i, (points_[i] - q).squaredNorm()};
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(n, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end(), closer);
    }
  };
  const auto bound = [&] {
    return heap.size() < k ? std::numeric_limits<float>::infinity() : heap.front().squared_distance;
  };
  if (end - begin <= kLeafSize) {
    for (std::size_t i = begin; i < end; ++i) offer(i);
    return;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  offer(mid);
  const int axis = axis_[mid];
  const float diff = q[axis] - points_[mid][axis];
  if (diff < 0.0f) {
    k_nearest_in(begin, mid, q, k, heap);
    if (diff * diff <= bound()) k_nearest_in(mid + 1, end, q, k, heap);
  } else {
    k_nearest_in(mid + 1, end, q, k, heap);
    if (diff * diff <= bound()) k_nearest_in(begin, mid, q, k, heap);
  }
}

void KdTree::radius_search(const Eigen::Vector3f& query, float radius,
                           std::vector<std::size_t>& out) const {
  radius_in(0, points_.size(), query, radius * radius, out);
}

void KdTree::radius_in(std::size_t begin, std::size_t end, const Eigen::Vector3f& q, float r2,
                       std::vector<std::size_t>& out) const {
  if (end - begin <= kLeafSize) {
    for (std::size_t i = begin; i < end; ++i) {
      if ((points_[i] - q).squaredNorm() <= r2) out.push_back(original_[i]);
    }
    return;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  if ((points_[mid] - q).squaredNorm() <= r2) out.push_back(original_[mid]);
  const int axis = axis_[mid];
  const float diff = q[axis] - points_[mid][axis];
  if (diff <= 0.0f || diff * diff <= r2) radius_in(begin, mid, q, r2, out);
  if (diff >= 0.0f || diff * diff <= r2) radius_in(mid + 1, end, q, r2, out);
}

}  // namespace scoreloc

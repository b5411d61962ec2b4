#include "facecorr/spatial_index.hpp"

#include <algorithm>
#include <limits>

namespace fc {

namespace {
constexpr int kLeafSize = 8;
}

SpatialIndex::SpatialIndex(std::span<const Vec3> points)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) throw Error("empty index");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(2 * points_.size() / kLeafSize + 4);
  root_ = build(0, static_cast<int>(points_.size()));
}

int SpatialIndex::build(int begin, int end) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide: keep leaf

  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (points_[a][axis] != points_[b][axis])
                       return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  double split = points_[order_[mid]][axis];

  nodes_[id].axis = axis;
  nodes_[id].split = split;
  int left = build(begin, mid);
  int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void SpatialIndex::nearest_rec(int node, const Vec3& q, int& best_id, double& best_d2) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      int id = order_[i];
      double d2 = (points_[id] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && id < best_id)) {
        best_d2 = d2;
        best_id = id;
      }
    }
    return;
  }
  double delta = q[n.axis] - n.split;
  int first = delta < 0.0 ? n.left : n.right;
  int second = delta < 0.0 ? n.right : n.left;
  nearest_rec(first, q, best_id, best_d2);
  if (delta * delta <= best_d2) nearest_rec(second, q, best_id, best_d2);
}

std::pair<int, double> SpatialIndex::nearest(const Vec3& q) const {
  int best_id = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  nearest_rec(root_, q, best_id, best_d2);
  return {best_id, std::sqrt(best_d2)};
}

void SpatialIndex::radius_rec(int node, const Vec3& q, double r2, std::vector<int>& out) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      int id = order_[i];
      if ((points_[id] - q).squaredNorm() <= r2) out.push_back(id);
    }
    return;
  }
  double delta = q[n.axis] - n.split;
  if (delta < 0.0 || delta * delta <= r2) radius_rec(n.left, q, r2, out);
  if (delta >= 0.0 || delta * delta <= r2) radius_rec(n.right, q, r2, out);
}

std::vector<int> SpatialIndex::radius_query(const Vec3& q, double radius) const {
  std::vector<int> out;
  radius_rec(root_, q, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fc

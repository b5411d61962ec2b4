#pragma once

#include <span>
#include <utility>
#include <vector>

#include "facecorr/geometry.hpp"

namespace fc {

/// k-d tree over a fixed point set. Query results match a brute-force linear
/// scan; exact-distance ties resolve to the lowest point id. Immutable after
/// construction and safe to share across threads.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::span<const Vec3> points);

  /// (id, Euclidean distance) of the nearest stored point.
  std::pair<int, double> nearest(const Vec3& query) const;

  /// Ids of points within `radius` (inclusive), ascending.
  std::vector<int> radius_query(const Vec3& query, double radius) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    int begin = 0, end = 0;  // leaf range into order_
    int axis = -1;           // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(int begin, int end);
  void nearest_rec(int node, const Vec3& q, int& best_id, double& best_d2) const;
  void radius_rec(int node, const Vec3& q, double r2, std::vector<int>& out) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace fc

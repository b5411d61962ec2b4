#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "facecorr/geometry.hpp"

namespace fc {

/// Complete graph over the face set, edges weighted by symmetrized bending
/// energy: weights(i,j) = (beta_ij + beta_ji) / 2.
struct FaceGraph {
  Eigen::MatrixXd weights;
  int node_count() const { return static_cast<int>(weights.rows()); }
};

struct SpanningTree {
  int root = 0;
  std::vector<int> parent_of;               // -1 for root
  std::vector<std::pair<int, int>> edges;   // (parent, child), BFS order from root
};

/// Symmetrized pair weight from the planar projections of a shared landmark
/// set carried by both faces.
double pair_weight(const std::vector<Vec2>& landmarks_i, const std::vector<Vec2>& landmarks_j);

/// All pairwise weights. The parallel version distributes pairs over OpenMP
/// threads writing disjoint slots.
FaceGraph weight_matrix(const std::vector<std::vector<Vec2>>& landmarks, int threads);
FaceGraph weight_matrix_serial(const std::vector<std::vector<Vec2>>& landmarks);

/// Kruskal MST; the maximum-degree node becomes root (ties to the lowest id)
/// unless `root_override` is non-negative. Parent/child orientation by BFS
/// from the root.
SpanningTree build_mst(const FaceGraph& graph, int root_override = -1);

/// Text edge list: one `parent_id child_id weight` line per tree edge.
std::string serialize_edge_list(const SpanningTree& tree, const FaceGraph& graph);

}  // namespace fc

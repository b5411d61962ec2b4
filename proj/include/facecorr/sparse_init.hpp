#pragma once

#include <string>
#include <vector>

#include "facecorr/mesh.hpp"
#include "facecorr/spatial_index.hpp"

namespace fc {

/// Planar ellipse of boundary sample points centred at the nose tip:
/// point k = [a cos(k*delta), b sin(k*delta), 0].
struct HullModel {
  std::vector<Vec3> points;
  double a = 0.0;      // horizontal extremity (mm)
  double b = 0.0;      // vertical extremity (mm)
  double delta = 0.0;  // angular step (rad)
};

/// Convex hull vertex ids of the subsampled xy projection (every
/// `subsample_step`-th vertex), strictly convex corners only, CCW order.
/// Throws Error("degenerate hull") on collinear clouds.
std::vector<int> convex_hull_2d_boundary(const Mesh& mesh, int subsample_step);

/// Builds the boundary model from the face's horizontal/vertical extremities
/// about the nose tip. The face is expected pose-normalized and tip-centred.
HullModel build_hull_model(const Mesh& face, const Vec3& nose_tip, double delta);

/// Per-face result: angle index -> mesh vertex id, -1 where a duplicate
/// correspondence was removed.
struct FaceSparseCorrespondence {
  std::vector<int> angle_to_vertex;
};

/// Splits the model at the horizontal axis, rigidly registers each half to
/// the 3D hull points of that half, then maps every registered model point to
/// its nearest neighbor in the dense cloud. Entries sharing a vertex are all
/// removed. Throws Error("insufficient hull support") when a half has fewer
/// than 3 hull points.
FaceSparseCorrespondence register_hull_model(const HullModel& model, const Mesh& face,
                                             const SpatialIndex& index,
                                             const std::vector<int>& hull_vertices);

/// Sparse correspondences restricted to the angle indices retained on every
/// face, so the shared index set stays consistent for triangulation.
struct SparseCorrespondenceSet {
  int angle_count = 0;
  std::vector<int> retained_angles;          // ascending
  std::vector<std::vector<int>> vertex_ids;  // [face][slot] mesh vertex ids
};

SparseCorrespondenceSet build_sparse_set(const std::vector<const Mesh*>& faces,
                                         const std::vector<const SpatialIndex*>& indices,
                                         double delta, int subsample_step);

/// CSV rows `face_id,angle_index,vertex_id`.
std::string sparse_to_csv(const SparseCorrespondenceSet& set);

}  // namespace fc

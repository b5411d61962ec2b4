#pragma once

#include <optional>
#include <vector>

#include "facecorr/dense_corr.hpp"
#include "facecorr/mesh.hpp"

namespace fc {

/// Geodesic distance from one source point over a triangle mesh.
struct GeodesicField {
  std::vector<double> distance;  // per vertex; +inf where unreachable
  Vec3 source = Vec3::Zero();
};

/// Unit-speed Eikonal solve by fast marching. Acute (and right) triangles use
/// the planar-wavefront update; obtuse corners are handled by unfolding the
/// opposite triangles until a virtual support vertex splits the angle, with a
/// Dijkstra-style edge fallback. The source is snapped to the nearest
/// triangle.
GeodesicField fast_march(const Mesh& mesh, const MeshAdjacency& adj, const Vec3& source);

/// Equidistant samples along the iso-distance polylines of the field, one
/// polyline walk per radius (ascending). Sampling starts at the polyline
/// point of minimum angle about the source so the k-th sample is comparable
/// across faces. When `clip_triangle` is given, only samples whose xy
/// projection lies inside it are kept (curves may spill past it). Radii past
/// the field maximum are skipped.
std::vector<Vec3> sample_iso_curves(const Mesh& mesh, const GeodesicField& field,
                                    const std::vector<double>& radii, double arc_step,
                                    const std::optional<std::array<Vec3, 3>>& clip_triangle = {});

struct LevelSetParams {
  double k_q_mult = 2.0;
  double dedup_mult = 0.25;
  double t_a_override = 0.0;  // <= 0: mean triangle area of the connectivity
  int threads = 0;
};

/// One-shot smooth-region pass: triangulates the n_q best correspondences,
/// and for every triangle larger than t_a marches from its centroid on every
/// face, samples iso-curves, matches descriptors across the tree and appends
/// the accepted points. Existing correspondences are never touched.
void fill_smooth_regions(CorrespondedFaceSet& set, const std::vector<FaceContext>& faces,
                         const SpanningTree& tree, int n_q, const LevelSetParams& params);

}  // namespace fc

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "facecorr/mesh.hpp"
#include "facecorr/spatial_index.hpp"
#include "facecorr/tps.hpp"

namespace fc {

/// Immutable per-face caches shared by the correspondence stages. Queries are
/// read-only, so a context can be used from many threads at once.
struct FaceContext {
  const Mesh* mesh = nullptr;
  std::unique_ptr<SpatialIndex> index;
  MeshAdjacency adjacency;
  std::vector<CurvatureSample> curvature;  // at radius 5*rho
  double rho = 0.0;                        // global resolution
};

FaceContext make_face_context(const Mesh& mesh, int threads);

/// Strip of mesh vertices within 5*rho/2 of the edge line between two
/// corresponded vertices, gathered after rotating about Z so the edge is
/// horizontal. Positions are stored unrotated.
struct GeodesicPatch {
  std::vector<int> vertex_ids;
  std::vector<Vec3> points;
  int va = -1, vb = -1;
  double local_rho = 0.0;
  double theta_rz = 0.0;  // rotation applied during extraction
  Vec3 mean_normal = Vec3::UnitZ();
  bool descriptive = true;
};

GeodesicPatch extract_geodesic_patch(const FaceContext& face, int va, int vb);

/// Frame for descriptor positions: origin at the edge midpoint, x along the
/// rotated edge, z global up.
struct PatchFrame {
  Vec3 origin = Vec3::Zero();
  Mat3 world_to_local = Mat3::Identity();
  Vec3 to_local(const Vec3& p) const { return world_to_local * (p - origin); }
};
PatchFrame patch_frame(const GeodesicPatch& patch);

/// Alignment of patch_2 onto patch_1: rigid frame alignment of the endpoints
/// followed by a thin-plate displacement warp driven by the endpoint pairs
/// and the strip bounding-box corner projections.
struct PatchRegistration {
  GeodesicPatch warped;  // patch_2 carried into patch_1's frame
  RigidTransform rigid;
  std::shared_ptr<ThinPlateSpline2D> displacement;  // xy -> 3D offset, may be null
  bool rigid_only = false;

  Vec3 map_point(const Vec3& p) const;
  Vec3 map_direction(const Vec3& d) const { return rigid.R * d; }
};

PatchRegistration register_patches(const GeodesicPatch& patch_1, const GeodesicPatch& patch_2);

/// Surface points whose local covariance is anisotropic: the ratio of the two
/// leading eigenvalues of the 5*rho spherical crop exceeds t_k.
struct Keypoint {
  Vec3 position;
  double eigen_ratio = 0.0;
  int vertex_id = -1;
  int patch_point_index = -1;
};

/// Marks the patch non-descriptive when fewer than 3 keypoints are found
/// (too few to triangulate).
std::vector<Keypoint> detect_keypoints(const FaceContext& face, GeodesicPatch& patch,
                                       double t_k);

}  // namespace fc

#pragma once

#include <array>
#include <utility>
#include <vector>

#include "facecorr/geometry.hpp"

namespace fc {

class SpatialIndex;

/// Triangle surface mesh. Positions in millimetres.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> normals;   // per-vertex unit vectors; empty until computed
  int dropped_degenerate = 0;  // triangles removed by sanitize()
};

/// Validates triangle indices and drops degenerate (repeated-index or
/// zero-area) triangles, counting them in `dropped_degenerate`.
/// Throws Error on out-of-range indices.
void sanitize(Mesh& mesh);

/// Drops vertices that no triangle references and reindexes the faces.
void remove_isolated_vertices(Mesh& mesh);

/// Area-weighted per-vertex normals from triangle winding. If the mean normal
/// points toward -z the whole field is flipped, so heightfield-style scans in
/// canonical pose face +z.
void compute_vertex_normals(Mesh& mesh);

/// Unique undirected edges (a < b), sorted lexicographically.
std::vector<std::pair<int, int>> unique_edges(const Mesh& mesh);

struct MeshAdjacency {
  std::vector<std::vector<int>> vertex_triangles;  // vertex -> incident triangles
  std::vector<std::vector<int>> vertex_neighbors;  // vertex -> sorted neighbor ids
};
MeshAdjacency build_adjacency(const Mesh& mesh);

/// Global mesh resolution: mean length over the unique edge set.
/// Throws Error("no edges") on an edgeless mesh.
double mesh_resolution(const Mesh& mesh);

/// Local resolution around an edge: mean length of the edges of all triangles
/// incident to either endpoint.
double local_resolution(const Mesh& mesh, const MeshAdjacency& adj, int va, int vb);

/// Principal curvatures (k1 >= k2) plus the local frame of the quadric fitted
/// around a vertex. Curvature sign convention: surfaces bulging along the
/// normal (domes seen from outside) have positive curvature.
struct LocalPatchStats {
  double k1 = 0.0;  // 1/mm
  double k2 = 0.0;  // 1/mm
  Vec3 normal = Vec3::UnitZ();
  Vec3 centroid = Vec3::Zero();
};

/// Fits a second-order surface over the vertices within `radius` of `center`
/// in the frame of the patch normal. Throws Error("patch too sparse") when
/// fewer than 6 neighbors support the fit.
LocalPatchStats estimate_curvature(const Mesh& mesh, const SpatialIndex& index,
                                   int center, double radius);

struct CurvatureSample {
  double k1 = 0.0;
  double k2 = 0.0;
  bool valid = false;
};

/// Per-vertex curvature cache. The OpenMP version writes each slot
/// independently so results are identical for any thread count.
std::vector<CurvatureSample> curvature_field(const Mesh& mesh, const SpatialIndex& index,
                                             double radius, int threads);
std::vector<CurvatureSample> curvature_field_serial(const Mesh& mesh,
                                                    const SpatialIndex& index, double radius);

}  // namespace fc

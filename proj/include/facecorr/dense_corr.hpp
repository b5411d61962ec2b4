#pragma once

#include <string>
#include <vector>

#include "facecorr/descriptor.hpp"
#include "facecorr/graph_org.hpp"
#include "facecorr/patch.hpp"
#include "facecorr/sparse_init.hpp"

namespace fc {

struct DenseCorrParams {
  double t_k = 1.2;          // keypoint eigen-ratio threshold
  double k_q_mult = 2.0;     // quality threshold, multiples of the local rho
  int n_q = 80;              // seed correspondences per iteration
  int t_1 = 3;               // stop when fewer new keypoints appear per sweep
  int max_iters = 50;
  double dedup_mult = 0.25;  // min spacing between correspondences, in rho
  int threads = 0;           // 0 = all
};

/// N faces sharing one point indexing: points[p][f] is point p on face f.
/// All faces carry the same triangulation over the shared indices.
struct CorrespondedFaceSet {
  int face_count = 0;
  std::vector<std::vector<Vec3>> points;  // [point][face]
  std::vector<double> costs;              // match cost at acceptance time
  std::vector<std::array<int, 3>> triangulation;
  std::vector<RigidTransform> to_canonical;  // per face: input frame -> stored frame

  int point_count() const { return static_cast<int>(points.size()); }
  std::vector<Vec3> mean_points() const;
  std::vector<Vec3> face_points(int f) const;
};

/// Delaunay triangulation of the xy projection of the per-point means; the
/// connectivity is shared by every face.
std::vector<std::array<int, 3>> triangulate_mean(const std::vector<Vec3>& mean_points);

/// The iterative keypoint-match loop over parent-child pairs of the spanning
/// tree. Per-edge failures skip that edge; the loop finishes when a full
/// sweep finds at most t_1 new keypoints (or reaches a fixed point / the
/// iteration cap).
CorrespondedFaceSet run_dense_correspondence(const std::vector<FaceContext>& faces,
                                             const SpanningTree& tree,
                                             const SparseCorrespondenceSet& sparse,
                                             const DenseCorrParams& params);

/// Directory layout: face_###.ply (shared vertex order), triangles.txt,
/// costs.csv, transforms.txt, manifest.txt.
void save_corresponded_set(const CorrespondedFaceSet& set, const std::string& dir);
CorrespondedFaceSet load_corresponded_set(const std::string& dir);

}  // namespace fc

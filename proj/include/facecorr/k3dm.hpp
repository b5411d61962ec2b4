#pragma once

#include <Eigen/Core>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "facecorr/dense_corr.hpp"
#include "facecorr/mesh.hpp"

namespace fc {

/// Statistical deformable model: mean shape, orthonormal variation basis and
/// eigenvalue spectrum over faces vectorized as [x_1..x_P, y_1..y_P, z_1..z_P].
struct DeformableModel {
  Eigen::VectorXd mean;    // 3P
  Eigen::MatrixXd basis;   // 3P x n, orthonormal columns
  Eigen::VectorXd spectrum;  // n eigenvalues, non-increasing
  int face_count = 0;      // N source faces
  int point_count = 0;     // P
  std::vector<std::array<int, 3>> triangulation;
  std::map<std::string, int> landmarks;               // name -> point index
  std::map<std::string, std::vector<int>> regions;    // name -> point indices

  int mode_count() const { return static_cast<int>(basis.cols()); }
  Eigen::VectorXd instance(const Eigen::VectorXd& alpha) const;
  Vec3 point_of(const Eigen::VectorXd& vec, int index) const;
};

Eigen::VectorXd vectorize_points(const std::vector<Vec3>& points);

/// Mean + eigendecomposition of the corresponded set, truncated to retain
/// `energy_retain` of the spectrum energy. Throws Error("insufficient faces")
/// for fewer than two faces.
DeformableModel build_model(const CorrespondedFaceSet& set, double energy_retain = 0.98);

/// Training-face shape parameters: basis^T (face - mean).
Eigen::VectorXd project(const DeformableModel& model, const Eigen::VectorXd& face_vector);

Mesh instance_mesh(const DeformableModel& model, const Eigen::VectorXd& alpha);

struct FitParams {
  double lambda = 0.8;
  double eps_f = 1e-4;
  int max_iters = 100;
  std::vector<int> region;  // optional pre-mask of model point indices
};

struct FitResult {
  Eigen::VectorXd alpha;
  std::vector<Vec3> registered_query;  // per model point, aligned NN query points
  std::vector<double> residual_trace;  // per-iteration error
  std::vector<bool> inlier_mask;
  RigidTransform query_to_model;
  int iterations = 0;
};

/// Iterates NN correspondence (k-d tree), outlier rejection at
/// t_c = mean + 3*SD of the NN distances, rigid alignment, and the ridge
/// system (U*^T U* + lambda I) alpha = U*^T (q_r - mu*) + lambda alpha_prev,
/// until the inlier residual drops to eps_f or the iteration cap. Duplicate
/// NN hits collapse to the closest pair. Throws Error("fit diverged") when
/// inliers fall below half the (masked) model points.
FitResult fit(const DeformableModel& model, const Mesh& query, const FitParams& params = {});

struct AugmentParams {
  FitParams fit;
  double energy_retain = 0.98;
  double hull_delta = std::numbers::pi / 36.0;
  int hull_subsample = 4;
};

struct AugmentResult {
  DeformableModel model;
  CorrespondedFaceSet corresponded;  // source set plus the installed faces
  std::vector<int> skipped;          // indices of new faces whose fit failed
};

/// Algorithm-3 style growth: the new faces are ordered by a bending-energy
/// spanning tree rooted at the face closest to the model mean, then fitted
/// and installed one at a time, rebuilding the model after each insertion.
AugmentResult augment(const DeformableModel& model, const CorrespondedFaceSet& source,
                      const std::vector<Mesh>& new_faces, const AugmentParams& params = {});

struct LandmarkTransfer {
  std::string name;
  Vec3 on_instance;  // position on the fitted model instance
  Vec3 on_query;     // position on the registered query
};

std::vector<LandmarkTransfer> transfer_landmarks(
    const DeformableModel& model, const std::vector<std::pair<std::string, int>>& annotations,
    const FitResult& fit_result);

/// Angle between two shape-parameter vectors, clamped to [0, pi]. Throws
/// Error("undefined angle") on zero input.
double recognition_distance(const Eigen::VectorXd& alpha_gallery,
                            const Eigen::VectorXd& alpha_query);

/// Versioned little-endian binary container, magic "K3DM".
void save_model(const DeformableModel& model, const std::string& path);
DeformableModel load_model(const std::string& path);

}  // namespace fc

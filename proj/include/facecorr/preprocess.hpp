#pragma once

#include <optional>

#include "facecorr/mesh.hpp"

namespace fc {

struct PreprocessConfig {
  double crop_radius = 80.0;     // mm
  double grid_spacing = 1.0;     // mm
  double smoothing_weight = 0.1; // unitless
  int max_pose_iters = 20;
};

/// Vertex maximizing the view-axis (+z) projection within the central 50%
/// window of the xy bounding box. A manual override point is returned
/// unchanged. Throws Error("nose tip not found") when the window is empty.
Vec3 detect_nose_tip(const Mesh& mesh, const std::optional<Vec3>& manual_override = {});

struct PoseResult {
  Mesh mesh;
  Mat3 rotation;     // applied rotation: v_out = rotation * v_in + translation
  Vec3 translation;
  int iterations = 0;
};

/// Iterated Hotelling transform: recenter at the vertex mean, rotate by the
/// covariance eigenvectors until the update is within 1e-6 of the identity or
/// `max_iters` is reached. Axis convention: largest-variance axis -> +y,
/// smallest -> +z with the deeper extremity positive, x completes the
/// right-handed frame. Throws Error("degenerate geometry") on rank-deficient
/// covariance.
PoseResult pose_normalize(const Mesh& mesh, int max_iters);

/// Keeps vertices within crop_radius of the nose tip and resamples them onto
/// a uniform xy grid by a least-squares fit with a Laplacian smoothness
/// penalty. The output is a regular, hole-free disk-shaped grid mesh with the
/// nose tip at the origin. `tip_height`, when given, receives the fitted
/// height that was subtracted to pin the tip. Throws
/// Error("crop too aggressive") when fewer than 100 vertices survive the crop.
Mesh crop_and_fill(const Mesh& mesh, const Vec3& nose_tip, const PreprocessConfig& cfg,
                   double* tip_height = nullptr);

enum class PreprocessMode {
  kFull,       // pose normalize + nose-tip centering + grid resample
  kRigidOnly,  // pose normalize + nose-tip centering (already-clean meshes)
};

struct PreprocessResult {
  Mesh mesh;
  RigidTransform to_canonical;  // input frame -> output frame
  Vec3 nose_tip = Vec3::Zero(); // in the output frame (origin by construction)
};

PreprocessResult preprocess_pipeline(const Mesh& mesh, const PreprocessConfig& cfg,
                                     PreprocessMode mode);

}  // namespace fc

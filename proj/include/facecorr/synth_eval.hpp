#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "facecorr/dense_corr.hpp"
#include "facecorr/k3dm.hpp"
#include "facecorr/mesh.hpp"
#include "facecorr/spatial_index.hpp"

namespace fc {

struct TemplateParams {
  double spacing = 2.0;      // grid step (mm)
  double half_width = 60.0;  // ellipse half axis along x (mm)
  double half_height = 70.0; // ellipse half axis along y (mm)
};

/// Procedural face-like heightfield: ellipsoidal dome with a nose ridge, eye
/// depressions, brow and a mouth groove. Canonical pose, nose tip at the
/// origin, named landmarks and region index sets included.
struct FaceTemplate {
  Mesh mesh;
  std::map<std::string, int> landmarks;  // includes "nose_tip"
  std::map<std::string, std::vector<int>> regions;  // "nose", "eyes"
  TemplateParams params;
};

FaceTemplate make_face_template(const TemplateParams& params = {});

/// Smooth warp plus small rigid perturbation applied to the template to make
/// one family member. The control displacements drive a 2D thin-plate
/// interpolant of 3D offsets.
struct MemberWarp {
  std::vector<Vec2> control_xy;
  std::vector<Vec3> control_disp;
  RigidTransform rigid;

  Vec3 warp_only(const Vec3& template_point) const;  // before the rigid part
  Vec3 apply(const Vec3& template_point) const;

 private:
  mutable std::shared_ptr<const class ThinPlateSpline2D> solver_;
};

/// N meshes in exact correspondence with the template (member vertex k is the
/// warped template vertex k), with the warps kept for ground-truth mapping.
struct SyntheticFamily {
  FaceTemplate face_template;
  std::vector<Mesh> members;
  std::vector<MemberWarp> warps;
  std::uint64_t seed = 0;
  double warp_magnitude = 0.0;

  /// Chart maps through the template: exact piecewise-linear inverses via
  /// nearest-triangle barycentric coordinates.
  Vec3 member_to_template(int member, const Vec3& point_on_member) const;
  Vec3 template_to_member(int member, const Vec3& point_on_template) const;

  // lookup structures filled by generate_family
  std::vector<std::shared_ptr<SpatialIndex>> member_index;
  std::vector<std::shared_ptr<MeshAdjacency>> member_adjacency;
  std::shared_ptr<SpatialIndex> template_index;
  std::shared_ptr<MeshAdjacency> template_adjacency;
};

/// Deterministic per seed. Warps that flip a triangle are regenerated at
/// reduced magnitude. Rigid perturbations stay within 5 degrees / 5 mm.
SyntheticFamily generate_family(const FaceTemplate& face_template, int n, double warp_magnitude,
                                std::uint64_t seed);

struct EvalReport {
  std::vector<double> per_point_mean_error;
  std::vector<double> per_point_max_error;
  double mean = 0.0;
  double sd = 0.0;
  double max = 0.0;
  std::array<double, 20> cumulative{};  // % of records within d = 1..20 mm
  double coverage = 0.0;                // corresponded points / template points
  std::size_t record_count = 0;
};

/// Ground-truth localization error: each corresponded point is pulled back to
/// the template chart on every face and the pairwise distances are measured
/// there, so the error is symmetric per pair. The stored per-face transforms
/// of the set are applied to return points to the input frames first.
EvalReport evaluate_correspondence(const SyntheticFamily& family,
                                   const CorrespondedFaceSet& set, int threads);
EvalReport evaluate_correspondence_serial(const SyntheticFamily& family,
                                          const CorrespondedFaceSet& set);

std::string eval_report_csv(const EvalReport& report);
std::string eval_report_summary(const EvalReport& report);

/// Linear interpolation in shape space written as numbered PLY frames
/// (morph_000.ply ...). Endpoints are the two instances themselves.
void export_morph(const DeformableModel& model, const Eigen::VectorXd& alpha_from,
                  const Eigen::VectorXd& alpha_to, int steps, const std::string& dir);

}  // namespace fc

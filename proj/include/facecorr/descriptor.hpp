#pragma once

#include <array>
#include <vector>

#include "facecorr/patch.hpp"

namespace fc {

inline constexpr int kDescriptorSize = 38;

/// 38-component keypoint signature:
///   [0..2]   position (patch-local frame, mm)
///   [3..5]   surface normal (patch-local frame)
///   [6..26]  seven invariant moments of the 3x3 occupancy histograms for the
///            XY, YZ and XZ projections of the crop
///   [27..28] mean principal curvatures k1bar, k2bar over the crop
///   [29]     Gaussian curvature K
///   [30]     mean curvature H
///   [31..32] shape indices s_a in [0,1], s_b in [-1,1]
///   [33]     curvedness c
///   [34]     log-curvedness c_l
///   [35]     Willmore energy e_w = H^2 - K
///   [36]     shape-curvedness c_s = s_b * c_l
///   [37]     log difference map m_l = ln(K - H + 1)
struct Descriptor {
  std::array<double, kDescriptorSize> v{};

  double position(int i) const { return v[i]; }
  double k1bar() const { return v[27]; }
  double k2bar() const { return v[28]; }
  double gaussian() const { return v[29]; }
  double mean_curv() const { return v[30]; }
  double shape_a() const { return v[31]; }
  double shape_b() const { return v[32]; }
  double curvedness() const { return v[33]; }
  double log_curvedness() const { return v[34]; }
  double willmore() const { return v[35]; }
  double shape_curvedness() const { return v[36]; }
  double log_diff() const { return v[37]; }
};

/// Extracts the descriptor of the surface crop of `radius` around
/// `crop_center`. `frame` orients the histogram projections; the position and
/// normal features are supplied by the caller already expressed in the frame
/// shared by the patch pair (for unwarped keypoints that is simply the point
/// itself and its mesh normal). Throws Error("descriptor support too small")
/// when fewer than 6 points fall in the crop.
Descriptor extract_descriptor(const FaceContext& face, const Vec3& crop_center, double radius,
                              const PatchFrame& frame, const Vec3& position_feature,
                              const Vec3& normal_feature);

/// Convenience overload: world frame, position = the point itself.
Descriptor extract_descriptor(const FaceContext& face, const Vec3& point, double radius);

struct MatchResult {
  std::vector<std::array<int, 2>> pairs;  // (index in a, index in b)
  std::vector<double> costs;
};

/// Mutual nearest neighbors under the squared distance of the normalized
/// feature vectors, accepted when the cost is at most k_q. Positions stay in
/// millimetres; all other components are z-scored over the union of both
/// lists and multiplied by `z_scale`, which calibrates the unitless block
/// against the millimetre positions (pipelines pass rho/sqrt(35) so the block
/// carries about one resolution unit of weight). Each keypoint appears in at
/// most one pair.
MatchResult match_keypoints(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b,
                            double k_q, double z_scale = 1.0);

}  // namespace fc

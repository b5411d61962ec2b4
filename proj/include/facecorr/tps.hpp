#pragma once

#include <Eigen/Core>
#include <vector>

#include "facecorr/geometry.hpp"

namespace fc {

/// 2D thin-plate spline interpolating d-dimensional values at planar sites.
/// Kernel U(r) = r^2 log r. The integral bending energy of each interpolated
/// column equals w^T K w (up to the usual 8*pi constant), zero exactly for
/// affine value fields.
class ThinPlateSpline2D {
 public:
  /// `values` is sites x d. Throws Error("degenerate landmark configuration")
  /// on coincident/collinear sites or fewer than 3 of them.
  ThinPlateSpline2D(const std::vector<Vec2>& sites, const Eigen::MatrixXd& values);

  Eigen::VectorXd evaluate(const Vec2& q) const;

  /// Bending energy summed over all value columns (clamped at 0).
  double bending_energy() const;

  int site_count() const { return static_cast<int>(sites_.size()); }

 private:
  std::vector<Vec2> sites_;
  Eigen::MatrixXd weights_;  // (n+3) x d: kernel weights then affine (1, x, y)
  Eigen::MatrixXd kernel_;   // n x n
};

/// Bending energy of the spline mapping src -> dst (both planar, equal
/// counts >= 4). Non-negative; zero for affine maps.
double tps_bending_energy(const std::vector<Vec2>& src, const std::vector<Vec2>& dst);

}  // namespace fc

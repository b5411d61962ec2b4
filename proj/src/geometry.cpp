#include "facecorr/geometry.hpp"

#include <Eigen/Dense>
#include <vector>

namespace fc {

RigidTransform rigid_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.empty()) throw Error("rigid_align: size mismatch");
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= static_cast<double>(src.size());
  mu_d /= static_cast<double>(dst.size());

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i)
    cross += (src[i] - mu_s) * (dst[i] - mu_d).transpose();

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  return {R, mu_d - R * mu_s};
}

}  // namespace fc

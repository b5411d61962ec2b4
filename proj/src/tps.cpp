#include "facecorr/tps.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace fc {

namespace {

double kernel_u(double r2) {
  // r^2 log r = 0.5 * r^2 log r^2, continuous at 0.
  return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
}

}  // namespace

ThinPlateSpline2D::ThinPlateSpline2D(const std::vector<Vec2>& sites,
                                     const Eigen::MatrixXd& values)
    : sites_(sites) {
  const int n = static_cast<int>(sites.size());
  if (n < 3 || values.rows() != n) throw Error("degenerate landmark configuration");

  kernel_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    kernel_(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double r2 = (sites[i] - sites[j]).squaredNorm();
      if (r2 <= 1e-18) throw Error("degenerate landmark configuration");
      kernel_(i, j) = kernel_(j, i) = kernel_u(r2);
    }
  }

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
  L.topLeftCorner(n, n) = kernel_;
  for (int i = 0; i < n; ++i) {
    L(i, n) = L(n, i) = 1.0;
    L(i, n + 1) = L(n + 1, i) = sites[i].x();
    L(i, n + 2) = L(n + 2, i) = sites[i].y();
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, values.cols());
  rhs.topRows(n) = values;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
  if (!lu.isInvertible()) throw Error("degenerate landmark configuration");
  weights_ = lu.solve(rhs);
}

Eigen::VectorXd ThinPlateSpline2D::evaluate(const Vec2& q) const {
  const int n = site_count();
  Eigen::VectorXd out = weights_.row(n).transpose() +
                        weights_.row(n + 1).transpose() * q.x() +
                        weights_.row(n + 2).transpose() * q.y();
  for (int i = 0; i < n; ++i)
    out += weights_.row(i).transpose() * kernel_u((sites_[i] - q).squaredNorm());
  return out;
}

double ThinPlateSpline2D::bending_energy() const {
  const int n = site_count();
  double total = 0.0;
  for (int c = 0; c < weights_.cols(); ++c) {
    const Eigen::VectorXd w = weights_.col(c).head(n);
    total += w.dot(kernel_ * w);
  }
  return total > 0.0 ? total : 0.0;
}

double tps_bending_energy(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  if (src.size() != dst.size() || src.size() < 4) throw Error("degenerate landmark configuration");
  Eigen::MatrixXd values(src.size(), 2);
  for (std::size_t i = 0; i < dst.size(); ++i) values.row(i) = dst[i].transpose();
  return ThinPlateSpline2D(src, values).bending_energy();
}

}  // namespace fc

#include "facecorr/preprocess.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fc {

Vec3 detect_nose_tip(const Mesh& mesh, const std::optional<Vec3>& manual_override) {
  if (manual_override) return *manual_override;
  if (mesh.vertices.empty()) throw Error("nose tip not found");

  Vec3 lo = mesh.vertices[0], hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec2 center(0.5 * (lo.x() + hi.x()), 0.5 * (lo.y() + hi.y()));
  const Vec2 half(0.25 * (hi.x() - lo.x()), 0.25 * (hi.y() - lo.y()));

  int best = -1;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    if (std::abs(v.x() - center.x()) > half.x() || std::abs(v.y() - center.y()) > half.y())
      continue;
    if (best < 0 || v.z() > mesh.vertices[best].z()) best = static_cast<int>(i);
  }
  if (best < 0) throw Error("nose tip not found");
  return mesh.vertices[best];
}

namespace {

// Sign disambiguation: flip an axis so the farther extremity along it is
// positive. Leaves near-symmetric axes alone.
double axis_sign(const std::vector<Vec3>& pts, const Vec3& axis) {
  double mx = -std::numeric_limits<double>::infinity();
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double d = p.dot(axis);
    mx = std::max(mx, d);
    mn = std::min(mn, d);
  }
  if (std::abs(mx) >= std::abs(mn)) return 1.0;
  return -1.0;
}

}  // namespace

PoseResult pose_normalize(const Mesh& mesh, int max_iters) {
  if (mesh.vertices.size() < 3) throw Error("degenerate geometry");

  PoseResult result;
  result.mesh = mesh;
  result.rotation = Mat3::Identity();
  result.translation = Vec3::Zero();
  auto& pts = result.mesh.vertices;

  for (int iter = 0; iter < max_iters; ++iter) {
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());

    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
      const Vec3 d = p - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(pts.size());

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    if (evals(1) <= 1e-10 * std::max(evals(2), 1e-300)) throw Error("degenerate geometry");

    // largest -> y, smallest -> z (depth), x completes right-handed frame
    Vec3 ay = eig.eigenvectors().col(2);
    Vec3 az = eig.eigenvectors().col(0);

    std::vector<Vec3> centered(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) centered[i] = pts[i] - mean;
    az *= axis_sign(centered, az);
    ay *= axis_sign(centered, ay);
    const Vec3 ax = ay.cross(az);

    Mat3 rot;  // world -> canonical: rows are the axes
    rot.row(0) = ax.transpose();
    rot.row(1) = ay.transpose();
    rot.row(2) = az.transpose();

    for (auto& p : pts) p = rot * (p - mean);
    result.rotation = rot * result.rotation;
    result.translation = rot * (result.translation - mean);
    result.iterations = iter + 1;

    if ((rot - Mat3::Identity()).norm() < 1e-6) break;
  }

  if (!result.mesh.normals.empty()) compute_vertex_normals(result.mesh);
  return result;
}

Mesh crop_and_fill(const Mesh& mesh, const Vec3& nose_tip, const PreprocessConfig& cfg,
                   double* tip_height) {
  if (cfg.crop_radius <= 0.0 || cfg.grid_spacing <= 0.0) throw Error("invalid preprocess config");

  std::vector<Vec3> data;
  for (const auto& v : mesh.vertices) {
    if ((v - nose_tip).norm() <= cfg.crop_radius) data.push_back(v - nose_tip);
  }
  if (data.size() < 100) throw Error("crop too aggressive");

  const double h = cfg.grid_spacing;
  const int half = static_cast<int>(std::ceil(cfg.crop_radius / h));
  const int side = 2 * half + 1;
  const int unknowns = side * side;
  auto node = [&](int ix, int iy) { return iy * side + ix; };

  // Least squares: bilinear interpolation rows against data z plus
  // second-difference smoothness rows along each axis.
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(unknowns);
  Eigen::SparseMatrix<double> ata(unknowns, unknowns);

  std::vector<Eigen::Triplet<double>> a_trips;
  for (const auto& p : data) {
    const double gx = (p.x() + half * h) / h;
    const double gy = (p.y() + half * h) / h;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    ix = std::clamp(ix, 0, side - 2);
    iy = std::clamp(iy, 0, side - 2);
    const double fx = std::clamp(gx - ix, 0.0, 1.0);
    const double fy = std::clamp(gy - iy, 0.0, 1.0);
    const int n00 = node(ix, iy), n10 = node(ix + 1, iy);
    const int n01 = node(ix, iy + 1), n11 = node(ix + 1, iy + 1);
    const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
    const double w01 = (1 - fx) * fy, w11 = fx * fy;
    const int cols[4] = {n00, n10, n01, n11};
    const double w[4] = {w00, w10, w01, w11};
    for (int a = 0; a < 4; ++a) {
      atb(cols[a]) += w[a] * p.z();
      for (int b = 0; b < 4; ++b) trips.emplace_back(cols[a], cols[b], w[a] * w[b]);
    }
  }

  const double sw = std::max(cfg.smoothing_weight, 1e-9);
  for (int iy = 0; iy < side; ++iy) {
    for (int ix = 1; ix + 1 < side; ++ix) {
      const int c[3] = {node(ix - 1, iy), node(ix, iy), node(ix + 1, iy)};
      const double w[3] = {1.0, -2.0, 1.0};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) trips.emplace_back(c[a], c[b], sw * w[a] * w[b]);
    }
  }
  for (int ix = 0; ix < side; ++ix) {
    for (int iy = 1; iy + 1 < side; ++iy) {
      const int c[3] = {node(ix, iy - 1), node(ix, iy), node(ix, iy + 1)};
      const double w[3] = {1.0, -2.0, 1.0};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) trips.emplace_back(c[a], c[b], sw * w[a] * w[b]);
    }
  }
  // Tiny ridge keeps nodes with neither data nor both-axis stencils solvable.
  for (int i = 0; i < unknowns; ++i) trips.emplace_back(i, i, 1e-12);

  ata.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(ata);
  if (solver.info() != Eigen::Success) throw Error("grid fit failed");
  const Eigen::VectorXd z = solver.solve(atb);

  Mesh out;
  std::vector<int> vertex_of(unknowns, -1);
  const double r2 = cfg.crop_radius * cfg.crop_radius;
  for (int iy = 0; iy < side; ++iy) {
    for (int ix = 0; ix < side; ++ix) {
      const double x = (ix - half) * h, y = (iy - half) * h;
      if (x * x + y * y > r2) continue;
      vertex_of[node(ix, iy)] = static_cast<int>(out.vertices.size());
      out.vertices.emplace_back(x, y, z(node(ix, iy)));
    }
  }
  for (int iy = 0; iy + 1 < side; ++iy) {
    for (int ix = 0; ix + 1 < side; ++ix) {
      const int v00 = vertex_of[node(ix, iy)], v10 = vertex_of[node(ix + 1, iy)];
      const int v01 = vertex_of[node(ix, iy + 1)], v11 = vertex_of[node(ix + 1, iy + 1)];
      if (v00 < 0 || v10 < 0 || v01 < 0 || v11 < 0) continue;
      if ((ix + iy) % 2 == 0) {
        out.triangles.push_back({v00, v10, v11});
        out.triangles.push_back({v00, v11, v01});
      } else {
        out.triangles.push_back({v00, v10, v01});
        out.triangles.push_back({v10, v11, v01});
      }
    }
  }

  // Re-zero the tip height so the nose tip sits exactly at the origin.
  const double z0 = z(node(half, half));
  for (auto& v : out.vertices) v.z() -= z0;
  if (tip_height) *tip_height = z0;

  sanitize(out);
  remove_isolated_vertices(out);
  compute_vertex_normals(out);
  return out;
}

PreprocessResult preprocess_pipeline(const Mesh& mesh, const PreprocessConfig& cfg,
                                     PreprocessMode mode) {
  PoseResult pose = pose_normalize(mesh, cfg.max_pose_iters);
  const Vec3 tip = detect_nose_tip(pose.mesh);

  PreprocessResult result;
  if (mode == PreprocessMode::kRigidOnly) {
    result.mesh = std::move(pose.mesh);
    for (auto& v : result.mesh.vertices) v -= tip;
    compute_vertex_normals(result.mesh);
    result.to_canonical = {pose.rotation, pose.translation - tip};
  } else {
    double z0 = 0.0;
    result.mesh = crop_and_fill(pose.mesh, tip, cfg, &z0);
    result.to_canonical = {pose.rotation, pose.translation - tip - Vec3(0, 0, z0)};
  }
  result.nose_tip = Vec3::Zero();
  return result;
}

}  // namespace fc

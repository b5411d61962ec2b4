#include "facecorr/patch.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

namespace fc {

FaceContext make_face_context(const Mesh& mesh, int threads) {
  FaceContext ctx;
  ctx.mesh = &mesh;
  ctx.index = std::make_unique<SpatialIndex>(mesh.vertices);
  ctx.adjacency = build_adjacency(mesh);
  ctx.rho = mesh_resolution(mesh);
  ctx.curvature = curvature_field(mesh, *ctx.index, 5.0 * ctx.rho, threads);
  return ctx;
}

GeodesicPatch extract_geodesic_patch(const FaceContext& face, int va, int vb) {
  if (va == vb) throw Error("degenerate patch edge");
  const Mesh& mesh = *face.mesh;
  GeodesicPatch patch;
  patch.va = va;
  patch.vb = vb;
  patch.local_rho = local_resolution(mesh, face.adjacency, va, vb);

  const Vec3& a = mesh.vertices[va];
  const Vec3& b = mesh.vertices[vb];
  patch.theta_rz = std::atan2(b.y() - a.y(), b.x() - a.x());
  const Mat3 rot = rotation_z(-patch.theta_rz);

  const Vec3 ra = rot * a, rb = rot * b;
  const double x_lo = std::min(ra.x(), rb.x()), x_hi = std::max(ra.x(), rb.x());
  const double y_mid = 0.5 * (ra.y() + rb.y());
  const double half_width = 2.5 * patch.local_rho;

  if ((b - a).norm() < patch.local_rho) {
    // Minimal support: the endpoints' 1-rings.
    std::set<int> ids{va, vb};
    for (int v : {va, vb})
      for (int nb : face.adjacency.vertex_neighbors[v]) ids.insert(nb);
    for (int id : ids) {
      patch.vertex_ids.push_back(id);
      patch.points.push_back(mesh.vertices[id]);
    }
  } else {
    // Candidates from the strip's bounding sphere, then the rotated-box test.
    const Vec3 mid = 0.5 * (a + b);
    const double reach = 0.5 * (x_hi - x_lo) + half_width + 1e-9;
    const double bound = std::sqrt(reach * reach + half_width * half_width);
    for (int id : face.index->radius_query(mid, bound)) {
      const Vec3 q = rot * mesh.vertices[id];
      if (q.x() < x_lo - 1e-9 || q.x() > x_hi + 1e-9) continue;
      if (std::abs(q.y() - y_mid) > half_width + 1e-9) continue;
      patch.vertex_ids.push_back(id);
      patch.points.push_back(mesh.vertices[id]);
    }
  }

  if (patch.points.empty()) {
    patch.descriptive = false;
    return patch;
  }

  if (!mesh.normals.empty()) {
    Vec3 n = Vec3::Zero();
    for (int id : patch.vertex_ids) n += mesh.normals[id];
    if (n.norm() > 1e-12) patch.mean_normal = n.normalized();
  }
  return patch;
}

PatchFrame patch_frame(const GeodesicPatch& patch) {
  PatchFrame frame;
  frame.origin = Vec3::Zero();
  frame.world_to_local = rotation_z(-patch.theta_rz);
  return frame;
}

Vec3 PatchRegistration::map_point(const Vec3& p) const {
  Vec3 q = rigid.apply(p);
  if (displacement) q += displacement->evaluate(Vec2(q.x(), q.y()));
  return q;
}

namespace {

// Patch endpoint positions as stored in the point list.
void endpoint_positions(const GeodesicPatch& p, const std::vector<Vec3>& points, Vec3& a,
                        Vec3& b) {
  a = points.front();
  b = points.front();
  for (std::size_t i = 0; i < p.vertex_ids.size(); ++i) {
    if (p.vertex_ids[i] == p.va) a = points[i];
    if (p.vertex_ids[i] == p.vb) b = points[i];
  }
}

// Orthonormal frame pinned to a patch: x along the edge, z near the patch
// normal.
Mat3 patch_axes(const Vec3& a, const Vec3& b, const Vec3& normal) {
  Vec3 x = b - a;
  if (x.norm() < 1e-12) x = Vec3::UnitX();
  x.normalize();
  Vec3 z = normal - normal.dot(x) * x;
  if (z.norm() < 1e-9) z = std::abs(x.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitY();
  z.normalize();
  Mat3 axes;
  axes.col(0) = x;
  axes.col(1) = z.cross(x);
  axes.col(2) = z;
  return axes;
}

struct BoxControls {
  std::vector<Vec3> points;  // endpoints then 4 xy-box corners projected to the strip
};

BoxControls control_points(const std::vector<Vec3>& pts, const Vec3& end_a, const Vec3& end_b) {
  BoxControls ctl;
  ctl.points.push_back(end_a);
  ctl.points.push_back(end_b);
  Vec2 lo(pts[0].x(), pts[0].y()), hi = lo;
  for (const auto& p : pts) {
    lo = lo.cwiseMin(Vec2(p.x(), p.y()));
    hi = hi.cwiseMax(Vec2(p.x(), p.y()));
  }
  const Vec2 corners[4] = {{lo.x(), lo.y()}, {lo.x(), hi.y()}, {hi.x(), lo.y()}, {hi.x(), hi.y()}};
  for (const auto& c : corners) {
    // z from the nearest strip point in xy
    double best = std::numeric_limits<double>::infinity();
    double z = 0.0;
    for (const auto& p : pts) {
      const double d = (Vec2(p.x(), p.y()) - c).squaredNorm();
      if (d < best) {
        best = d;
        z = p.z();
      }
    }
    ctl.points.emplace_back(c.x(), c.y(), z);
  }
  return ctl;
}

}  // namespace

PatchRegistration register_patches(const GeodesicPatch& patch_1, const GeodesicPatch& patch_2) {
  if (patch_1.points.empty() || patch_2.points.empty()) throw Error("empty patch");

  PatchRegistration reg;

  // Rigid: align patch_2's edge frame onto patch_1's.
  Vec3 a1, b1, a2_raw, b2_raw;
  endpoint_positions(patch_1, patch_1.points, a1, b1);
  endpoint_positions(patch_2, patch_2.points, a2_raw, b2_raw);
  const Mat3 f1 = patch_axes(a1, b1, patch_1.mean_normal);
  const Mat3 f2 = patch_axes(a2_raw, b2_raw, patch_2.mean_normal);
  const Vec3 o1 = 0.5 * (a1 + b1), o2 = 0.5 * (a2_raw + b2_raw);
  reg.rigid.R = f1 * f2.transpose();
  reg.rigid.t = o1 - reg.rigid.R * o2;

  std::vector<Vec3> moved(patch_2.points.size());
  for (std::size_t i = 0; i < patch_2.points.size(); ++i)
    moved[i] = reg.rigid.apply(patch_2.points[i]);

  // Trimmed rigid refinement against patch_1's cloud. The endpoint frames
  // only align the seed edge; when the seeds are off, the surface relief has
  // to pull the strips back together before the thin-plate step.
  if (patch_1.points.size() >= 8 && moved.size() >= 8) {
    const SpatialIndex target(patch_1.points);
    const double rho = 0.5 * (patch_1.local_rho + patch_2.local_rho);
    for (int icp = 0; icp < 12; ++icp) {
      struct Pair {
        double d;
        int i;
        Vec3 q;
      };
      std::vector<Pair> pairs;
      pairs.reserve(moved.size());
      for (std::size_t i = 0; i < moved.size(); ++i) {
        const auto [id, dist] = target.nearest(moved[i]);
        pairs.push_back({dist, static_cast<int>(i), patch_1.points[id]});
      }
      std::stable_sort(pairs.begin(), pairs.end(),
                       [](const Pair& x, const Pair& y) { return x.d < y.d; });
      pairs.resize(std::max<std::size_t>(4, pairs.size() * 3 / 4));
      std::vector<Vec3> src, dst;
      src.reserve(pairs.size());
      dst.reserve(pairs.size());
      for (const auto& p : pairs) {
        src.push_back(moved[p.i]);
        dst.push_back(p.q);
      }
      const RigidTransform step = rigid_align(src, dst);
      // keep the refinement local: a runaway step means the clouds do not
      // overlap and the frame alignment is the better guess
      if (step.t.norm() > 3.0 * rho) break;
      for (auto& p : moved) p = step.apply(p);
      reg.rigid = step.compose(reg.rigid);
      if (step.t.norm() + (step.R - Mat3::Identity()).norm() < 1e-7) break;
    }
  }

  // Non-rigid refinement: displacement field interpolating the endpoint pairs
  // and the strip box corners.
  Vec3 a2, b2;
  endpoint_positions(patch_2, moved, a2, b2);
  const BoxControls src = control_points(moved, a2, b2);
  const BoxControls dst = control_points(patch_1.points, a1, b1);

  try {
    std::vector<Vec2> sites;
    Eigen::MatrixXd offsets(src.points.size(), 3);
    for (std::size_t i = 0; i < src.points.size(); ++i) {
      sites.emplace_back(src.points[i].x(), src.points[i].y());
      offsets.row(i) = (dst.points[i] - src.points[i]).transpose();
    }
    reg.displacement = std::make_shared<ThinPlateSpline2D>(sites, offsets);
  } catch (const Error&) {
    reg.displacement.reset();
    reg.rigid_only = true;
  }

  reg.warped = patch_2;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    Vec3 q = moved[i];
    if (reg.displacement) q += reg.displacement->evaluate(Vec2(q.x(), q.y()));
    reg.warped.points[i] = q;
  }
  reg.warped.mean_normal = reg.rigid.R * patch_2.mean_normal;
  reg.warped.theta_rz = patch_1.theta_rz;
  return reg;
}

std::vector<Keypoint> detect_keypoints(const FaceContext& face, GeodesicPatch& patch,
                                       double t_k) {
  std::vector<Keypoint> keypoints;
  const double r_p = 5.0 * patch.local_rho;
  for (std::size_t i = 0; i < patch.points.size(); ++i) {
    const auto ids = face.index->radius_query(patch.points[i], r_p);
    if (ids.size() < 3) continue;
    Vec3 mean = Vec3::Zero();
    for (int id : ids) mean += face.mesh->vertices[id];
    mean /= static_cast<double>(ids.size());
    Mat3 cov = Mat3::Zero();
    for (int id : ids) {
      const Vec3 d = face.mesh->vertices[id] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(ids.size());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const double s1 = eig.eigenvalues()(2);
    const double s2 = eig.eigenvalues()(1);
    const double ratio = s2 > 1e-300 ? s1 / s2 : std::numeric_limits<double>::infinity();
    if (ratio > t_k) {
      keypoints.push_back({patch.points[i], ratio, patch.vertex_ids[i], static_cast<int>(i)});
    }
  }
  if (keypoints.size() < 3) patch.descriptive = false;
  return keypoints;
}

}  // namespace fc

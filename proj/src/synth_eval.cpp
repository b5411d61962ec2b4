#include "facecorr/synth_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "facecorr/mesh_io.hpp"
#include "facecorr/tps.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fc {

namespace {

double gaussian_bump(double x, double y, double cx, double cy, double sx, double sy) {
  const double dx = (x - cx) / sx, dy = (y - cy) / sy;
  return std::exp(-(dx * dx + dy * dy));
}

}  // namespace

FaceTemplate make_face_template(const TemplateParams& params) {
  FaceTemplate out;
  out.params = params;
  const double a = params.half_width, b = params.half_height, h = params.spacing;

  auto height = [&](double x, double y) {
    const double r2 = (x / a) * (x / a) + (y / b) * (y / b);
    double z = 25.0 * std::max(0.0, 1.0 - r2);                      // base dome
    z += 10.0 * gaussian_bump(x, y, 0.0, 2.0, 8.0, 20.0);           // nose ridge
    z += 6.0 * gaussian_bump(x, y, 0.0, 0.0, 6.0, 7.0);             // nose tip
    z -= 6.0 * gaussian_bump(x, y, -22.0, 25.0, 10.0, 8.0);         // eye pits
    z -= 6.0 * gaussian_bump(x, y, 22.0, 25.0, 10.0, 8.0);
    z += 3.0 * gaussian_bump(x, y, 0.0, 38.0, 26.0, 7.0);           // brow
    z -= 4.0 * gaussian_bump(x, y, 0.0, -32.0, 18.0, 5.0);          // mouth groove
    z += 2.5 * gaussian_bump(x, y, 0.0, -48.0, 12.0, 9.0);          // chin
    return z;
  };

  Mesh& mesh = out.mesh;
  const int nx = static_cast<int>(std::floor(a / h));
  const int ny = static_cast<int>(std::floor(b / h));
  std::vector<std::vector<int>> grid(2 * ny + 1, std::vector<int>(2 * nx + 1, -1));
  for (int iy = -ny; iy <= ny; ++iy) {
    for (int ix = -nx; ix <= nx; ++ix) {
      const double x = ix * h, y = iy * h;
      if ((x / a) * (x / a) + (y / b) * (y / b) > 1.0) continue;
      grid[iy + ny][ix + nx] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.emplace_back(x, y, height(x, y));
    }
  }
  for (int iy = 0; iy + 1 < static_cast<int>(grid.size()); ++iy) {
    for (int ix = 0; ix + 1 < static_cast<int>(grid[iy].size()); ++ix) {
      const int v00 = grid[iy][ix], v10 = grid[iy][ix + 1];
      const int v01 = grid[iy + 1][ix], v11 = grid[iy + 1][ix + 1];
      if (v00 < 0 || v10 < 0 || v01 < 0 || v11 < 0) continue;
      if ((ix + iy) % 2 == 0) {
        mesh.triangles.push_back({v00, v10, v11});
        mesh.triangles.push_back({v00, v11, v01});
      } else {
        mesh.triangles.push_back({v00, v10, v01});
        mesh.triangles.push_back({v10, v11, v01});
      }
    }
  }
  sanitize(mesh);
  remove_isolated_vertices(mesh);

  // Pin the nose tip (global z maximum) to the origin.
  int tip = 0;
  for (std::size_t i = 1; i < mesh.vertices.size(); ++i)
    if (mesh.vertices[i].z() > mesh.vertices[tip].z()) tip = static_cast<int>(i);
  const Vec3 tip_pos = mesh.vertices[tip];
  for (auto& v : mesh.vertices) v -= tip_pos;
  compute_vertex_normals(mesh);

  auto nearest_vertex = [&](double x, double y) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const double d = (Vec2(mesh.vertices[i].x(), mesh.vertices[i].y()) - Vec2(x, y)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  };

  out.landmarks["nose_tip"] = tip;
  out.landmarks["eye_left"] = nearest_vertex(-22.0 - tip_pos.x(), 25.0 - tip_pos.y());
  out.landmarks["eye_right"] = nearest_vertex(22.0 - tip_pos.x(), 25.0 - tip_pos.y());
  out.landmarks["mouth_center"] = nearest_vertex(0.0 - tip_pos.x(), -32.0 - tip_pos.y());
  out.landmarks["chin"] = nearest_vertex(0.0 - tip_pos.x(), -48.0 - tip_pos.y());

  std::vector<int> nose, eyes;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec2 xy(mesh.vertices[i].x(), mesh.vertices[i].y());
    if (xy.norm() <= 18.0) nose.push_back(static_cast<int>(i));
    const Vec2 le(mesh.vertices[out.landmarks["eye_left"]].x(),
                  mesh.vertices[out.landmarks["eye_left"]].y());
    const Vec2 re(mesh.vertices[out.landmarks["eye_right"]].x(),
                  mesh.vertices[out.landmarks["eye_right"]].y());
    if ((xy - le).norm() <= 14.0 || (xy - re).norm() <= 14.0) eyes.push_back(static_cast<int>(i));
  }
  out.regions["nose"] = std::move(nose);
  out.regions["eyes"] = std::move(eyes);
  return out;
}

Vec3 MemberWarp::warp_only(const Vec3& p) const {
  if (control_xy.empty()) return p;
  if (!solver_) {
    Eigen::MatrixXd values(control_xy.size(), 3);
    for (std::size_t i = 0; i < control_xy.size(); ++i)
      values.row(i) = control_disp[i].transpose();
    solver_ = std::make_shared<const ThinPlateSpline2D>(control_xy, values);
  }
  return p + solver_->evaluate(Vec2(p.x(), p.y()));
}

Vec3 MemberWarp::apply(const Vec3& p) const { return rigid.apply(warp_only(p)); }

SyntheticFamily generate_family(const FaceTemplate& face_template, int n, double warp_magnitude,
                                std::uint64_t seed) {
  SyntheticFamily family;
  family.face_template = face_template;
  family.seed = seed;
  family.warp_magnitude = warp_magnitude;

  const Mesh& tpl = face_template.mesh;
  Vec3 lo = tpl.vertices[0], hi = lo;
  for (const auto& v : tpl.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  constexpr int kCtl = 5;  // control grid per axis
  std::vector<Vec2> control_xy;
  for (int iy = 0; iy < kCtl; ++iy)
    for (int ix = 0; ix < kCtl; ++ix)
      control_xy.emplace_back(lo.x() + (hi.x() - lo.x()) * ix / (kCtl - 1.0),
                              lo.y() + (hi.y() - lo.y()) * iy / (kCtl - 1.0));

  for (int member = 0; member < n; ++member) {
    MemberWarp warp;
    warp.control_xy = control_xy;

    Mesh mesh;
    double magnitude = warp_magnitude;
    for (int attempt = 0; attempt < 10; ++attempt) {
      warp.control_disp.assign(control_xy.size(), Vec3::Zero());
      double sum_sq = 0.0;
      for (auto& d : warp.control_disp) {
        d = Vec3(gauss(rng), gauss(rng), gauss(rng));
        sum_sq += d.squaredNorm();
      }
      if (magnitude > 0.0 && sum_sq > 0.0) {
        const double rms = std::sqrt(sum_sq / control_xy.size());
        for (auto& d : warp.control_disp) d *= magnitude / rms;
      } else {
        for (auto& d : warp.control_disp) d.setZero();
      }

      mesh = tpl;
      if (magnitude > 0.0) {
        Eigen::MatrixXd values(control_xy.size(), 3);
        for (std::size_t i = 0; i < control_xy.size(); ++i)
          values.row(i) = warp.control_disp[i].transpose();
        const ThinPlateSpline2D tps(control_xy, values);
        for (auto& v : mesh.vertices) v += tps.evaluate(Vec2(v.x(), v.y()));
      }

      // reject warps that fold the heightfield
      bool flipped = false;
      for (const auto& t : mesh.triangles) {
        const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        if (e1.x() * e2.y() - e1.y() * e2.x() <= 0.0) {
          flipped = true;
          break;
        }
      }
      if (!flipped) break;
      magnitude *= 0.8;
    }

    // small rigid perturbation: <= 5 degrees, <= 5 mm
    const Vec3 axis = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    const double angle = std::abs(uni(rng)) * 5.0 * std::numbers::pi / 180.0;
    warp.rigid.R = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    warp.rigid.t = Vec3(uni(rng), uni(rng), uni(rng)) * 5.0 / std::sqrt(3.0);

    for (auto& v : mesh.vertices) v = warp.rigid.apply(v);
    compute_vertex_normals(mesh);

    family.members.push_back(std::move(mesh));
    family.warps.push_back(std::move(warp));
  }

  for (const auto& m : family.members) {
    family.member_index.push_back(std::make_shared<SpatialIndex>(m.vertices));
    family.member_adjacency.push_back(std::make_shared<MeshAdjacency>(build_adjacency(m)));
  }
  family.template_index = std::make_shared<SpatialIndex>(family.face_template.mesh.vertices);
  family.template_adjacency =
      std::make_shared<MeshAdjacency>(build_adjacency(family.face_template.mesh));
  return family;
}

namespace {

// Barycentric pull-back: nearest vertex, then the incident triangle whose
// plane projection is closest, clamped to the triangle.
struct BaryHit {
  int triangle = -1;
  double w0 = 0, w1 = 0, w2 = 0;
};

BaryHit locate_on_mesh(const Mesh& mesh, const MeshAdjacency& adj, const SpatialIndex& index,
                       const Vec3& p) {
  const auto [v0, v0_dist] = index.nearest(p);
  std::vector<int> candidate_tris = adj.vertex_triangles[v0];
  if (candidate_tris.empty()) {
    for (int vid : index.radius_query(p, 4.0 * (v0_dist + 1.0)))
      candidate_tris.insert(candidate_tris.end(), adj.vertex_triangles[vid].begin(),
                            adj.vertex_triangles[vid].end());
  }
  BaryHit best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int ti : candidate_tris) {
    const auto& t = mesh.triangles[ti];
    const Vec3& A = mesh.vertices[t[0]];
    const Vec3& B = mesh.vertices[t[1]];
    const Vec3& C = mesh.vertices[t[2]];
    const Vec3 ab = B - A, ac = C - A, ap = p - A;
    const double d00 = ab.dot(ab), d01 = ab.dot(ac), d11 = ac.dot(ac);
    const double d20 = ap.dot(ab), d21 = ap.dot(ac);
    const double denom = d00 * d11 - d01 * d01;
    if (std::abs(denom) < 1e-18) continue;
    double v = (d11 * d20 - d01 * d21) / denom;
    double w = (d00 * d21 - d01 * d20) / denom;
    v = std::clamp(v, 0.0, 1.0);
    w = std::clamp(w, 0.0, 1.0);
    if (v + w > 1.0) {
      const double s = v + w;
      v /= s;
      w /= s;
    }
    const Vec3 q = A + v * ab + w * ac;
    const double d = (q - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = {ti, 1.0 - v - w, v, w};
    }
  }
  return best;
}

}  // namespace

Vec3 SyntheticFamily::member_to_template(int member, const Vec3& p) const {
  const Mesh& mesh = members[member];
  const BaryHit hit = locate_on_mesh(mesh, *member_adjacency[member], *member_index[member], p);
  if (hit.triangle < 0) return p;
  const auto& t = mesh.triangles[hit.triangle];
  const Mesh& tpl = face_template.mesh;
  return hit.w0 * tpl.vertices[t[0]] + hit.w1 * tpl.vertices[t[1]] + hit.w2 * tpl.vertices[t[2]];
}

Vec3 SyntheticFamily::template_to_member(int member, const Vec3& p) const {
  const Mesh& tpl = face_template.mesh;
  const BaryHit hit = locate_on_mesh(tpl, *template_adjacency, *template_index, p);
  if (hit.triangle < 0) return warps[member].apply(p);
  const auto& t = tpl.triangles[hit.triangle];
  const Mesh& mem = members[member];
  return hit.w0 * mem.vertices[t[0]] + hit.w1 * mem.vertices[t[1]] + hit.w2 * mem.vertices[t[2]];
}

namespace {

EvalReport evaluate_impl(const SyntheticFamily& family, const CorrespondedFaceSet& set,
                         int threads) {
  EvalReport report;
  const int P = set.point_count();
  const int N = set.face_count;
  if (P == 0 || N < 2) return report;

  report.per_point_mean_error.assign(P, 0.0);
  report.per_point_max_error.assign(P, 0.0);

  // Template pull-back of every corresponded point, in input frames.
  std::vector<std::vector<Vec3>> pullback(P, std::vector<Vec3>(N));
  const int total = P * N;
#if defined(_OPENMP)
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for num_threads(nt) schedule(static)
#else
  (void)threads;
#endif
  for (int job = 0; job < total; ++job) {
    const int p = job / N;
    const int f = job % N;
    const Vec3 input_frame = set.to_canonical[f].inverse().apply(set.points[p][f]);
    pullback[p][f] = family.member_to_template(f, input_frame);
  }

  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(P) * N * (N - 1) / 2);
  for (int p = 0; p < P; ++p) {
    double acc = 0.0, mx = 0.0;
    int count = 0;
    for (int i = 0; i < N; ++i) {
      for (int j = i + 1; j < N; ++j) {
        const double e = (pullback[p][i] - pullback[p][j]).norm();
        errors.push_back(e);
        acc += e;
        mx = std::max(mx, e);
        ++count;
      }
    }
    report.per_point_mean_error[p] = acc / count;
    report.per_point_max_error[p] = mx;
  }

  report.record_count = errors.size();
  double sum = 0.0;
  for (double e : errors) {
    sum += e;
    report.max = std::max(report.max, e);
  }
  report.mean = sum / static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - report.mean) * (e - report.mean);
  report.sd = std::sqrt(var / static_cast<double>(errors.size()));
  for (int d = 1; d <= 20; ++d) {
    std::size_t within = 0;
    for (double e : errors)
      if (e <= static_cast<double>(d)) ++within;
    report.cumulative[d - 1] = 100.0 * static_cast<double>(within) / errors.size();
  }
  report.coverage =
      static_cast<double>(P) / static_cast<double>(family.face_template.mesh.vertices.size());
  return report;
}

}  // namespace

EvalReport evaluate_correspondence(const SyntheticFamily& family, const CorrespondedFaceSet& set,
                                   int threads) {
  return evaluate_impl(family, set, threads);
}

EvalReport evaluate_correspondence_serial(const SyntheticFamily& family,
                                          const CorrespondedFaceSet& set) {
  EvalReport report;
  const int P = set.point_count();
  const int N = set.face_count;
  if (P == 0 || N < 2) return report;
  report.per_point_mean_error.assign(P, 0.0);
  report.per_point_max_error.assign(P, 0.0);

  std::vector<std::vector<Vec3>> pullback(P, std::vector<Vec3>(N));
  for (int p = 0; p < P; ++p)
    for (int f = 0; f < N; ++f) {
      const Vec3 input_frame = set.to_canonical[f].inverse().apply(set.points[p][f]);
      pullback[p][f] = family.member_to_template(f, input_frame);
    }

  std::vector<double> errors;
  for (int p = 0; p < P; ++p) {
    double acc = 0.0, mx = 0.0;
    int count = 0;
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        const double e = (pullback[p][i] - pullback[p][j]).norm();
        errors.push_back(e);
        acc += e;
        mx = std::max(mx, e);
        ++count;
      }
    report.per_point_mean_error[p] = acc / count;
    report.per_point_max_error[p] = mx;
  }
  report.record_count = errors.size();
  double sum = 0.0;
  for (double e : errors) {
    sum += e;
    report.max = std::max(report.max, e);
  }
  report.mean = sum / static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - report.mean) * (e - report.mean);
  report.sd = std::sqrt(var / static_cast<double>(errors.size()));
  for (int d = 1; d <= 20; ++d) {
    std::size_t within = 0;
    for (double e : errors)
      if (e <= static_cast<double>(d)) ++within;
    report.cumulative[d - 1] = 100.0 * static_cast<double>(within) / errors.size();
  }
  report.coverage =
      static_cast<double>(P) / static_cast<double>(family.face_template.mesh.vertices.size());
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "point_index,mean_error_mm,max_error_mm\n";
  char buf[96];
  for (std::size_t p = 0; p < report.per_point_mean_error.size(); ++p) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", p, report.per_point_mean_error[p],
                  report.per_point_max_error[p]);
    out += buf;
  }
  return out;
}

std::string eval_report_summary(const EvalReport& report) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "records %zu\nmean %.6g mm\nsd %.6g mm\nmax %.6g mm\ncoverage %.4g\n",
                report.record_count, report.mean, report.sd, report.max, report.coverage);
  out = buf;
  out += "cumulative_within_mm";
  for (int d = 1; d <= 20; ++d) {
    std::snprintf(buf, sizeof(buf), " %d:%.2f%%", d, report.cumulative[d - 1]);
    out += buf;
  }
  out += "\n";
  return out;
}

void export_morph(const DeformableModel& model, const Eigen::VectorXd& alpha_from,
                  const Eigen::VectorXd& alpha_to, int steps, const std::string& dir) {
  if (steps < 2) throw Error("morph needs at least 2 steps");
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char name[64];
  for (int s = 0; s < steps; ++s) {
    const double w = static_cast<double>(s) / (steps - 1);
    const Eigen::VectorXd alpha = (1.0 - w) * alpha_from + w * alpha_to;
    std::snprintf(name, sizeof(name), "morph_%03d.ply", s);
    write_mesh(instance_mesh(model, alpha), (fs::path(dir) / name).string(), {true, true});
  }
}

}  // namespace fc

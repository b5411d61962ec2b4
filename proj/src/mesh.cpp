#include "facecorr/mesh.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "facecorr/spatial_index.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fc {

void sanitize(Mesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  int dropped = 0;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= n) throw Error("triangle index out of range");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      ++dropped;
      continue;
    }
    const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    double scale = std::max(e1.squaredNorm(), e2.squaredNorm());
    if (e1.cross(e2).norm() <= 1e-12 * std::max(scale, 1e-300)) {
      ++dropped;
      continue;
    }
    kept.push_back(t);
  }
  mesh.triangles = std::move(kept);
  mesh.dropped_degenerate += dropped;
}

void remove_isolated_vertices(Mesh& mesh) {
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) remap[t[k]] = 0;
  int next = 0;
  std::vector<Vec3> kept_v, kept_n;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (remap[i] < 0) continue;
    remap[i] = next++;
    kept_v.push_back(mesh.vertices[i]);
    if (!mesh.normals.empty()) kept_n.push_back(mesh.normals[i]);
  }
  for (auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) t[k] = remap[t[k]];
  mesh.vertices = std::move(kept_v);
  mesh.normals = std::move(kept_n);
}

void compute_vertex_normals(Mesh& mesh) {
  mesh.normals.assign(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    const Vec3 fn = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                        .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (int k = 0; k < 3; ++k) mesh.normals[t[k]] += fn;  // |fn| = 2*area
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& nrm : mesh.normals) mean += nrm;
  const double flip = mean.z() < 0.0 ? -1.0 : 1.0;
  for (auto& nrm : mesh.normals) {
    double len = nrm.norm();
    nrm = len > 0.0 ? Vec3(flip * nrm / len) : Vec3::UnitZ();
  }
}

std::vector<std::pair<int, int>> unique_edges(const Mesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

MeshAdjacency build_adjacency(const Mesh& mesh) {
  MeshAdjacency adj;
  adj.vertex_triangles.resize(mesh.vertices.size());
  adj.vertex_neighbors.resize(mesh.vertices.size());
  for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
    const auto& t = mesh.triangles[ti];
    for (int k = 0; k < 3; ++k) {
      adj.vertex_triangles[t[k]].push_back(static_cast<int>(ti));
      adj.vertex_neighbors[t[k]].push_back(t[(k + 1) % 3]);
      adj.vertex_neighbors[t[k]].push_back(t[(k + 2) % 3]);
    }
  }
  for (auto& nb : adj.vertex_neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

double mesh_resolution(const Mesh& mesh) {
  const auto edges = unique_edges(mesh);
  if (edges.empty()) throw Error("no edges");
  double sum = 0.0;
  for (const auto& [a, b] : edges) sum += (mesh.vertices[a] - mesh.vertices[b]).norm();
  return sum / static_cast<double>(edges.size());
}

double local_resolution(const Mesh& mesh, const MeshAdjacency& adj, int va, int vb) {
  std::set<std::pair<int, int>> edges;
  for (int v : {va, vb}) {
    for (int ti : adj.vertex_triangles[v]) {
      const auto& t = mesh.triangles[ti];
      for (int k = 0; k < 3; ++k) {
        int a = t[k], b = t[(k + 1) % 3];
        edges.emplace(std::min(a, b), std::max(a, b));
      }
    }
  }
  if (edges.empty()) throw Error("no edges");
  double sum = 0.0;
  for (const auto& [a, b] : edges) sum += (mesh.vertices[a] - mesh.vertices[b]).norm();
  return sum / static_cast<double>(edges.size());
}

namespace {

// Quadric fit z = a u^2 + b uv + c v^2 + d u + e v + f in the frame of the
// patch normal; principal curvatures from the Weingarten map at the center.
CurvatureSample fit_quadric(const Mesh& mesh, const std::vector<int>& ids, int center,
                            Vec3* normal_out, Vec3* centroid_out) {
  CurvatureSample out;
  const Vec3 c = mesh.vertices[center];

  Vec3 n;
  if (!mesh.normals.empty()) {
    n = mesh.normals[center];
  } else {
    // PCA fallback: smallest covariance direction, oriented toward +z.
    Vec3 mean = Vec3::Zero();
    for (int id : ids) mean += mesh.vertices[id];
    mean /= static_cast<double>(ids.size());
    Mat3 cov = Mat3::Zero();
    for (int id : ids) {
      Vec3 d = mesh.vertices[id] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    n = eig.eigenvectors().col(0);
    if (n.z() < 0) n = -n;
  }

  Vec3 e1 = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  e1 = (e1 - e1.dot(n) * n).normalized();
  const Vec3 e2 = n.cross(e1);

  Eigen::MatrixXd A(ids.size(), 6);
  Eigen::VectorXd rhs(ids.size());
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Vec3 d = mesh.vertices[ids[i]] - c;
    const double u = d.dot(e1), v = d.dot(e2), w = d.dot(n);
    A.row(i) << u * u, u * v, v * v, u, v, 1.0;
    rhs(i) = w;
    centroid += mesh.vertices[ids[i]];
  }
  centroid /= static_cast<double>(ids.size());

  Eigen::VectorXd q = A.colPivHouseholderQr().solve(rhs);
  const double fu = q(3), fv = q(4);
  const double w2 = 1.0 + fu * fu + fv * fv;
  const double wn = std::sqrt(w2);
  Eigen::Matrix2d first, second;
  first << 1.0 + fu * fu, fu * fv, fu * fv, 1.0 + fv * fv;
  second << 2.0 * q(0) / wn, q(1) / wn, q(1) / wn, 2.0 * q(2) / wn;
  // Negated shape operator: domes bulging along +n get positive curvature.
  Eigen::Matrix2d shape = -(first.inverse() * second);
  Eigen::EigenSolver<Eigen::Matrix2d> eig(shape);
  double k1 = eig.eigenvalues()(0).real();
  double k2 = eig.eigenvalues()(1).real();
  if (k1 < k2) std::swap(k1, k2);

  out.k1 = k1;
  out.k2 = k2;
  out.valid = true;
  if (normal_out) *normal_out = n;
  if (centroid_out) *centroid_out = centroid;
  return out;
}

}  // namespace

LocalPatchStats estimate_curvature(const Mesh& mesh, const SpatialIndex& index, int center,
                                   double radius) {
  const auto ids = index.radius_query(mesh.vertices[center], radius);
  if (ids.size() < 6) throw Error("patch too sparse");
  LocalPatchStats stats;
  const CurvatureSample s = fit_quadric(mesh, ids, center, &stats.normal, &stats.centroid);
  stats.k1 = s.k1;
  stats.k2 = s.k2;
  return stats;
}

std::vector<CurvatureSample> curvature_field_serial(const Mesh& mesh, const SpatialIndex& index,
                                                    double radius) {
  std::vector<CurvatureSample> field(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const auto ids = index.radius_query(mesh.vertices[v], radius);
    if (ids.size() < 6) continue;
    field[v] = fit_quadric(mesh, ids, static_cast<int>(v), nullptr, nullptr);
  }
  return field;
}

std::vector<CurvatureSample> curvature_field(const Mesh& mesh, const SpatialIndex& index,
                                             double radius, int threads) {
  std::vector<CurvatureSample> field(mesh.vertices.size());
  const int n = static_cast<int>(mesh.vertices.size());
#if defined(_OPENMP)
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for num_threads(nt) schedule(static)
#else
  (void)threads;
#endif
  for (int v = 0; v < n; ++v) {
    const auto ids = index.radius_query(mesh.vertices[v], radius);
    if (ids.size() < 6) continue;
    field[v] = fit_quadric(mesh, ids, v, nullptr, nullptr);
  }
  return field;
}

}  // namespace fc

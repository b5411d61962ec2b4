#include "facecorr/k3dm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>

#include "facecorr/graph_org.hpp"
#include "facecorr/sparse_init.hpp"
#include "facecorr/spatial_index.hpp"

namespace fc {

Eigen::VectorXd DeformableModel::instance(const Eigen::VectorXd& alpha) const {
  if (alpha.size() == 0 || basis.cols() == 0) return mean;
  return mean + basis * alpha;
}

Vec3 DeformableModel::point_of(const Eigen::VectorXd& vec, int index) const {
  return Vec3(vec(index), vec(point_count + index), vec(2 * point_count + index));
}

Eigen::VectorXd vectorize_points(const std::vector<Vec3>& points) {
  const int P = static_cast<int>(points.size());
  Eigen::VectorXd v(3 * P);
  for (int p = 0; p < P; ++p) {
    v(p) = points[p].x();
    v(P + p) = points[p].y();
    v(2 * P + p) = points[p].z();
  }
  return v;
}

DeformableModel build_model(const CorrespondedFaceSet& set, double energy_retain) {
  const int N = set.face_count;
  if (N < 2) throw Error("insufficient faces");
  const int P = set.point_count();

  Eigen::MatrixXd data(3 * P, N);
  for (int f = 0; f < N; ++f) data.col(f) = vectorize_points(set.face_points(f));

  DeformableModel model;
  model.face_count = N;
  model.point_count = P;
  model.triangulation = set.triangulation;
  model.mean = data.rowwise().mean();
  data.colwise() -= model.mean;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU);
  const Eigen::VectorXd sigma = svd.singularValues();
  Eigen::VectorXd eigenvalues = sigma.array().square();

  const double total = eigenvalues.sum();
  const double floor = 1e-12 * (eigenvalues.size() > 0 ? eigenvalues(0) : 0.0);
  int n = 0;
  if (total > 0.0) {
    double acc = 0.0;
    for (int k = 0; k < eigenvalues.size(); ++k) {
      if (eigenvalues(k) <= floor) break;
      acc += eigenvalues(k);
      n = k + 1;
      if (acc / total >= energy_retain) break;
    }
  }
  model.basis = svd.matrixU().leftCols(n);
  model.spectrum = eigenvalues.head(n);
  return model;
}

Eigen::VectorXd project(const DeformableModel& model, const Eigen::VectorXd& face_vector) {
  return model.basis.transpose() * (face_vector - model.mean);
}

Mesh instance_mesh(const DeformableModel& model, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd v = model.instance(alpha);
  Mesh mesh;
  mesh.vertices.resize(model.point_count);
  for (int p = 0; p < model.point_count; ++p) mesh.vertices[p] = model.point_of(v, p);
  mesh.triangles = model.triangulation;
  sanitize(mesh);
  compute_vertex_normals(mesh);
  return mesh;
}

FitResult fit(const DeformableModel& model, const Mesh& query, const FitParams& params) {
  const int P = model.point_count;
  if (query.vertices.empty()) throw Error("empty query");

  std::vector<int> active;
  if (params.region.empty()) {
    active.resize(P);
    std::iota(active.begin(), active.end(), 0);
  } else {
    active = params.region;
    std::sort(active.begin(), active.end());
    for (int p : active)
      if (p < 0 || p >= P) throw Error("index out of range");
  }

  const SpatialIndex query_index(query.vertices);
  const int n_modes = model.mode_count();

  FitResult result;
  result.alpha = Eigen::VectorXd::Zero(n_modes);
  result.inlier_mask.assign(P, false);
  result.registered_query.assign(P, Vec3::Zero());

  Eigen::VectorXd m = model.instance(result.alpha);
  RigidTransform acc;  // query frame -> model frame

  for (int iter = 1; iter <= params.max_iters; ++iter) {
    result.iterations = iter;
    const RigidTransform inv = acc.inverse();

    // NN correspondence for every model point; duplicates collapse to the
    // closest pair and the losers become outliers.
    std::vector<int> nn_id(P, -1);
    std::vector<double> nn_dist(P, 0.0);
    for (int p = 0; p < P; ++p) {
      const Vec3 back = inv.apply(model.point_of(m, p));
      const auto [id, dist] = query_index.nearest(back);
      nn_id[p] = id;
      nn_dist[p] = dist;
    }
    std::vector<char> dup_loser(P, 0);
    {
      std::map<int, int> best_for_query;
      for (int p : active) {
        auto it = best_for_query.find(nn_id[p]);
        if (it == best_for_query.end()) {
          best_for_query[nn_id[p]] = p;
        } else if (nn_dist[p] < nn_dist[it->second]) {
          dup_loser[it->second] = 1;
          it->second = p;
        } else {
          dup_loser[p] = 1;
        }
      }
    }

    double mean_d = 0.0;
    for (int p : active) mean_d += nn_dist[p];
    mean_d /= static_cast<double>(active.size());
    double var_d = 0.0;
    for (int p : active) var_d += (nn_dist[p] - mean_d) * (nn_dist[p] - mean_d);
    const double sd = std::sqrt(var_d / static_cast<double>(active.size()));
    const double t_c = mean_d + 3.0 * sd;

    std::vector<int> inliers;
    for (int p : active)
      if (!dup_loser[p] && nn_dist[p] <= t_c) inliers.push_back(p);
    std::fill(result.inlier_mask.begin(), result.inlier_mask.end(), false);
    for (int p : inliers) result.inlier_mask[p] = true;
    if (inliers.size() * 2 < active.size()) throw Error("fit diverged");

    // Rigid registration of the corresponded query onto the model instance.
    std::vector<Vec3> src, dst;
    src.reserve(inliers.size());
    dst.reserve(inliers.size());
    for (int p : inliers) {
      src.push_back(query.vertices[nn_id[p]]);
      dst.push_back(model.point_of(m, p));
    }
    acc = rigid_align(src, dst);
    for (int p = 0; p < P; ++p) result.registered_query[p] = acc.apply(query.vertices[nn_id[p]]);
    result.query_to_model = acc;

    // Ridge morph restricted to inlier rows.
    if (n_modes > 0) {
      Eigen::MatrixXd U_star(3 * inliers.size(), n_modes);
      Eigen::VectorXd rhs(3 * inliers.size());
      for (std::size_t i = 0; i < inliers.size(); ++i) {
        const int p = inliers[i];
        const Vec3& q = result.registered_query[p];
        const int rows[3] = {p, P + p, 2 * P + p};
        const double qv[3] = {q.x(), q.y(), q.z()};
        for (int k = 0; k < 3; ++k) {
          U_star.row(3 * i + k) = model.basis.row(rows[k]);
          rhs(3 * i + k) = qv[k] - model.mean(rows[k]);
        }
      }
      const Eigen::MatrixXd lhs =
          U_star.transpose() * U_star +
          params.lambda * Eigen::MatrixXd::Identity(n_modes, n_modes);
      const Eigen::VectorXd rhs_full =
          U_star.transpose() * rhs + params.lambda * result.alpha;
      result.alpha = lhs.ldlt().solve(rhs_full);
    }
    m = model.instance(result.alpha);

    double eps = 0.0;
    for (int p : inliers) {
      const Vec3 mp = model.point_of(m, p);
      eps += (mp - result.registered_query[p]).squaredNorm();
    }
    result.residual_trace.push_back(eps);
    if (eps <= params.eps_f) break;
  }
  return result;
}

namespace {

std::vector<Vec2> hull_landmarks_xy(const Mesh& mesh, const SparseCorrespondenceSet& set,
                                    int face_index) {
  std::vector<Vec2> xy;
  for (int vid : set.vertex_ids[face_index])
    xy.emplace_back(mesh.vertices[vid].x(), mesh.vertices[vid].y());
  return xy;
}

}  // namespace

AugmentResult augment(const DeformableModel& model, const CorrespondedFaceSet& source,
                      const std::vector<Mesh>& new_faces, const AugmentParams& params) {
  AugmentResult result;
  result.model = model;
  result.corresponded = source;
  const int M = static_cast<int>(new_faces.size());
  if (M == 0) return result;

  // Pre-organize the new faces: bending-energy MST rooted at the face
  // closest to the model mean.
  std::vector<int> order;
  if (M == 1) {
    order = {0};
  } else {
    Mesh mean_mesh = instance_mesh(model, Eigen::VectorXd::Zero(model.mode_count()));
    std::vector<const Mesh*> meshes{&mean_mesh};
    std::vector<std::unique_ptr<SpatialIndex>> indices;
    indices.push_back(std::make_unique<SpatialIndex>(mean_mesh.vertices));
    for (const auto& f : new_faces) {
      meshes.push_back(&f);
      indices.push_back(std::make_unique<SpatialIndex>(f.vertices));
    }
    std::vector<const SpatialIndex*> index_ptrs;
    for (const auto& idx : indices) index_ptrs.push_back(idx.get());

    const SparseCorrespondenceSet sparse =
        build_sparse_set(meshes, index_ptrs, params.hull_delta, params.hull_subsample);
    if (static_cast<int>(sparse.retained_angles.size()) < 4)
      throw Error("insufficient hull support");

    std::vector<std::vector<Vec2>> landmarks;
    for (std::size_t i = 0; i < meshes.size(); ++i)
      landmarks.push_back(hull_landmarks_xy(*meshes[i], sparse, static_cast<int>(i)));

    // Weights among the new faces plus their energy to the mean (node 0).
    FaceGraph full = weight_matrix(landmarks, 0);
    FaceGraph sub;
    sub.weights = full.weights.bottomRightCorner(M, M);
    int root = 0;
    for (int i = 1; i < M; ++i)
      if (full.weights(0, i + 1) < full.weights(0, root + 1)) root = i;
    const SpanningTree tree = build_mst(sub, root);
    order.push_back(tree.root);
    for (const auto& [parent, child] : tree.edges) order.push_back(child);
  }

  for (int idx : order) {
    FitResult fr;
    try {
      fr = fit(result.model, new_faces[idx], params.fit);
    } catch (const Error&) {
      result.skipped.push_back(idx);
      continue;
    }
    const Eigen::VectorXd inst = result.model.instance(fr.alpha);
    std::vector<Vec3> installed(result.model.point_count);
    for (int p = 0; p < result.model.point_count; ++p)
      installed[p] = fr.inlier_mask[p] ? fr.registered_query[p]
                                       : result.model.point_of(inst, p);

    for (int p = 0; p < result.corresponded.point_count(); ++p)
      result.corresponded.points[p].push_back(installed[p]);
    result.corresponded.face_count += 1;
    result.corresponded.to_canonical.push_back(RigidTransform{});

    DeformableModel rebuilt = build_model(result.corresponded, params.energy_retain);
    rebuilt.landmarks = result.model.landmarks;
    rebuilt.regions = result.model.regions;
    result.model = std::move(rebuilt);
  }
  return result;
}

std::vector<LandmarkTransfer> transfer_landmarks(
    const DeformableModel& model, const std::vector<std::pair<std::string, int>>& annotations,
    const FitResult& fit_result) {
  const Eigen::VectorXd inst = model.instance(fit_result.alpha);
  std::vector<LandmarkTransfer> out;
  for (const auto& [name, index] : annotations) {
    if (index < 0 || index >= model.point_count) throw Error("index out of range");
    out.push_back({name, model.point_of(inst, index), fit_result.registered_query[index]});
  }
  return out;
}

double recognition_distance(const Eigen::VectorXd& alpha_gallery,
                            const Eigen::VectorXd& alpha_query) {
  const double ng = alpha_gallery.norm(), nq = alpha_query.norm();
  if (ng <= 0.0 || nq <= 0.0) throw Error("undefined angle");
  const double c = std::clamp(alpha_gallery.dot(alpha_query) / (ng * nq), -1.0, 1.0);
  return std::acos(c);
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_raw<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const uint32_t len = read_raw<uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

void save_model(const DeformableModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write("K3DM", 4);
  write_raw<uint32_t>(out, 1);  // format version
  write_raw<uint32_t>(out, static_cast<uint32_t>(model.face_count));
  write_raw<uint64_t>(out, static_cast<uint64_t>(model.point_count));
  write_raw<uint32_t>(out, static_cast<uint32_t>(model.mode_count()));
  out.write(reinterpret_cast<const char*>(model.mean.data()),
            static_cast<std::streamsize>(sizeof(double) * model.mean.size()));
  out.write(reinterpret_cast<const char*>(model.basis.data()),
            static_cast<std::streamsize>(sizeof(double) * model.basis.size()));
  out.write(reinterpret_cast<const char*>(model.spectrum.data()),
            static_cast<std::streamsize>(sizeof(double) * model.spectrum.size()));
  write_raw<uint64_t>(out, static_cast<uint64_t>(model.triangulation.size()));
  for (const auto& t : model.triangulation)
    for (int k = 0; k < 3; ++k) write_raw<int32_t>(out, t[k]);
  write_raw<uint32_t>(out, static_cast<uint32_t>(model.landmarks.size()));
  for (const auto& [name, index] : model.landmarks) {
    write_string(out, name);
    write_raw<int32_t>(out, index);
  }
  write_raw<uint32_t>(out, static_cast<uint32_t>(model.regions.size()));
  for (const auto& [name, ids] : model.regions) {
    write_string(out, name);
    write_raw<uint64_t>(out, static_cast<uint64_t>(ids.size()));
    for (int id : ids) write_raw<int32_t>(out, id);
  }
}

DeformableModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::strncmp(magic, "K3DM", 4) != 0) throw Error("not a K3DM model: " + path);
  const uint32_t version = read_raw<uint32_t>(in);
  if (version != 1) throw Error("unsupported K3DM version");

  DeformableModel model;
  model.face_count = static_cast<int>(read_raw<uint32_t>(in));
  model.point_count = static_cast<int>(read_raw<uint64_t>(in));
  const uint32_t n = read_raw<uint32_t>(in);
  model.mean.resize(3 * model.point_count);
  in.read(reinterpret_cast<char*>(model.mean.data()),
          static_cast<std::streamsize>(sizeof(double) * model.mean.size()));
  model.basis.resize(3 * model.point_count, n);
  in.read(reinterpret_cast<char*>(model.basis.data()),
          static_cast<std::streamsize>(sizeof(double) * model.basis.size()));
  model.spectrum.resize(n);
  in.read(reinterpret_cast<char*>(model.spectrum.data()),
          static_cast<std::streamsize>(sizeof(double) * model.spectrum.size()));
  const uint64_t T = read_raw<uint64_t>(in);
  model.triangulation.resize(T);
  for (auto& t : model.triangulation)
    for (int k = 0; k < 3; ++k) t[k] = read_raw<int32_t>(in);
  const uint32_t nl = read_raw<uint32_t>(in);
  for (uint32_t i = 0; i < nl; ++i) {
    const std::string name = read_string(in);
    model.landmarks[name] = read_raw<int32_t>(in);
  }
  const uint32_t nr = read_raw<uint32_t>(in);
  for (uint32_t i = 0; i < nr; ++i) {
    const std::string name = read_string(in);
    const uint64_t count = read_raw<uint64_t>(in);
    std::vector<int> ids(count);
    for (auto& id : ids) id = read_raw<int32_t>(in);
    model.regions[name] = std::move(ids);
  }
  if (!in) throw Error("truncated K3DM model: " + path);
  return model;
}

}  // namespace fc

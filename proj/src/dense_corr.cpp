#include "facecorr/dense_corr.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "facecorr/delaunay.hpp"
#include "facecorr/mesh_io.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fc {

std::vector<Vec3> CorrespondedFaceSet::mean_points() const {
  std::vector<Vec3> means(points.size(), Vec3::Zero());
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (const auto& q : points[p]) means[p] += q;
    means[p] /= static_cast<double>(face_count);
  }
  return means;
}

std::vector<Vec3> CorrespondedFaceSet::face_points(int f) const {
  std::vector<Vec3> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) out[p] = points[p][f];
  return out;
}

std::vector<std::array<int, 3>> triangulate_mean(const std::vector<Vec3>& mean_points) {
  std::vector<Vec2> xy(mean_points.size());
  for (std::size_t i = 0; i < mean_points.size(); ++i)
    xy[i] = Vec2(mean_points[i].x(), mean_points[i].y());
  return delaunay_triangulate(xy);
}

namespace {

std::vector<std::pair<int, int>> triangulation_edges(
    const std::vector<std::array<int, 3>>& tris) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(tris.size() * 3);
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k)
      edges.emplace_back(std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3]));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// Everything one face contributes to one triangulation edge, computed once
// per iteration and shared by every tree pair touching the face.
struct EdgeItem {
  GeodesicPatch patch;
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;  // pose components filled per pair
  int new_keypoints = 0;
  bool usable = false;
};

struct PairMatch {
  int vertex_a = -1, vertex_b = -1;
  Vec3 pos_a, pos_b;
  double cost = 0.0;
};

int resolve_threads(int threads) {
#if defined(_OPENMP)
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

}  // namespace

CorrespondedFaceSet run_dense_correspondence(const std::vector<FaceContext>& faces,
                                             const SpanningTree& tree,
                                             const SparseCorrespondenceSet& sparse,
                                             const DenseCorrParams& params) {
  const int n_faces = static_cast<int>(faces.size());
  if (n_faces < 2) throw Error("insufficient faces");

  CorrespondedFaceSet set;
  set.face_count = n_faces;
  set.to_canonical.assign(n_faces, RigidTransform{});

  for (std::size_t s = 0; s < sparse.retained_angles.size(); ++s) {
    std::vector<Vec3> pos(n_faces);
    for (int f = 0; f < n_faces; ++f)
      pos[f] = faces[f].mesh->vertices[sparse.vertex_ids[f][s]];
    set.points.push_back(std::move(pos));
    set.costs.push_back(0.0);
  }

  double rho_mean = 0.0;
  for (const auto& f : faces) rho_mean += f.rho;
  rho_mean /= n_faces;
  const double dedup_radius = params.dedup_mult * rho_mean;

  std::vector<int> seeds(set.points.size());
  std::iota(seeds.begin(), seeds.end(), 0);

  const int nt = resolve_threads(params.threads);

  for (int iter = 0; iter < params.max_iters; ++iter) {
    // Seed triangulation over the per-point means.
    std::vector<Vec3> seed_means;
    {
      const auto means = set.mean_points();
      for (int s : seeds) seed_means.push_back(means[s]);
    }
    std::vector<std::array<int, 3>> tris;
    try {
      tris = triangulate_mean(seed_means);
    } catch (const Error&) {
      break;  // seeds too degenerate to triangulate: nothing more to grow
    }
    const auto edges = triangulation_edges(tris);
    const int n_edges = static_cast<int>(edges.size());

    // Per-face indices over the current correspondences, for newness tests.
    std::vector<std::unique_ptr<SpatialIndex>> corr_index(n_faces);
    for (int f = 0; f < n_faces; ++f) {
      std::vector<Vec3> pts;
      pts.reserve(set.points.size());
      for (const auto& row : set.points) pts.push_back(row[f]);
      corr_index[f] = std::make_unique<SpatialIndex>(pts);
    }

    // Phase 1: patches, keypoints and intrinsic descriptors per (face, edge).
    std::vector<EdgeItem> items(static_cast<std::size_t>(n_faces) * n_edges);
#if defined(_OPENMP)
#pragma omp parallel for num_threads(nt) schedule(dynamic, 4) collapse(2)
#endif
    for (int f = 0; f < n_faces; ++f) {
      for (int e = 0; e < n_edges; ++e) {
        EdgeItem& item = items[static_cast<std::size_t>(f) * n_edges + e];
        const int pi = seeds[edges[e].first], pj = seeds[edges[e].second];
        const int va = faces[f].index->nearest(set.points[pi][f]).first;
        const int vb = faces[f].index->nearest(set.points[pj][f]).first;
        if (va == vb) continue;
        try {
          item.patch = extract_geodesic_patch(faces[f], va, vb);
          if (item.patch.points.empty()) continue;
          item.keypoints = detect_keypoints(faces[f], item.patch, params.t_k);
        } catch (const Error&) {
          continue;
        }
        for (const auto& kp : item.keypoints) {
          if (corr_index[f]->nearest(kp.position).second > dedup_radius) ++item.new_keypoints;
        }
        if (!item.patch.descriptive || item.keypoints.size() < 3) continue;

        const PatchFrame own = patch_frame(item.patch);
        std::vector<Keypoint> kept;
        for (const auto& kp : item.keypoints) {
          try {
            Vec3 normal = faces[f].mesh->normals.empty() ? Vec3::UnitZ()
                                                         : faces[f].mesh->normals[kp.vertex_id];
            item.descriptors.push_back(extract_descriptor(
                faces[f], kp.position, 5.0 * item.patch.local_rho, own, kp.position, normal));
            kept.push_back(kp);
          } catch (const Error&) {
            // sparse crop: drop this keypoint
          }
        }
        item.keypoints = std::move(kept);
        item.usable = item.keypoints.size() >= 3;
      }
    }

    // Phase 2: register pairs along the tree and match.
    long long new_keypoints = 0;
    std::map<std::pair<int, int>, std::vector<PairMatch>> pair_matches;
    for (const auto& [parent, child] : tree.edges) {
      std::vector<std::vector<PairMatch>> slots(n_edges);
#if defined(_OPENMP)
#pragma omp parallel for num_threads(nt) schedule(dynamic, 4)
#endif
      for (int e = 0; e < n_edges; ++e) {
        const EdgeItem& ia = items[static_cast<std::size_t>(parent) * n_edges + e];
        const EdgeItem& ib = items[static_cast<std::size_t>(child) * n_edges + e];
        if (!ia.usable || !ib.usable) continue;

        PatchRegistration reg;
        try {
          reg = register_patches(ia.patch, ib.patch);
        } catch (const Error&) {
          continue;
        }

        // Pose features: positions/normals of both sides in the parent
        // patch frame, child side carried through the registration.
        const PatchFrame frame_a = patch_frame(ia.patch);
        std::vector<Descriptor> da = ia.descriptors;
        for (std::size_t k = 0; k < da.size(); ++k) {
          const Vec3 p = frame_a.to_local(ia.keypoints[k].position);
          const Vec3 n = frame_a.world_to_local *
                         (faces[parent].mesh->normals.empty()
                              ? Vec3::UnitZ()
                              : faces[parent].mesh->normals[ia.keypoints[k].vertex_id]);
          da[k].v[0] = p.x();
          da[k].v[1] = p.y();
          da[k].v[2] = p.z();
          da[k].v[3] = n.x();
          da[k].v[4] = n.y();
          da[k].v[5] = n.z();
        }
        std::vector<Descriptor> db = ib.descriptors;
        for (std::size_t k = 0; k < db.size(); ++k) {
          const Vec3 p = frame_a.to_local(reg.map_point(ib.keypoints[k].position));
          const Vec3 n = frame_a.world_to_local *
                         reg.map_direction(faces[child].mesh->normals.empty()
                                               ? Vec3::UnitZ()
                                               : faces[child].mesh->normals[ib.keypoints[k].vertex_id]);
          db[k].v[0] = p.x();
          db[k].v[1] = p.y();
          db[k].v[2] = p.z();
          db[k].v[3] = n.x();
          db[k].v[4] = n.y();
          db[k].v[5] = n.z();
        }

        const double rho_pair = 0.5 * (ia.patch.local_rho + ib.patch.local_rho);
        const double k_q = params.k_q_mult * rho_pair;
        const MatchResult m = match_keypoints(da, db, k_q, rho_pair / std::sqrt(35.0));
        for (std::size_t k = 0; k < m.pairs.size(); ++k) {
          const Keypoint& ka = ia.keypoints[m.pairs[k][0]];
          const Keypoint& kb = ib.keypoints[m.pairs[k][1]];
          slots[e].push_back({ka.vertex_id, kb.vertex_id, ka.position, kb.position, m.costs[k]});
        }
      }

      // Count new keypoints for this pair (Algorithm 1's loop guard).
      for (int e = 0; e < n_edges; ++e) {
        const EdgeItem& ia = items[static_cast<std::size_t>(parent) * n_edges + e];
        const EdgeItem& ib = items[static_cast<std::size_t>(child) * n_edges + e];
        new_keypoints += std::min(ia.new_keypoints, ib.new_keypoints);
      }

      // One match per vertex on either side, best cost first.
      std::vector<PairMatch> merged;
      for (auto& s : slots)
        for (auto& m : s) merged.push_back(m);
      std::stable_sort(merged.begin(), merged.end(), [](const PairMatch& x, const PairMatch& y) {
        if (x.cost != y.cost) return x.cost < y.cost;
        if (x.vertex_a != y.vertex_a) return x.vertex_a < y.vertex_a;
        return x.vertex_b < y.vertex_b;
      });
      std::set<int> used_a, used_b;
      std::vector<PairMatch> dedup;
      for (const auto& m : merged) {
        if (used_a.count(m.vertex_a) || used_b.count(m.vertex_b)) continue;
        used_a.insert(m.vertex_a);
        used_b.insert(m.vertex_b);
        dedup.push_back(m);
      }
      pair_matches[{parent, child}] = std::move(dedup);
    }

    // Chain pair matches into candidate correspondences spanning every face.
    // Keypoint identity is the mesh vertex on its face; the tree structure
    // guarantees a component holds at most one vertex per face.
    std::map<std::pair<int, int>, int> component_of;  // (face, vertex) -> component
    std::vector<std::vector<std::pair<int, int>>> members;
    std::vector<double> comp_cost;
    auto component = [&](int face, int vertex) {
      auto it = component_of.find({face, vertex});
      if (it != component_of.end()) return it->second;
      const int id = static_cast<int>(members.size());
      component_of[{face, vertex}] = id;
      members.push_back({{face, vertex}});
      comp_cost.push_back(0.0);
      return id;
    };
    std::vector<std::map<int, Vec3>> comp_positions;  // component -> face -> pos
    for (const auto& [pair_key, matches] : pair_matches) {
      const auto [a, b] = pair_key;
      for (const auto& m : matches) {
        int ca = component(a, m.vertex_a);
        int cb = component(b, m.vertex_b);
        if (static_cast<std::size_t>(std::max(ca, cb)) >= comp_positions.size())
          comp_positions.resize(members.size());
        comp_positions[ca][a] = m.pos_a;
        comp_positions[cb][b] = m.pos_b;
        if (ca != cb) {
          if (members[ca].size() < members[cb].size()) std::swap(ca, cb);
          for (const auto& node : members[cb]) component_of[node] = ca;
          members[ca].insert(members[ca].end(), members[cb].begin(), members[cb].end());
          members[cb].clear();
          for (const auto& [f, p] : comp_positions[cb]) comp_positions[ca][f] = p;
          comp_positions[cb].clear();
          comp_cost[ca] = std::max(comp_cost[ca], comp_cost[cb]);
        }
        comp_cost[ca] = std::max(comp_cost[ca], m.cost);
      }
    }

    struct Candidate {
      std::vector<Vec3> pos;
      double cost;
      Vec3 mean;
    };
    std::vector<Candidate> candidates;
    comp_positions.resize(members.size());
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (static_cast<int>(comp_positions[c].size()) != n_faces) continue;
      Candidate cand;
      cand.cost = comp_cost[c];
      cand.mean = Vec3::Zero();
      cand.pos.resize(n_faces);
      for (const auto& [f, p] : comp_positions[c]) {
        cand.pos[f] = p;
        cand.mean += p;
      }
      cand.mean /= n_faces;
      candidates.push_back(std::move(cand));
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& x, const Candidate& y) { return x.cost < y.cost; });

    // Install, keeping a minimum spacing on the mean face.
    const auto existing_means = set.mean_points();
    std::unique_ptr<SpatialIndex> mean_index =
        existing_means.empty() ? nullptr : std::make_unique<SpatialIndex>(existing_means);
    std::vector<Vec3> accepted_means;
    std::vector<int> accepted_ids;
    for (const auto& cand : candidates) {
      if (mean_index && mean_index->nearest(cand.mean).second <= dedup_radius) continue;
      bool clash = false;
      for (const auto& m : accepted_means) {
        if ((m - cand.mean).norm() <= dedup_radius) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      accepted_means.push_back(cand.mean);
      accepted_ids.push_back(set.point_count());
      set.points.push_back(cand.pos);
      set.costs.push_back(cand.cost);
    }

    // Next seeds: the best-cost correspondences accepted this sweep.
    if (!accepted_ids.empty()) {
      std::stable_sort(accepted_ids.begin(), accepted_ids.end(),
                       [&](int x, int y) { return set.costs[x] < set.costs[y]; });
      if (static_cast<int>(accepted_ids.size()) > params.n_q)
        accepted_ids.resize(params.n_q);
      seeds = accepted_ids;
    }

    if (new_keypoints <= params.t_1 || accepted_ids.empty()) break;
  }

  set.triangulation = triangulate_mean(set.mean_points());
  return set;
}

void save_corresponded_set(const CorrespondedFaceSet& set, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char name[64], buf[192];

  for (int f = 0; f < set.face_count; ++f) {
    Mesh cloud;
    cloud.vertices = set.face_points(f);
    std::snprintf(name, sizeof(name), "face_%03d.ply", f);
    write_mesh(cloud, (fs::path(dir) / name).string(), {true, true});
  }

  std::ofstream tri(fs::path(dir) / "triangles.txt");
  for (const auto& t : set.triangulation) tri << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';

  std::ofstream costs(fs::path(dir) / "costs.csv");
  costs << "point_index,cost\n";
  for (std::size_t p = 0; p < set.costs.size(); ++p) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", p, set.costs[p]);
    costs << buf;
  }

  std::ofstream tf(fs::path(dir) / "transforms.txt");
  for (int f = 0; f < set.face_count; ++f) {
    const auto& rt = set.to_canonical[f];
    tf << f;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof(buf), " %.17g", rt.R(r, c));
        tf << buf;
      }
    for (int r = 0; r < 3; ++r) {
      std::snprintf(buf, sizeof(buf), " %.17g", rt.t(r));
      tf << buf;
    }
    tf << '\n';
  }

  std::ofstream man(fs::path(dir) / "manifest.txt");
  man << "faces " << set.face_count << "\npoints " << set.point_count() << "\n";
}

CorrespondedFaceSet load_corresponded_set(const std::string& dir) {
  namespace fs = std::filesystem;
  CorrespondedFaceSet set;

  std::ifstream man(fs::path(dir) / "manifest.txt");
  if (!man) throw Error("not a corresponded set: " + dir);
  std::string key;
  int n_faces = 0, n_points = 0;
  man >> key >> n_faces >> key >> n_points;
  set.face_count = n_faces;
  set.points.assign(n_points, std::vector<Vec3>(n_faces));

  char name[64];
  for (int f = 0; f < n_faces; ++f) {
    std::snprintf(name, sizeof(name), "face_%03d.ply", f);
    const Mesh cloud = read_mesh((fs::path(dir) / name).string());
    if (static_cast<int>(cloud.vertices.size()) != n_points)
      throw Error("corresponded set face has wrong point count");
    for (int p = 0; p < n_points; ++p) set.points[p][f] = cloud.vertices[p];
  }

  std::ifstream tri(fs::path(dir) / "triangles.txt");
  int a, b, c;
  while (tri >> a >> b >> c) set.triangulation.push_back({a, b, c});

  set.costs.assign(n_points, 0.0);
  std::ifstream costs(fs::path(dir) / "costs.csv");
  std::string line;
  std::getline(costs, line);  // header
  while (std::getline(costs, line)) {
    std::size_t idx = 0;
    double cost = 0;
    if (std::sscanf(line.c_str(), "%zu,%lg", &idx, &cost) == 2 &&
        idx < static_cast<std::size_t>(n_points))
      set.costs[idx] = cost;
  }

  set.to_canonical.assign(n_faces, RigidTransform{});
  std::ifstream tf(fs::path(dir) / "transforms.txt");
  while (std::getline(tf, line)) {
    std::istringstream ss(line);
    int f;
    if (!(ss >> f) || f < 0 || f >= n_faces) continue;
    RigidTransform rt;
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) ss >> rt.R(r, cc);
    for (int r = 0; r < 3; ++r) ss >> rt.t(r);
    set.to_canonical[f] = rt;
  }
  return set;
}

}  // namespace fc

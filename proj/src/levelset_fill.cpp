#include "facecorr/levelset_fill.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <queue>
#include <set>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Planar-wavefront update of the corner at the origin from supports at pu/pv
// with values du/dv. Returns +inf when the characteristic does not pass
// through the wedge (callers fall back to edge updates).
double wavefront_update(const Vec2& pu, const Vec2& pv, double du, double dv) {
  Eigen::Matrix2d M;
  M.row(0) = pu.transpose();
  M.row(1) = pv.transpose();
  const double det = M.determinant();
  if (std::abs(det) < 1e-14) return kInf;
  const Eigen::Matrix2d Q = (M * M.transpose()).inverse();
  const Eigen::Vector2d d(du, dv), one(1.0, 1.0);

  const double a = one.dot(Q * one);
  const double b = one.dot(Q * d);
  const double c = d.dot(Q * d) - 1.0;
  const double disc = b * b - a * c;
  if (disc < 0.0 || a <= 0.0) return kInf;
  const double t = (b + std::sqrt(disc)) / a;
  if (t < std::max(du, dv)) return kInf;

  const Eigen::Vector2d lambda = Q * (t * one - d);
  if (lambda(0) < -1e-12 || lambda(1) < -1e-12) return kInf;
  return t;
}

struct Stencil {
  int u = -1, v = -1;  // support vertices
  Vec2 pu, pv;         // planar coords relative to the updated corner
};

// Update stencils for one triangle corner. Obtuse corners are split by
// unfolding the triangles across the far edge until a virtual support vertex
// makes both sub-angles non-obtuse.
void corner_stencils(const Mesh& mesh, const MeshAdjacency& adj, int tri, int corner,
                     std::vector<Stencil>& out) {
  const auto& t = mesh.triangles[tri];
  int ic = -1;
  for (int k = 0; k < 3; ++k)
    if (t[k] == corner) ic = k;
  const int va = t[(ic + 1) % 3], vb = t[(ic + 2) % 3];
  const Vec3& c3 = mesh.vertices[corner];
  const double lb = (mesh.vertices[va] - c3).norm();
  const double la = (mesh.vertices[vb] - c3).norm();
  const double lab = (mesh.vertices[va] - mesh.vertices[vb]).norm();
  if (lb < 1e-12 || la < 1e-12) return;

  double cos_c = (lb * lb + la * la - lab * lab) / (2.0 * lb * la);
  cos_c = std::clamp(cos_c, -1.0, 1.0);
  const double theta = std::acos(cos_c);

  const Vec2 A(lb, 0.0);
  const Vec2 B(la * std::cos(theta), la * std::sin(theta));
  if (cos_c >= -1e-12) {
    out.push_back({va, vb, A, B});
    return;
  }

  // Obtuse: unfold across the window edge until the new vertex direction
  // splits [0, theta] into two non-obtuse parts.
  auto other_triangle = [&](int u, int v, int self) {
    for (int ti : adj.vertex_triangles[u]) {
      if (ti == self) continue;
      const auto& tt = mesh.triangles[ti];
      int hits = 0;
      for (int k = 0; k < 3; ++k) hits += (tt[k] == u || tt[k] == v);
      if (hits == 2) return ti;
    }
    return -1;
  };
  auto third_vertex = [&](int ti, int u, int v) {
    const auto& tt = mesh.triangles[ti];
    for (int k = 0; k < 3; ++k)
      if (tt[k] != u && tt[k] != v) return tt[k];
    return -1;
  };

  int wp = va, wq = vb;  // window mesh vertices
  Vec2 P = A, Q = B;     // their planar positions
  int current = tri;
  const double lo_angle = theta - 0.5 * std::numbers::pi;  // qualifying cone
  const double hi_angle = 0.5 * std::numbers::pi;

  for (int depth = 0; depth < 16; ++depth) {
    const int next = other_triangle(wp, wq, current);
    if (next < 0) break;
    const int vd = third_vertex(next, wp, wq);
    if (vd < 0) break;

    // Planar position of vd: circle intersection about P and Q, on the far
    // side of PQ from the origin-facing region.
    const double rp = (mesh.vertices[vd] - mesh.vertices[wp]).norm();
    const double rq = (mesh.vertices[vd] - mesh.vertices[wq]).norm();
    const Vec2 pq = Q - P;
    const double L = pq.norm();
    if (L < 1e-12) break;
    const double x = (rp * rp - rq * rq + L * L) / (2.0 * L);
    const double h2 = rp * rp - x * x;
    const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    const Vec2 dir = pq / L;
    const Vec2 nrm(-dir.y(), dir.x());
    Vec2 D = P + x * dir + h * nrm;
    // pick the side away from the origin (the unfolding grows outward)
    const double side_origin = (-P).dot(nrm);
    if (side_origin * ((D - P).dot(nrm)) > 0.0) D = P + x * dir - h * nrm;

    const double phi = std::atan2(D.y(), D.x());
    if (phi >= lo_angle && phi <= hi_angle) {
      out.push_back({va, vd, A, D});
      out.push_back({vd, vb, D, B});
      return;
    }
    current = next;
    if (phi > hi_angle) {
      wq = vd;
      Q = D;
    } else {
      wp = vd;
      P = D;
    }
  }
  // Unfolding failed (boundary or pathological fan); keep the plain stencil,
  // the edge fallback still bounds the value.
  out.push_back({va, vb, A, B});
}

}  // namespace

GeodesicField fast_march(const Mesh& mesh, const MeshAdjacency& adj, const Vec3& source) {
  const int n = static_cast<int>(mesh.vertices.size());
  GeodesicField field;
  field.source = source;
  field.distance.assign(n, kInf);
  if (n == 0) return field;

  // Snap to the nearest triangle via the nearest vertex's fan.
  int v0 = 0;
  double best = kInf;
  for (int i = 0; i < n; ++i) {
    const double d = (mesh.vertices[i] - source).squaredNorm();
    if (d < best) {
      best = d;
      v0 = i;
    }
  }
  std::vector<int> seed_vertices{v0};
  if (!adj.vertex_triangles[v0].empty()) {
    // triangle whose plane point is closest
    int best_tri = adj.vertex_triangles[v0][0];
    double best_d = kInf;
    for (int ti : adj.vertex_triangles[v0]) {
      const auto& t = mesh.triangles[ti];
      const Vec3 centroid =
          (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
      const double d = (centroid - source).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best_tri = ti;
      }
    }
    seed_vertices.assign(mesh.triangles[best_tri].begin(), mesh.triangles[best_tri].end());
  }

  using HeapItem = std::pair<double, int>;
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
  for (int v : seed_vertices) {
    field.distance[v] = (mesh.vertices[v] - source).norm();
    heap.push({field.distance[v], v});
  }

  // Stencils are built lazily per (triangle, corner).
  std::map<std::pair<int, int>, std::vector<Stencil>> stencil_cache;
  auto stencils_for = [&](int tri, int corner) -> const std::vector<Stencil>& {
    auto it = stencil_cache.find({tri, corner});
    if (it != stencil_cache.end()) return it->second;
    std::vector<Stencil> s;
    corner_stencils(mesh, adj, tri, corner, s);
    return stencil_cache.emplace(std::make_pair(tri, corner), std::move(s)).first->second;
  };

  std::vector<bool> frozen(n, false);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (frozen[u] || d > field.distance[u]) continue;
    frozen[u] = true;

    for (int ti : adj.vertex_triangles[u]) {
      const auto& t = mesh.triangles[ti];
      for (int k = 0; k < 3; ++k) {
        const int c = t[k];
        if (c == u || frozen[c]) continue;
        double cand = field.distance[c];
        for (const Stencil& s : stencils_for(ti, c)) {
          const double du = field.distance[s.u], dv = field.distance[s.v];
          if (du < kInf && dv < kInf)
            cand = std::min(cand, wavefront_update(s.pu, s.pv, du, dv));
          if (du < kInf)
            cand = std::min(cand, du + s.pu.norm());
          if (dv < kInf)
            cand = std::min(cand, dv + s.pv.norm());
        }
        if (cand < field.distance[c]) {
          field.distance[c] = cand;
          heap.push({cand, c});
        }
      }
    }
  }
  return field;
}

namespace {

struct IsoPolyline {
  std::vector<Vec3> points;
  bool closed = false;
};

std::vector<IsoPolyline> extract_iso_polylines(const Mesh& mesh, const GeodesicField& field,
                                               double radius) {
  struct Crossing {
    Vec3 point;
    std::vector<int> tris;
  };
  std::map<std::pair<int, int>, Crossing> crossings;
  std::map<int, std::array<std::pair<int, int>, 2>> tri_edges;  // triangle -> its 2 crossing keys
  std::map<int, int> tri_count;

  for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
    const auto& t = mesh.triangles[ti];
    std::array<std::pair<int, int>, 2> keys;
    int found = 0;
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      double sa = field.distance[a] - radius;
      double sb = field.distance[b] - radius;
      if (!std::isfinite(sa) || !std::isfinite(sb)) continue;
      if (sa == 0.0) sa = 1e-300;
      if (sb == 0.0) sb = 1e-300;
      if (sa * sb >= 0.0) continue;
      const double w = sa / (sa - sb);
      const Vec3 p = (1.0 - w) * mesh.vertices[a] + w * mesh.vertices[b];
      const auto key = std::minmax(a, b);
      auto& cr = crossings[{key.first, key.second}];
      cr.point = p;
      cr.tris.push_back(static_cast<int>(ti));
      if (found < 2) keys[found] = {key.first, key.second};
      ++found;
    }
    if (found == 2) {
      tri_edges[static_cast<int>(ti)] = keys;
      tri_count[static_cast<int>(ti)] = 2;
    }
  }

  // Chain edge-crossings through triangles.
  std::set<std::pair<int, int>> visited;
  std::vector<IsoPolyline> polylines;

  auto walk = [&](std::pair<int, int> start) {
    std::vector<std::pair<int, int>> chain{start};
    visited.insert(start);
    // extend forward then backward
    for (int dir = 0; dir < 2; ++dir) {
      for (;;) {
        const auto cur = dir == 0 ? chain.back() : chain.front();
        bool extended = false;
        for (int ti : crossings[cur].tris) {
          if (tri_count.find(ti) == tri_count.end()) continue;
          const auto& keys = tri_edges[ti];
          const auto next = keys[0] == cur ? keys[1] : keys[0];
          if (visited.count(next)) continue;
          visited.insert(next);
          if (dir == 0)
            chain.push_back(next);
          else
            chain.insert(chain.begin(), next);
          extended = true;
          break;
        }
        if (!extended) break;
      }
    }
    IsoPolyline poly;
    for (const auto& key : chain) poly.points.push_back(crossings[key].point);
    // closed if the two ends share a triangle
    if (chain.size() > 2) {
      for (int ti : crossings[chain.front()].tris) {
        if (tri_count.find(ti) == tri_count.end()) continue;
        const auto& keys = tri_edges[ti];
        if (keys[0] == chain.back() || keys[1] == chain.back()) poly.closed = true;
      }
    }
    return poly;
  };

  for (const auto& [key, cr] : crossings) {
    if (visited.count(key)) continue;
    IsoPolyline poly = walk(key);
    if (poly.points.size() >= 2) polylines.push_back(std::move(poly));
  }
  return polylines;
}

}  // namespace

std::vector<Vec3> sample_iso_curves(const Mesh& mesh, const GeodesicField& field,
                                    const std::vector<double>& radii, double arc_step,
                                    const std::optional<std::array<Vec3, 3>>& clip_triangle) {
  if (arc_step <= 0.0) throw Error("arc_step must be positive");

  auto inside_clip = [&](const Vec3& p) {
    if (!clip_triangle) return true;
    const auto& t = *clip_triangle;
    const Vec2 a(t[0].x(), t[0].y()), b(t[1].x(), t[1].y()), c(t[2].x(), t[2].y());
    const Vec2 q(p.x(), p.y());
    const double full = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (std::abs(full) < 1e-15) return false;
    const double w0 = ((b - q).x() * (c - q).y() - (b - q).y() * (c - q).x()) / full;
    const double w1 = ((c - q).x() * (a - q).y() - (c - q).y() * (a - q).x()) / full;
    const double w2 = 1.0 - w0 - w1;
    return w0 >= -1e-9 && w1 >= -1e-9 && w2 >= -1e-9;
  };

  std::vector<Vec3> samples;
  for (double radius : radii) {
    auto polylines = extract_iso_polylines(mesh, field, radius);

    // canonical order: largest polyline first for stability across faces
    std::stable_sort(polylines.begin(), polylines.end(),
                     [](const IsoPolyline& a, const IsoPolyline& b) {
                       return a.points.size() > b.points.size();
                     });

    for (auto& poly : polylines) {
      auto angle_of = [&](const Vec3& p) {
        return std::atan2(p.y() - field.source.y(), p.x() - field.source.x());
      };

      if (poly.closed) {
        // rotate so the minimum-angle point starts, orient by increasing angle
        std::size_t start = 0;
        for (std::size_t i = 1; i < poly.points.size(); ++i)
          if (angle_of(poly.points[i]) < angle_of(poly.points[start])) start = i;
        std::rotate(poly.points.begin(), poly.points.begin() + start, poly.points.end());
        if (poly.points.size() > 2) {
          const double a0 = angle_of(poly.points[0]);
          double fwd = angle_of(poly.points[1]) - a0;
          double bwd = angle_of(poly.points.back()) - a0;
          while (fwd < 0) fwd += 2 * std::numbers::pi;
          while (bwd < 0) bwd += 2 * std::numbers::pi;
          if (bwd < fwd)
            std::reverse(poly.points.begin() + 1, poly.points.end());
        }
      } else {
        if (angle_of(poly.points.back()) < angle_of(poly.points.front()))
          std::reverse(poly.points.begin(), poly.points.end());
      }

      // walk the polyline emitting a sample every arc_step
      double carried = 0.0;
      Vec3 prev = poly.points[0];
      if (inside_clip(prev)) samples.push_back(prev);
      const std::size_t count = poly.points.size() + (poly.closed ? 1 : 0);
      for (std::size_t i = 1; i < count; ++i) {
        const Vec3 next = poly.points[i % poly.points.size()];
        double seg = (next - prev).norm();
        Vec3 dir = seg > 1e-15 ? Vec3((next - prev) / seg) : Vec3::Zero();
        double offset = arc_step - carried;
        while (offset <= seg) {
          const Vec3 p = prev + offset * dir;
          if (inside_clip(p)) samples.push_back(p);
          offset += arc_step;
        }
        carried = seg - (offset - arc_step);
        prev = next;
      }
    }
  }
  return samples;
}

namespace {

int resolve_threads(int threads) {
#if defined(_OPENMP)
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

}  // namespace

void fill_smooth_regions(CorrespondedFaceSet& set, const std::vector<FaceContext>& faces,
                         const SpanningTree& tree, int n_q, const LevelSetParams& params) {
  const int n_faces = set.face_count;
  if (n_faces < 2 || set.point_count() < 3) return;

  double rho_mean = 0.0;
  for (const auto& f : faces) rho_mean += f.rho;
  rho_mean /= n_faces;
  const double dedup_radius = params.dedup_mult * rho_mean;

  // Triangulate the n_q best-quality correspondences.
  std::vector<int> order(set.point_count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return set.costs[a] < set.costs[b]; });
  if (static_cast<int>(order.size()) > n_q) order.resize(n_q);
  std::sort(order.begin(), order.end());

  const auto means = set.mean_points();
  std::vector<Vec3> seed_means;
  for (int s : order) seed_means.push_back(means[s]);
  std::vector<std::array<int, 3>> tris;
  try {
    tris = triangulate_mean(seed_means);
  } catch (const Error&) {
    return;
  }

  // Select triangles larger than t_a (mean area by default).
  std::vector<double> areas(tris.size());
  double area_sum = 0.0;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const Vec3& a = seed_means[tris[t][0]];
    const Vec3& b = seed_means[tris[t][1]];
    const Vec3& c = seed_means[tris[t][2]];
    areas[t] = 0.5 * (b - a).cross(c - a).norm();
    area_sum += areas[t];
  }
  const double t_a = params.t_a_override > 0.0 ? params.t_a_override
                                               : area_sum / static_cast<double>(tris.size());
  std::vector<int> large;
  for (std::size_t t = 0; t < tris.size(); ++t)
    if (areas[t] > t_a) large.push_back(static_cast<int>(t));
  if (large.empty()) return;

  // March and sample per (large triangle, face); slots keep determinism.
  struct TriSamples {
    std::vector<Vec3> points;
  };
  std::vector<TriSamples> samples(large.size() * n_faces);
  const int nt = resolve_threads(params.threads);
  const int total = static_cast<int>(large.size()) * n_faces;

#if defined(_OPENMP)
#pragma omp parallel for num_threads(nt) schedule(dynamic, 1)
#endif
  for (int job = 0; job < total; ++job) {
    const int li = job / n_faces;
    const int f = job % n_faces;
    const auto& tri = tris[large[li]];
    const int p0 = order[tri[0]], p1 = order[tri[1]], p2 = order[tri[2]];
    const std::array<Vec3, 3> corners{set.points[p0][f], set.points[p1][f], set.points[p2][f]};
    const Vec3 centroid = (corners[0] + corners[1] + corners[2]) / 3.0;

    // circumradius on the mean face bounds the radii ladder
    const Vec3& ma = seed_means[tri[0]];
    const Vec3& mb = seed_means[tri[1]];
    const Vec3& mc = seed_means[tri[2]];
    const double la = (mb - mc).norm(), lb = (ma - mc).norm(), lc = (ma - mb).norm();
    const double area = 0.5 * (mb - ma).cross(mc - ma).norm();
    const double circum = area > 1e-12 ? la * lb * lc / (4.0 * area) : 0.0;

    std::vector<double> radii;
    for (double r = rho_mean; r <= circum; r += rho_mean) radii.push_back(r);
    if (radii.empty()) continue;

    try {
      const GeodesicField field = fast_march(*faces[f].mesh, faces[f].adjacency, centroid);
      samples[job].points =
          sample_iso_curves(*faces[f].mesh, field, radii, rho_mean, corners);
    } catch (const Error&) {
      samples[job].points.clear();
    }
  }

  // Descriptor match along the tree, chained by sample slot on shared faces.
  const auto triangle_frame = [&](const std::array<Vec3, 3>& corners) {
    PatchFrame frame;
    frame.origin = (corners[0] + corners[1] + corners[2]) / 3.0;
    Vec3 x = corners[1] - corners[0];
    x.z() = 0.0;
    if (x.norm() < 1e-12) x = Vec3::UnitX();
    x.normalize();
    const Vec3 z = Vec3::UnitZ();
    const Vec3 y = z.cross(x);
    Mat3 rot;
    rot.row(0) = x.transpose();
    rot.row(1) = y.transpose();
    rot.row(2) = z.transpose();
    frame.world_to_local = rot;
    return frame;
  };

  std::vector<Vec3> accepted_means;
  std::unique_ptr<SpatialIndex> mean_index =
      means.empty() ? nullptr : std::make_unique<SpatialIndex>(means);

  for (std::size_t li = 0; li < large.size(); ++li) {
    const auto& tri = tris[large[li]];

    // descriptors per face
    std::vector<std::vector<Descriptor>> descs(n_faces);
    std::vector<const std::vector<Vec3>*> pts(n_faces);
    std::vector<std::vector<int>> kept_ids(n_faces);
    bool ok = true;
    for (int f = 0; f < n_faces && ok; ++f) {
      const auto& sample_pts = samples[li * n_faces + f].points;
      pts[f] = &sample_pts;
      const int p0 = order[tri[0]], p1 = order[tri[1]], p2 = order[tri[2]];
      const std::array<Vec3, 3> corners{set.points[p0][f], set.points[p1][f],
                                        set.points[p2][f]};
      const PatchFrame frame = triangle_frame(corners);
      for (std::size_t s = 0; s < sample_pts.size(); ++s) {
        try {
          const Vec3 n = faces[f].mesh->normals.empty()
                             ? Vec3::UnitZ()
                             : faces[f].mesh->normals[faces[f].index->nearest(sample_pts[s]).first];
          descs[f].push_back(extract_descriptor(faces[f], sample_pts[s], 5.0 * faces[f].rho,
                                                frame, frame.to_local(sample_pts[s]),
                                                frame.world_to_local * n));
          kept_ids[f].push_back(static_cast<int>(s));
        } catch (const Error&) {
        }
      }
      if (descs[f].empty()) ok = false;
    }
    if (!ok) continue;

    // per-pair mutual matches keyed by sample slots
    std::map<std::pair<int, int>, int> component_of;  // (face, slot) -> component
    std::vector<std::map<int, Vec3>> comp_positions;
    std::vector<double> comp_cost;
    auto component = [&](int face, int slot) {
      auto it = component_of.find({face, slot});
      if (it != component_of.end()) return it->second;
      const int id = static_cast<int>(comp_positions.size());
      component_of[{face, slot}] = id;
      comp_positions.emplace_back();
      comp_cost.push_back(0.0);
      return id;
    };
    for (const auto& [parent, child] : tree.edges) {
      const double rho_pair = 0.5 * (faces[parent].rho + faces[child].rho);
      const double k_q = params.k_q_mult * rho_pair;
      const MatchResult m =
          match_keypoints(descs[parent], descs[child], k_q, rho_pair / std::sqrt(35.0));
      for (std::size_t k = 0; k < m.pairs.size(); ++k) {
        const int slot_a = kept_ids[parent][m.pairs[k][0]];
        const int slot_b = kept_ids[child][m.pairs[k][1]];
        int ca = component(parent, slot_a);
        int cb = component(child, slot_b);
        comp_positions[ca][parent] = (*pts[parent])[slot_a];
        comp_positions[cb][child] = (*pts[child])[slot_b];
        if (ca != cb) {
          for (const auto& [f, p] : comp_positions[cb]) comp_positions[ca][f] = p;
          comp_positions[cb].clear();
          comp_cost[ca] = std::max(comp_cost[ca], comp_cost[cb]);
          for (auto& [key, cid] : component_of)
            if (cid == cb) cid = ca;
        }
        comp_cost[ca] = std::max(comp_cost[ca], m.costs[k]);
      }
    }

    struct Candidate {
      std::vector<Vec3> pos;
      double cost;
      Vec3 mean;
    };
    std::vector<Candidate> candidates;
    for (std::size_t c = 0; c < comp_positions.size(); ++c) {
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

    for (const auto& cand : candidates) {
      if (mean_index && mean_index->nearest(cand.mean).second <= dedup_radius) continue;
      bool clash = false;
      for (const auto& m : accepted_means)
        if ((m - cand.mean).norm() <= dedup_radius) {
          clash = true;
          break;
        }
      if (clash) continue;
      accepted_means.push_back(cand.mean);
      set.points.push_back(cand.pos);
      set.costs.push_back(cand.cost);
    }
  }

  set.triangulation = triangulate_mean(set.mean_points());
}

}  // namespace fc

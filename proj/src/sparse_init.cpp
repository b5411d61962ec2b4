#include "facecorr/sparse_init.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace fc {

namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return std::min(d, 2.0 * std::numbers::pi - d);
}

}  // namespace

std::vector<int> convex_hull_2d_boundary(const Mesh& mesh, int subsample_step) {
  if (subsample_step < 1) subsample_step = 1;
  std::vector<int> ids;
  for (std::size_t i = 0; i < mesh.vertices.size(); i += subsample_step)
    ids.push_back(static_cast<int>(i));
  if (ids.size() < 3) throw Error("degenerate hull");

  // Monotone chain on the xy projection; strict turns only, so collinear
  // boundary points are excluded and square grids yield exactly the corners.
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const Vec3& p = mesh.vertices[a];
    const Vec3& q = mesh.vertices[b];
    if (p.x() != q.x()) return p.x() < q.x();
    if (p.y() != q.y()) return p.y() < q.y();
    return a < b;
  });
  ids.erase(std::unique(ids.begin(), ids.end(),
                        [&](int a, int b) {
                          return mesh.vertices[a].x() == mesh.vertices[b].x() &&
                                 mesh.vertices[a].y() == mesh.vertices[b].y();
                        }),
            ids.end());

  auto xy = [&](int id) { return Vec2(mesh.vertices[id].x(), mesh.vertices[id].y()); };
  std::vector<int> hull;
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t base = hull.size();
    for (int id : ids) {
      while (hull.size() >= base + 2 &&
             cross2(xy(hull[hull.size() - 2]), xy(hull.back()), xy(id)) <= 0.0)
        hull.pop_back();
      hull.push_back(id);
    }
    hull.pop_back();  // endpoint repeats as the start of the next pass
    std::reverse(ids.begin(), ids.end());
  }
  if (hull.size() < 3) throw Error("degenerate hull");
  return hull;
}

HullModel build_hull_model(const Mesh& face, const Vec3& nose_tip, double delta) {
  HullModel model;
  model.delta = delta;
  for (const auto& v : face.vertices) {
    model.a = std::max(model.a, std::abs(v.x() - nose_tip.x()));
    model.b = std::max(model.b, std::abs(v.y() - nose_tip.y()));
  }
  const int count = static_cast<int>(std::round(2.0 * std::numbers::pi / delta));
  for (int k = 0; k < count; ++k) {
    const double theta = k * delta;
    model.points.emplace_back(model.a * std::cos(theta), model.b * std::sin(theta), 0.0);
  }
  return model;
}

FaceSparseCorrespondence register_hull_model(const HullModel& model, const Mesh& face,
                                             const SpatialIndex& index,
                                             const std::vector<int>& hull_vertices) {
  if (hull_vertices.empty()) throw Error("insufficient hull support");
  const int count = static_cast<int>(model.points.size());

  FaceSparseCorrespondence out;
  out.angle_to_vertex.assign(count, -1);

  // Upper half: angles in [0, pi]; lower half: the rest. Hull vertices split
  // by the sign of y about the tip-centred frame.
  for (int half = 0; half < 2; ++half) {
    std::vector<int> model_ids;
    for (int k = 0; k < count; ++k) {
      const bool upper = model.points[k].y() >= -1e-12;
      if ((half == 0) == upper) model_ids.push_back(k);
    }
    std::vector<int> hull_half;
    for (int vid : hull_vertices) {
      const bool upper = face.vertices[vid].y() >= 0.0;
      if ((half == 0) == upper) hull_half.push_back(vid);
    }
    if (hull_half.size() < 3) throw Error("insufficient hull support");

    // Angular nearest hull vertex for each model point, then one-pass
    // closed-form rigid registration of the half.
    std::vector<Vec3> src, dst;
    for (int k : model_ids) {
      const double theta = std::atan2(model.points[k].y(), model.points[k].x());
      int best = hull_half[0];
      double best_d = std::numeric_limits<double>::infinity();
      for (int vid : hull_half) {
        const double phi = std::atan2(face.vertices[vid].y(), face.vertices[vid].x());
        const double d = circular_distance(theta, phi);
        if (d < best_d || (d == best_d && vid < best)) {
          best_d = d;
          best = vid;
        }
      }
      src.push_back(model.points[k]);
      dst.push_back(face.vertices[best]);
    }
    const RigidTransform rt = rigid_align(src, dst);

    for (int k : model_ids) {
      const Vec3 registered = rt.apply(model.points[k]);
      out.angle_to_vertex[k] = index.nearest(registered).first;
    }
  }

  // Drop every entry that shares a vertex with another.
  std::map<int, int> uses;
  for (int v : out.angle_to_vertex)
    if (v >= 0) uses[v]++;
  for (auto& v : out.angle_to_vertex)
    if (v >= 0 && uses[v] > 1) v = -1;
  return out;
}

SparseCorrespondenceSet build_sparse_set(const std::vector<const Mesh*>& faces,
                                         const std::vector<const SpatialIndex*>& indices,
                                         double delta, int subsample_step) {
  SparseCorrespondenceSet set;
  if (faces.empty()) return set;

  std::vector<FaceSparseCorrespondence> per_face;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto hull = convex_hull_2d_boundary(*faces[f], subsample_step);
    const auto model = build_hull_model(*faces[f], Vec3::Zero(), delta);
    per_face.push_back(register_hull_model(model, *faces[f], *indices[f], hull));
  }

  set.angle_count = static_cast<int>(per_face[0].angle_to_vertex.size());
  for (int k = 0; k < set.angle_count; ++k) {
    bool everywhere = true;
    for (const auto& fc_ : per_face)
      if (fc_.angle_to_vertex[k] < 0) everywhere = false;
    if (everywhere) set.retained_angles.push_back(k);
  }
  set.vertex_ids.resize(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int k : set.retained_angles) set.vertex_ids[f].push_back(per_face[f].angle_to_vertex[k]);
  return set;
}

std::string sparse_to_csv(const SparseCorrespondenceSet& set) {
  std::string out = "face_id,angle_index,vertex_id\n";
  char buf[64];
  for (std::size_t f = 0; f < set.vertex_ids.size(); ++f) {
    for (std::size_t s = 0; s < set.retained_angles.size(); ++s) {
      std::snprintf(buf, sizeof(buf), "%zu,%d,%d\n", f, set.retained_angles[s],
                    set.vertex_ids[f][s]);
      out += buf;
    }
  }
  return out;
}

}  // namespace fc

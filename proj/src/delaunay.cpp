#include "facecorr/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fc {

namespace {

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Positive when d is strictly inside the circumcircle of CCW triangle abc.
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
         ad * (bdx * cdy - bdy * cdx);
}

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points) {
  // Work on distinct points; map results back to original indices.
  std::vector<int> ids;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dup = false;
    for (int j : ids) {
      if ((points[i] - points[j]).squaredNorm() <= 1e-18) {
        dup = true;
        break;
      }
    }
    if (!dup) ids.push_back(static_cast<int>(i));
  }
  if (ids.size() < 3) throw Error("degenerate triangulation");

  Vec2 lo = points[ids[0]], hi = lo;
  for (int i : ids) {
    lo = lo.cwiseMin(points[i]);
    hi = hi.cwiseMax(points[i]);
  }
  const double span = std::max((hi - lo).maxCoeff(), 1.0);
  const Vec2 mid = 0.5 * (lo + hi);

  std::vector<Vec2> pts;
  pts.reserve(ids.size() + 3);
  for (int i : ids) pts.push_back(points[i]);
  const int s0 = static_cast<int>(pts.size());
  pts.push_back(mid + Vec2(-40.0 * span, -20.0 * span));
  pts.push_back(mid + Vec2(40.0 * span, -20.0 * span));
  pts.push_back(mid + Vec2(0.0, 40.0 * span));

  struct Tri {
    int a, b, c;
    bool alive = true;
  };
  std::vector<Tri> tris;
  tris.push_back({s0, s0 + 1, s0 + 2});

  for (int p = 0; p < s0; ++p) {
    // Cavity: triangles whose circumcircle contains the point.
    std::vector<int> bad;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!tris[t].alive) continue;
      if (incircle(pts[tris[t].a], pts[tris[t].b], pts[tris[t].c], pts[p]) > 0.0)
        bad.push_back(static_cast<int>(t));
    }
    std::map<std::pair<int, int>, int> edge_count;
    for (int t : bad) {
      tris[t].alive = false;
      const int v[3] = {tris[t].a, tris[t].b, tris[t].c};
      for (int k = 0; k < 3; ++k) {
        int u = v[k], w = v[(k + 1) % 3];
        auto key = std::minmax(u, w);
        edge_count[{key.first, key.second}]++;
      }
    }
    for (int t : bad) {
      const int v[3] = {tris[t].a, tris[t].b, tris[t].c};
      for (int k = 0; k < 3; ++k) {
        int u = v[k], w = v[(k + 1) % 3];
        auto key = std::minmax(u, w);
        if (edge_count[{key.first, key.second}] == 1) {
          // Boundary edge of the cavity: connect to the new point, keep CCW.
          Tri nt{u, w, p};
          if (orient2d(pts[u], pts[w], pts[p]) < 0.0) std::swap(nt.a, nt.b);
          tris.push_back(nt);
        }
      }
    }
  }

  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris) {
    if (!t.alive) continue;
    if (t.a >= s0 || t.b >= s0 || t.c >= s0) continue;
    if (std::abs(orient2d(pts[t.a], pts[t.b], pts[t.c])) <= 1e-14 * span * span) continue;
    out.push_back({ids[t.a], ids[t.b], ids[t.c]});
  }
  if (out.empty()) throw Error("degenerate triangulation");
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fc

#include "facecorr/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fc {

namespace {

// Hu's seven invariant moments of a 3x3 mass distribution. Central moments
// follow the histogram-index formulation; with the mass normalized to 1 the
// usual mu_00 scaling drops out.
std::array<double, 7> invariant_moments(const std::array<double, 9>& hist) {
  double ibar = 0.0, jbar = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      ibar += (i + 1) * hist[i * 3 + j];
      jbar += (j + 1) * hist[i * 3 + j];
    }
  auto mu = [&](int m, int n) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        acc += std::pow((i + 1) - ibar, m) * std::pow((j + 1) - jbar, n) * hist[i * 3 + j];
    return acc;
  };
  const double m20 = mu(2, 0), m02 = mu(0, 2), m11 = mu(1, 1);
  const double m30 = mu(3, 0), m03 = mu(0, 3), m21 = mu(2, 1), m12 = mu(1, 2);

  std::array<double, 7> phi;
  phi[0] = m20 + m02;
  phi[1] = (m20 - m02) * (m20 - m02) + 4.0 * m11 * m11;
  phi[2] = (m30 - 3 * m12) * (m30 - 3 * m12) + (3 * m21 - m03) * (3 * m21 - m03);
  phi[3] = (m30 + m12) * (m30 + m12) + (m21 + m03) * (m21 + m03);
  phi[4] = (m30 - 3 * m12) * (m30 + m12) *
               ((m30 + m12) * (m30 + m12) - 3 * (m21 + m03) * (m21 + m03)) +
           (3 * m21 - m03) * (m21 + m03) *
               (3 * (m30 + m12) * (m30 + m12) - (m21 + m03) * (m21 + m03));
  phi[5] = (m20 - m02) * ((m30 + m12) * (m30 + m12) - (m21 + m03) * (m21 + m03)) +
           4.0 * m11 * (m30 + m12) * (m21 + m03);
  phi[6] = (3 * m21 - m03) * (m30 + m12) *
               ((m30 + m12) * (m30 + m12) - 3 * (m21 + m03) * (m21 + m03)) -
           (m30 - 3 * m12) * (m21 + m03) *
               (3 * (m30 + m12) * (m30 + m12) - (m21 + m03) * (m21 + m03));
  return phi;
}

std::array<double, 9> occupancy_histogram(const std::vector<Vec2>& pts) {
  std::array<double, 9> hist{};
  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 span = (hi - lo).cwiseMax(1e-12);
  for (const auto& p : pts) {
    int i = std::min(2, static_cast<int>(3.0 * (p.x() - lo.x()) / span.x()));
    int j = std::min(2, static_cast<int>(3.0 * (p.y() - lo.y()) / span.y()));
    hist[i * 3 + j] += 1.0;
  }
  for (auto& h : hist) h /= static_cast<double>(pts.size());
  return hist;
}

constexpr double kCurvFloor = 1e-12;

}  // namespace

Descriptor extract_descriptor(const FaceContext& face, const Vec3& crop_center, double radius,
                              const PatchFrame& frame, const Vec3& position_feature,
                              const Vec3& normal_feature) {
  const auto ids = face.index->radius_query(crop_center, radius);
  if (ids.size() < 6) throw Error("descriptor support too small");

  Descriptor d;
  d.v[0] = position_feature.x();
  d.v[1] = position_feature.y();
  d.v[2] = position_feature.z();
  d.v[3] = normal_feature.x();
  d.v[4] = normal_feature.y();
  d.v[5] = normal_feature.z();

  // Crop in the patch-local frame, centred on its own centroid.
  std::vector<Vec3> local(ids.size());
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    local[i] = frame.world_to_local * face.mesh->vertices[ids[i]];
    centroid += local[i];
  }
  centroid /= static_cast<double>(local.size());
  for (auto& p : local) p -= centroid;

  const int planes[3][2] = {{0, 1}, {1, 2}, {0, 2}};  // XY, YZ, XZ
  for (int pl = 0; pl < 3; ++pl) {
    std::vector<Vec2> proj(local.size());
    for (std::size_t i = 0; i < local.size(); ++i)
      proj[i] = Vec2(local[i][planes[pl][0]], local[i][planes[pl][1]]);
    const auto phi = invariant_moments(occupancy_histogram(proj));
    for (int k = 0; k < 7; ++k) d.v[6 + 7 * pl + k] = phi[k];
  }

  // Curvature block from the cached per-vertex principal curvatures.
  double k1 = 0.0, k2 = 0.0;
  int valid = 0;
  for (int id : ids) {
    const CurvatureSample& c = face.curvature[id];
    if (!c.valid) continue;
    k1 += c.k1;
    k2 += c.k2;
    ++valid;
  }
  if (valid == 0) throw Error("descriptor support too small");
  k1 /= valid;
  k2 /= valid;
  if (k1 < k2) std::swap(k1, k2);

  const double K = k1 * k2;
  const double H = 0.5 * (k1 + k2);
  double s_a = 0.5, s_b = 0.0;
  if (k1 - k2 > kCurvFloor) {
    s_a = 0.5 - std::numbers::inv_pi * std::atan((k1 + k2) / (k1 - k2));
    s_b = 2.0 * std::numbers::inv_pi * std::atan((k1 + k2) / (k1 - k2));
  }
  const double c = std::sqrt(0.5 * (k1 * k1 + k2 * k2));
  const double c_l = 2.0 * std::numbers::inv_pi * std::log(std::max(c, kCurvFloor));

  d.v[27] = k1;
  d.v[28] = k2;
  d.v[29] = K;
  d.v[30] = H;
  d.v[31] = s_a;
  d.v[32] = s_b;
  d.v[33] = c;
  d.v[34] = c_l;
  d.v[35] = H * H - K;
  d.v[36] = s_b * c_l;
  d.v[37] = std::log(std::max(K - H + 1.0, kCurvFloor));
  return d;
}

Descriptor extract_descriptor(const FaceContext& face, const Vec3& point, double radius) {
  Vec3 normal = Vec3::UnitZ();
  if (!face.mesh->normals.empty()) normal = face.mesh->normals[face.index->nearest(point).first];
  return extract_descriptor(face, point, radius, PatchFrame{}, point, normal);
}

MatchResult match_keypoints(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b,
                            double k_q, double z_scale) {
  MatchResult result;
  if (a.empty() || b.empty()) return result;

  // z-score statistics over the union for every non-position component
  std::array<double, kDescriptorSize> mean{}, sd{};
  const double count = static_cast<double>(a.size() + b.size());
  for (const auto& list : {&a, &b})
    for (const auto& d : *list)
      for (int k = 3; k < kDescriptorSize; ++k) mean[k] += d.v[k];
  for (int k = 3; k < kDescriptorSize; ++k) mean[k] /= count;
  for (const auto& list : {&a, &b})
    for (const auto& d : *list)
      for (int k = 3; k < kDescriptorSize; ++k) {
        const double dev = d.v[k] - mean[k];
        sd[k] += dev * dev;
      }
  for (int k = 3; k < kDescriptorSize; ++k) sd[k] = std::sqrt(sd[k] / count);

  auto normalized = [&](const Descriptor& d) {
    std::array<double, kDescriptorSize> out;
    for (int k = 0; k < 3; ++k) out[k] = d.v[k];
    for (int k = 3; k < kDescriptorSize; ++k)
      out[k] = sd[k] > 1e-12 ? z_scale * (d.v[k] - mean[k]) / sd[k] : 0.0;
    return out;
  };
  std::vector<std::array<double, kDescriptorSize>> na(a.size()), nb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) na[i] = normalized(a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) nb[i] = normalized(b[i]);

  auto cost = [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (int k = 0; k < kDescriptorSize; ++k) {
      const double dif = na[i][k] - nb[j][k];
      acc += dif * dif;
    }
    return acc;
  };

  std::vector<int> best_b(a.size(), -1), best_a(b.size(), -1);
  std::vector<double> best_b_cost(a.size(), std::numeric_limits<double>::infinity());
  std::vector<double> best_a_cost(b.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double cij = cost(i, j);
      if (cij < best_b_cost[i]) {
        best_b_cost[i] = cij;
        best_b[i] = static_cast<int>(j);
      }
      if (cij < best_a_cost[j]) {
        best_a_cost[j] = cij;
        best_a[j] = static_cast<int>(i);
      }
    }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int j = best_b[i];
    if (j >= 0 && best_a[j] == static_cast<int>(i) && best_b_cost[i] <= k_q) {
      result.pairs.push_back({static_cast<int>(i), j});
      result.costs.push_back(best_b_cost[i]);
    }
  }
  return result;
}

}  // namespace fc

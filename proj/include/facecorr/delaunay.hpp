#pragma once

#include <array>
#include <vector>

#include "facecorr/geometry.hpp"

namespace fc {

/// Delaunay triangulation of a planar point set (Bowyer-Watson). The returned
/// triangles are CCW and index the input order. Throws
/// Error("degenerate triangulation") when fewer than 3 distinct points remain
/// or all points are collinear.
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points);

}  // namespace fc

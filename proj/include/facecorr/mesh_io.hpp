#pragma once

#include <string>

#include "facecorr/mesh.hpp"

namespace fc {

struct PlyWriteOptions {
  bool binary = true;
  bool double_precision = false;  // float32 coordinates by default
};

/// Reads ASCII OBJ (v/f records, polygons fan-triangulated) or PLY (ASCII or
/// binary little-endian, float or double x/y/z, integer face lists). Format
/// chosen by extension. Parse errors name the file and line/offset.
Mesh read_mesh(const std::string& path);

/// Writes by extension: .obj (ASCII) or .ply.
void write_mesh(const Mesh& mesh, const std::string& path, const PlyWriteOptions& opts = {});

}  // namespace fc

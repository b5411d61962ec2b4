#include "facecorr/mesh_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace fc {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw Error(path + ":" + std::to_string(line) + ": " + msg);
}

Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Mesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) parse_fail(path, lineno, "malformed vertex record");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> ids;
      std::string tok;
      while (ss >> tok) {
        // accept i, i/t, i//n, i/t/n
        std::size_t slash = tok.find('/');
        std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        int idx = 0;
        try {
          idx = std::stoi(head);
        } catch (...) {
          parse_fail(path, lineno, "malformed face index '" + tok + "'");
        }
        if (idx < 0) idx = static_cast<int>(mesh.vertices.size()) + idx + 1;
        if (idx <= 0 || idx > static_cast<int>(mesh.vertices.size()))
          parse_fail(path, lineno, "face index out of range");
        ids.push_back(idx - 1);
      }
      if (ids.size() < 3) parse_fail(path, lineno, "face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < ids.size(); ++k)
        mesh.triangles.push_back({ids[0], ids[k], ids[k + 1]});
    }
  }
  sanitize(mesh);
  return mesh;
}

void write_obj(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.triangles)
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

int scalar_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double read_scalar_binary(std::istream& in, const std::string& type) {
  unsigned char raw[8];
  int sz = scalar_size(type);
  in.read(reinterpret_cast<char*>(raw), sz);
  if (type == "float" || type == "float32") {
    float f;
    std::memcpy(&f, raw, 4);
    return f;
  }
  if (type == "double" || type == "float64") {
    double d;
    std::memcpy(&d, raw, 8);
    return d;
  }
  if (type == "char" || type == "int8") return *reinterpret_cast<int8_t*>(raw);
  if (type == "uchar" || type == "uint8") return raw[0];
  if (type == "short" || type == "int16") {
    int16_t v;
    std::memcpy(&v, raw, 2);
    return v;
  }
  if (type == "ushort" || type == "uint16") {
    uint16_t v;
    std::memcpy(&v, raw, 2);
    return v;
  }
  if (type == "int" || type == "int32") {
    int32_t v;
    std::memcpy(&v, raw, 4);
    return v;
  }
  uint32_t v;
  std::memcpy(&v, raw, 4);
  return v;
}

Mesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&]() {
    if (!std::getline(in, line)) parse_fail(path, lineno, "unexpected end of header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++lineno;
  };

  next_line();
  if (line != "ply") parse_fail(path, lineno, "missing ply magic");

  bool binary = false;
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
  };
  std::vector<Element> elements;

  for (;;) {
    next_line();
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "comment" || tag == "obj_info" || tag.empty()) continue;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        parse_fail(path, lineno, "unsupported format " + fmt);
    } else if (tag == "element") {
      Element e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) parse_fail(path, lineno, "property before element");
      PlyProperty p;
      std::string t;
      ss >> t;
      if (t == "list") {
        p.is_list = true;
        ss >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ss >> p.name;
      }
      if (scalar_size(p.type) == 0) parse_fail(path, lineno, "unsupported type " + p.type);
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    } else {
      parse_fail(path, lineno, "unknown header record '" + tag + "'");
    }
  }

  Mesh mesh;
  for (const auto& elem : elements) {
    const bool is_vertex = elem.name == "vertex";
    const bool is_face = elem.name == "face";
    int xi = -1, yi = -1, zi = -1;
    if (is_vertex) {
      for (std::size_t k = 0; k < elem.props.size(); ++k) {
        if (elem.props[k].name == "x") xi = static_cast<int>(k);
        if (elem.props[k].name == "y") yi = static_cast<int>(k);
        if (elem.props[k].name == "z") zi = static_cast<int>(k);
      }
      if (xi < 0 || yi < 0 || zi < 0) parse_fail(path, lineno, "vertex element lacks x/y/z");
      mesh.vertices.reserve(elem.count);
    }

    for (std::size_t i = 0; i < elem.count; ++i) {
      Vec3 p = Vec3::Zero();
      std::vector<long long> list;
      std::istringstream ass;
      if (!binary) {
        if (!std::getline(in, line))
          parse_fail(path, lineno, "unexpected end of data in element " + elem.name);
        ++lineno;
        ass.str(line);
      }
      for (std::size_t k = 0; k < elem.props.size(); ++k) {
        const auto& prop = elem.props[k];
        if (prop.is_list) {
          long long count = 0;
          if (binary)
            count = static_cast<long long>(read_scalar_binary(in, prop.count_type));
          else if (!(ass >> count))
            parse_fail(path, lineno, "malformed list count");
          list.clear();
          for (long long j = 0; j < count; ++j) {
            long long v = 0;
            if (binary)
              v = static_cast<long long>(read_scalar_binary(in, prop.type));
            else if (!(ass >> v))
              parse_fail(path, lineno, "malformed list entry");
            list.push_back(v);
          }
          if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            if (list.size() < 3) parse_fail(path, lineno, "face with fewer than 3 vertices");
            for (std::size_t j = 1; j + 1 < list.size(); ++j)
              mesh.triangles.push_back({static_cast<int>(list[0]), static_cast<int>(list[j]),
                                        static_cast<int>(list[j + 1])});
          }
        } else {
          double v = 0;
          if (binary)
            v = read_scalar_binary(in, prop.type);
          else if (!(ass >> v))
            parse_fail(path, lineno, "malformed scalar for " + prop.name);
          if (is_vertex) {
            if (static_cast<int>(k) == xi) p.x() = v;
            if (static_cast<int>(k) == yi) p.y() = v;
            if (static_cast<int>(k) == zi) p.z() = v;
          }
        }
      }
      if (binary && !in) parse_fail(path, lineno, "unexpected end of binary data");
      if (is_vertex) mesh.vertices.push_back(p);
    }
  }
  sanitize(mesh);
  return mesh;
}

void write_ply(const Mesh& mesh, const std::string& path, const PlyWriteOptions& opts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const char* coord_type = opts.double_precision ? "double" : "float";
  out << "ply\n"
      << (opts.binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property " << coord_type << " x\n"
      << "property " << coord_type << " y\n"
      << "property " << coord_type << " z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  if (opts.binary) {
    for (const auto& v : mesh.vertices) {
      if (opts.double_precision) {
        double c[3] = {v.x(), v.y(), v.z()};
        out.write(reinterpret_cast<const char*>(c), sizeof(c));
      } else {
        float c[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                      static_cast<float>(v.z())};
        out.write(reinterpret_cast<const char*>(c), sizeof(c));
      }
    }
    for (const auto& t : mesh.triangles) {
      unsigned char n = 3;
      int32_t ids[3] = {t[0], t[1], t[2]};
      out.write(reinterpret_cast<const char*>(&n), 1);
      out.write(reinterpret_cast<const char*>(ids), sizeof(ids));
    }
  } else {
    char buf[160];
    for (const auto& v : mesh.vertices) {
      if (opts.double_precision)
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
      else
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", static_cast<double>(v.x()),
                      static_cast<double>(v.y()), static_cast<double>(v.z()));
      out << buf;
    }
    for (const auto& t : mesh.triangles)
      out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
}

}  // namespace

Mesh read_mesh(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "obj") return read_obj(path);
  if (ext == "ply") return read_ply(path);
  throw Error("unsupported mesh format: " + path);
}

void write_mesh(const Mesh& mesh, const std::string& path, const PlyWriteOptions& opts) {
  const std::string ext = lower_ext(path);
  if (ext == "obj") return write_obj(mesh, path);
  if (ext == "ply") return write_ply(mesh, path, opts);
  throw Error("unsupported mesh format: " + path);
}

}  // namespace fc

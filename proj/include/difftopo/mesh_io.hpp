#pragma once

// Mesh readers (OFF, OBJ v/f records, PLY ascii + binary little endian) and
// writers (OBJ, PLY with optional per-vertex scalar / color attributes).

#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "difftopo/mesh.hpp"

namespace difftopo {

enum class MeshFormat { Auto, Off, Obj, Ply };

namespace io_detail {

inline std::string next_content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    std::size_t i = line.find_first_not_of(" \t\r\n");
    if (i == std::string::npos) continue;
    if (line[i] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  throw ParseError("unexpected end of file");
}

inline TriangleMesh read_off(std::istream& in) {
  std::string header = next_content_line(in);
  {
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") throw ParseError("missing OFF header");
  }
  std::size_t nv = 0, nf = 0, ne = 0;
  {
    std::istringstream cs(next_content_line(in));
    if (!(cs >> nv >> nf >> ne)) throw ParseError("bad OFF count line");
  }
  std::vector<Vec3> vertices(nv);
  for (auto& p : vertices) {
    std::istringstream ls(next_content_line(in));
    if (!(ls >> p.x >> p.y >> p.z)) throw ParseError("bad OFF vertex line");
  }
  std::vector<std::array<Index, 3>> faces;
  faces.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    std::istringstream ls(next_content_line(in));
    std::size_t arity = 0;
    if (!(ls >> arity)) throw ParseError("bad OFF face line");
    if (arity != 3) throw ParseError("only triangle faces are supported");
    std::array<Index, 3> tri{};
    for (auto& v : tri)
      if (!(ls >> v)) throw ParseError("bad OFF face line");
    faces.push_back(tri);
  }
  return TriangleMesh(std::move(vertices), std::move(faces));
}

inline Index parse_obj_index(const std::string& token, std::size_t vertex_count) {
  // "idx", "idx/..", "idx//.." forms; OBJ indices are 1-based.
  std::size_t slash = token.find('/');
  long idx = std::stol(slash == std::string::npos ? token : token.substr(0, slash));
  if (idx < 0) idx = static_cast<long>(vertex_count) + idx + 1;
  if (idx < 1 || idx > static_cast<long>(vertex_count))
    throw ParseError("OBJ face index out of range");
  return static_cast<Index>(idx - 1);
}

inline TriangleMesh read_obj(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<std::array<Index, 3>> faces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw ParseError("bad OBJ vertex line");
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<Index> poly;
      std::string token;
      while (ls >> token) poly.push_back(parse_obj_index(token, vertices.size()));
      if (poly.size() != 3) throw ParseError("only triangle faces are supported");
      faces.push_back({poly[0], poly[1], poly[2]});
    }
    // Other record types (vn, vt, l, o, g, usemtl, ...) are ignored.
  }
  if (vertices.empty() || faces.empty()) throw ParseError("OBJ contains no triangle mesh");
  return TriangleMesh(std::move(vertices), std::move(faces));
}

// --- PLY -------------------------------------------------------------------

struct PlyProperty {
  std::string name;
  std::string type;       // scalar type, or the value type for lists
  std::string count_type; // empty for scalar properties
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
  throw ParseError("unknown PLY type " + t);
}

inline double ply_read_binary_scalar(std::istream& in, const std::string& type) {
  unsigned char buf[8];
  std::size_t n = ply_type_size(type);
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (!in) throw ParseError("truncated PLY binary payload");
  auto as = [&](auto v) {
    std::memcpy(&v, buf, sizeof(v));
    return static_cast<double>(v);
  };
  if (type == "float" || type == "float32") return as(float{});
  if (type == "double" || type == "float64") return as(double{});
  if (type == "char" || type == "int8") return as(std::int8_t{});
  if (type == "uchar" || type == "uint8") return as(std::uint8_t{});
  if (type == "short" || type == "int16") return as(std::int16_t{});
  if (type == "ushort" || type == "uint16") return as(std::uint16_t{});
  if (type == "int" || type == "int32") return as(std::int32_t{});
  if (type == "uint" || type == "uint32") return as(std::uint32_t{});
  if (type == "int64") return as(std::int64_t{});
  if (type == "uint64") return as(std::uint64_t{});
  throw ParseError("unknown PLY type " + type);
}

inline TriangleMesh read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty PLY file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw ParseError("missing ply magic");

  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "comment" || tag == "obj_info" || tag.empty()) continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw ParseError("unsupported PLY format " + fmt);
    } else if (tag == "element") {
      PlyElement el;
      ls >> el.name >> el.count;
      elements.push_back(el);
    } else if (tag == "property") {
      if (elements.empty()) throw ParseError("PLY property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (tag == "end_header") {
      break;
    } else {
      throw ParseError("unexpected PLY header line: " + line);
    }
  }

  std::vector<Vec3> vertices;
  std::vector<std::array<Index, 3>> faces;

  auto read_ascii_tokens = [&](std::size_t n, std::vector<double>& out) {
    out.clear();
    while (out.size() < n) {
      double v;
      if (!(in >> v)) throw ParseError("truncated PLY ascii payload");
      out.push_back(v);
    }
  };

  for (const PlyElement& el : elements) {
    if (el.name == "vertex") {
      int ix = -1, iy = -1, iz = -1;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        if (el.properties[p].is_list) throw ParseError("list property on PLY vertex element");
        if (el.properties[p].name == "x") ix = static_cast<int>(p);
        if (el.properties[p].name == "y") iy = static_cast<int>(p);
        if (el.properties[p].name == "z") iz = static_cast<int>(p);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw ParseError("PLY vertex element lacks x/y/z");
      vertices.resize(el.count);
      std::vector<double> row;
      for (std::size_t i = 0; i < el.count; ++i) {
        if (binary) {
          row.clear();
          for (const auto& p : el.properties) row.push_back(ply_read_binary_scalar(in, p.type));
        } else {
          read_ascii_tokens(el.properties.size(), row);
        }
        vertices[i] = {row[ix], row[iy], row[iz]};
      }
    } else if (el.name == "face") {
      faces.reserve(el.count);
      for (std::size_t i = 0; i < el.count; ++i) {
        for (const auto& p : el.properties) {
          if (p.is_list) {
            std::size_t arity;
            std::vector<long> poly;
            if (binary) {
              arity = static_cast<std::size_t>(ply_read_binary_scalar(in, p.count_type));
              for (std::size_t k = 0; k < arity; ++k)
                poly.push_back(static_cast<long>(ply_read_binary_scalar(in, p.type)));
            } else {
              double a;
              if (!(in >> a)) throw ParseError("truncated PLY ascii payload");
              arity = static_cast<std::size_t>(a);
              for (std::size_t k = 0; k < arity; ++k) {
                double v;
                if (!(in >> v)) throw ParseError("truncated PLY ascii payload");
                poly.push_back(static_cast<long>(v));
              }
            }
            if (p.name == "vertex_indices" || p.name == "vertex_index") {
              if (arity != 3) throw ParseError("only triangle faces are supported");
              for (long v : poly)
                if (v < 0 || v >= static_cast<long>(vertices.size()))
                  throw ParseError("PLY face index out of range");
              faces.push_back({static_cast<Index>(poly[0]), static_cast<Index>(poly[1]),
                               static_cast<Index>(poly[2])});
            }
          } else {
            if (binary) ply_read_binary_scalar(in, p.type);
            else {
              double skip;
              if (!(in >> skip)) throw ParseError("truncated PLY ascii payload");
            }
          }
        }
      }
    } else {
      // Skip unknown elements.
      for (std::size_t i = 0; i < el.count; ++i) {
        for (const auto& p : el.properties) {
          if (p.is_list) {
            std::size_t arity;
            if (binary) arity = static_cast<std::size_t>(ply_read_binary_scalar(in, p.count_type));
            else {
              double a;
              if (!(in >> a)) throw ParseError("truncated PLY ascii payload");
              arity = static_cast<std::size_t>(a);
            }
            for (std::size_t k = 0; k < arity; ++k) {
              if (binary) ply_read_binary_scalar(in, p.type);
              else {
                double v;
                if (!(in >> v)) throw ParseError("truncated PLY ascii payload");
              }
            }
          } else if (binary) {
            ply_read_binary_scalar(in, p.type);
          } else {
            double v;
            if (!(in >> v)) throw ParseError("truncated PLY ascii payload");
          }
        }
      }
    }
  }
  if (vertices.empty() || faces.empty()) throw ParseError("PLY contains no triangle mesh");
  return TriangleMesh(std::move(vertices), std::move(faces));
}

inline MeshFormat format_from_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) throw ParseError("cannot infer mesh format from " + path);
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "off") return MeshFormat::Off;
  if (ext == "obj") return MeshFormat::Obj;
  if (ext == "ply") return MeshFormat::Ply;
  throw ParseError("unsupported mesh extension ." + ext);
}

}  // namespace io_detail

inline TriangleMesh load_mesh(const std::string& path, MeshFormat format = MeshFormat::Auto) {
  if (format == MeshFormat::Auto) format = io_detail::format_from_extension(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  switch (format) {
    case MeshFormat::Off: return io_detail::read_off(in);
    case MeshFormat::Obj: return io_detail::read_obj(in);
    case MeshFormat::Ply: return io_detail::read_ply(in);
    default: throw ParseError("unsupported format");
  }
}

struct VertexAttributes {
  const std::vector<double>* scalar = nullptr;              // written as "quality"
  const std::vector<std::array<unsigned char, 3>>* color = nullptr;
};

inline void save_ply(const TriangleMesh& mesh, const std::string& path,
                     const VertexAttributes& attrs = {}, bool binary = false) {
  if (attrs.scalar && attrs.scalar->size() != mesh.vertex_count())
    throw DimensionMismatch("scalar attribute size mismatch");
  if (attrs.color && attrs.color->size() != mesh.vertex_count())
    throw DimensionMismatch("color attribute size mismatch");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "element vertex " << mesh.vertex_count() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (attrs.scalar) out << "property double quality\n";
  if (attrs.color) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.face_count() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";

  auto put = [&](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    const Vec3& p = mesh.position(v);
    if (binary) {
      put(&p.x, 8); put(&p.y, 8); put(&p.z, 8);
      if (attrs.scalar) put(&(*attrs.scalar)[v], 8);
      if (attrs.color) put((*attrs.color)[v].data(), 3);
    } else {
      out << p.x << " " << p.y << " " << p.z;
      if (attrs.scalar) out << " " << (*attrs.scalar)[v];
      if (attrs.color)
        out << " " << int((*attrs.color)[v][0]) << " " << int((*attrs.color)[v][1]) << " "
            << int((*attrs.color)[v][2]);
      out << "\n";
    }
  }
  for (Index f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.face(f);
    if (binary) {
      unsigned char n = 3;
      put(&n, 1);
      std::int32_t idx[3] = {static_cast<std::int32_t>(t[0]), static_cast<std::int32_t>(t[1]),
                             static_cast<std::int32_t>(t[2])};
      put(idx, 12);
    } else {
      out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    }
  }
}

inline void save_obj(const TriangleMesh& mesh, const std::string& path,
                     const VertexAttributes& attrs = {}) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    const Vec3& p = mesh.position(v);
    out << "v " << p.x << " " << p.y << " " << p.z;
    if (attrs.color) {
      // Vertex colors as the common OBJ extension (r g b after position).
      const auto& c = (*attrs.color)[v];
      out << " " << c[0] / 255.0 << " " << c[1] / 255.0 << " " << c[2] / 255.0;
    }
    out << "\n";
  }
  for (Index f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.face(f);
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
}

}  // namespace difftopo

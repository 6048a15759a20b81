#pragma once

// Closed orientable triangle mesh with validated topology and the adjacency
// indices used by the diffusion and loop extraction passes. Construction
// rejects open, non-manifold, non-orientable, degenerate and disconnected
// inputs instead of repairing them.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "difftopo/errors.hpp"
#include "difftopo/vec3.hpp"

namespace difftopo {

using Index = std::uint32_t;
inline constexpr Index kInvalidIndex = std::numeric_limits<Index>::max();

struct MeshTopologySummary {
  Index vertex_count = 0;
  Index edge_count = 0;
  Index face_count = 0;
  long euler_characteristic = 0;
  long genus = 0;
};

class TriangleMesh {
 public:
  TriangleMesh() = default;

  // Validates and indexes a triangle soup. Faces must describe a single
  // closed orientable 2-manifold; orientation is normalized to outward CCW.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<std::array<Index, 3>> faces);

  Index vertex_count() const { return static_cast<Index>(vertices_.size()); }
  Index face_count() const { return static_cast<Index>(faces_.size()); }
  Index edge_count() const { return static_cast<Index>(edge_vertices_.size()); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<std::array<Index, 3>>& faces() const { return faces_; }

  const Vec3& position(Index v) const { return vertices_[v]; }
  const std::array<Index, 3>& face(Index f) const { return faces_[f]; }

  // Edge e connects edge_vertices(e)[0] < edge_vertices(e)[1] and carries
  // exactly two incident faces (guaranteed by validation).
  const std::array<Index, 2>& edge_vertices(Index e) const { return edge_vertices_[e]; }
  const std::array<Index, 2>& edge_faces(Index e) const { return edge_faces_[e]; }
  const std::array<Index, 3>& face_edges(Index f) const { return face_edges_[f]; }

  std::span<const Index> vertex_faces(Index v) const {
    return {v2f_.data() + v2f_offsets_[v], v2f_offsets_[v + 1] - v2f_offsets_[v]};
  }
  std::span<const Index> vertex_neighbors(Index v) const {
    return {v2v_.data() + v2v_offsets_[v], v2v_offsets_[v + 1] - v2v_offsets_[v]};
  }

  Index opposite_face(Index edge, Index f) const {
    const auto& ef = edge_faces_[edge];
    return ef[0] == f ? ef[1] : ef[0];
  }

  double face_area(Index f) const {
    const auto& t = faces_[f];
    return 0.5 * norm(cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]));
  }
  Vec3 face_normal(Index f) const {
    const auto& t = faces_[f];
    return normalized(cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]));
  }
  Vec3 face_centroid(Index f) const {
    const auto& t = faces_[f];
    return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
  }

  // Area-weighted unit vertex normal; points outward for validated meshes.
  Vec3 vertex_normal(Index v) const {
    Vec3 n{};
    for (Index f : vertex_faces(v)) {
      const auto& t = faces_[f];
      n += cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]);
    }
    return normalized(n);
  }

  double edge_length(Index e) const {
    return distance(vertices_[edge_vertices_[e][0]], vertices_[edge_vertices_[e][1]]);
  }

  double mean_edge_length() const {
    double total = 0;
    for (Index e = 0; e < edge_count(); ++e) total += edge_length(e);
    return edge_count() ? total / edge_count() : 0.0;
  }

  void bounding_box(Vec3& lo, Vec3& hi) const {
    lo = Vec3{1e300, 1e300, 1e300};
    hi = Vec3{-1e300, -1e300, -1e300};
    for (const Vec3& p : vertices_) {
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
  }
  double bounding_box_diagonal() const {
    Vec3 lo, hi;
    bounding_box(lo, hi);
    return norm(hi - lo);
  }

 private:
  void orient_faces();
  void check_degenerate_faces() const;
  void build_adjacency();

  std::vector<Vec3> vertices_;
  std::vector<std::array<Index, 3>> faces_;
  std::vector<std::array<Index, 2>> edge_vertices_;
  std::vector<std::array<Index, 2>> edge_faces_;
  std::vector<std::array<Index, 3>> face_edges_;
  std::vector<std::size_t> v2f_offsets_;
  std::vector<Index> v2f_;
  std::vector<std::size_t> v2v_offsets_;
  std::vector<Index> v2v_;
};

inline MeshTopologySummary topology_summary(const TriangleMesh& mesh) {
  MeshTopologySummary s;
  s.vertex_count = mesh.vertex_count();
  s.edge_count = mesh.edge_count();
  s.face_count = mesh.face_count();
  s.euler_characteristic = static_cast<long>(s.vertex_count) -
                           static_cast<long>(s.edge_count) + static_cast<long>(s.face_count);
  if ((2 - s.euler_characteristic) % 2 != 0 || s.euler_characteristic > 2)
    throw TopologyError("euler characteristic " + std::to_string(s.euler_characteristic) +
                        " is not that of a closed orientable surface");
  s.genus = (2 - s.euler_characteristic) / 2;
  return s;
}

// ---------------------------------------------------------------------------

inline TriangleMesh::TriangleMesh(std::vector<Vec3> vertices,
                                  std::vector<std::array<Index, 3>> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  if (faces_.empty()) throw TopologyError("mesh has no faces");

  const Index raw_vertex_count = static_cast<Index>(vertices_.size());
  for (const auto& f : faces_) {
    for (Index v : f)
      if (v >= raw_vertex_count) throw ParseError("face references vertex out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw DegeneracyError("face repeats a vertex");
  }

  // Drop unreferenced vertices; every remaining vertex is used by a face.
  {
    std::vector<Index> remap(vertices_.size(), kInvalidIndex);
    Index next = 0;
    for (const auto& f : faces_)
      for (Index v : f)
        if (remap[v] == kInvalidIndex) remap[v] = next++;
    if (next != vertices_.size()) {
      std::vector<Vec3> compact(next);
      for (Index v = 0; v < vertices_.size(); ++v)
        if (remap[v] != kInvalidIndex) compact[remap[v]] = vertices_[v];
      vertices_ = std::move(compact);
      for (auto& f : faces_)
        for (Index& v : f) v = remap[v];
    }
  }

  // Duplicate faces (in any vertex order) are rejected.
  {
    std::vector<std::array<Index, 3>> keys(faces_.size());
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      keys[i] = faces_[i];
      std::sort(keys[i].begin(), keys[i].end());
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
      throw TopologyError("duplicate face");
  }

  orient_faces();
  check_degenerate_faces();
  build_adjacency();
}

inline void TriangleMesh::orient_faces() {
  // Undirected edge -> up to two (face, local edge slot) records.
  struct EdgeRec {
    Index faces[2] = {kInvalidIndex, kInvalidIndex};
    int count = 0;
  };
  auto edge_key = [](Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };

  std::unordered_map<std::uint64_t, EdgeRec> edges;
  edges.reserve(faces_.size() * 3 / 2);
  for (Index f = 0; f < faces_.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      Index a = faces_[f][k], b = faces_[f][(k + 1) % 3];
      EdgeRec& rec = edges[edge_key(a, b)];
      if (rec.count >= 2) throw TopologyError("non-manifold edge with more than two faces");
      rec.faces[rec.count++] = f;
    }
  }
  for (const auto& [key, rec] : edges) {
    (void)key;
    if (rec.count != 2) throw TopologyError("boundary edge: surface is not closed");
  }

  // Flip faces via BFS so every shared edge is traversed in opposite
  // directions by its two faces. A conflict on a visited face means the
  // surface is non-orientable.
  auto traverses_forward = [&](Index f, Index a, Index b) {
    for (int k = 0; k < 3; ++k)
      if (faces_[f][k] == a && faces_[f][(k + 1) % 3] == b) return true;
    return false;
  };

  std::vector<char> visited(faces_.size(), 0);
  std::vector<Index> queue{0};
  visited[0] = 1;
  std::size_t head = 0, reached = 1;
  while (head < queue.size()) {
    Index f = queue[head++];
    for (int k = 0; k < 3; ++k) {
      Index a = faces_[f][k], b = faces_[f][(k + 1) % 3];
      const EdgeRec& rec = edges.at(edge_key(a, b));
      Index g = rec.faces[0] == f ? rec.faces[1] : rec.faces[0];
      bool same_direction = traverses_forward(g, a, b);
      if (!visited[g]) {
        if (same_direction) std::swap(faces_[g][1], faces_[g][2]);
        visited[g] = 1;
        ++reached;
        queue.push_back(g);
      } else if (same_direction) {
        throw TopologyError("inconsistent orientation: surface is non-orientable");
      }
    }
  }
  if (reached != faces_.size())
    throw TopologyError("mesh has multiple connected components");

  // Outward orientation: signed volume of the closed surface must be positive.
  double signed_volume = 0;
  for (const auto& t : faces_)
    signed_volume += dot(vertices_[t[0]], cross(vertices_[t[1]], vertices_[t[2]])) / 6.0;
  if (signed_volume < 0)
    for (auto& t : faces_) std::swap(t[1], t[2]);
}

inline void TriangleMesh::check_degenerate_faces() const {
  const double diag = bounding_box_diagonal();
  const double tol = 1e-12 * diag * diag;
  for (Index f = 0; f < faces_.size(); ++f)
    if (face_area(f) < tol)
      throw DegeneracyError("face " + std::to_string(f) + " has near-zero area");
}

inline void TriangleMesh::build_adjacency() {
  auto edge_key = [](Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_map<std::uint64_t, Index> edge_ids;
  edge_ids.reserve(faces_.size() * 3 / 2);
  face_edges_.assign(faces_.size(), {kInvalidIndex, kInvalidIndex, kInvalidIndex});

  for (Index f = 0; f < faces_.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      Index a = faces_[f][k], b = faces_[f][(k + 1) % 3];
      auto [it, inserted] = edge_ids.try_emplace(edge_key(a, b), static_cast<Index>(edge_vertices_.size()));
      if (inserted) {
        edge_vertices_.push_back({std::min(a, b), std::max(a, b)});
        edge_faces_.push_back({f, kInvalidIndex});
      } else {
        edge_faces_[it->second][1] = f;
      }
      face_edges_[f][k] = it->second;
    }
  }

  // Vertex -> incident faces.
  v2f_offsets_.assign(vertices_.size() + 1, 0);
  for (const auto& t : faces_)
    for (Index v : t) ++v2f_offsets_[v + 1];
  for (std::size_t v = 0; v < vertices_.size(); ++v) v2f_offsets_[v + 1] += v2f_offsets_[v];
  v2f_.resize(faces_.size() * 3);
  {
    std::vector<std::size_t> cursor(v2f_offsets_.begin(), v2f_offsets_.end() - 1);
    for (Index f = 0; f < faces_.size(); ++f)
      for (Index v : faces_[f]) v2f_[cursor[v]++] = f;
  }

  // Vertex -> neighbor vertices (sorted within each bucket).
  v2v_offsets_.assign(vertices_.size() + 1, 0);
  for (const auto& e : edge_vertices_) {
    ++v2v_offsets_[e[0] + 1];
    ++v2v_offsets_[e[1] + 1];
  }
  for (std::size_t v = 0; v < vertices_.size(); ++v) v2v_offsets_[v + 1] += v2v_offsets_[v];
  v2v_.resize(edge_vertices_.size() * 2);
  {
    std::vector<std::size_t> cursor(v2v_offsets_.begin(), v2v_offsets_.end() - 1);
    for (const auto& e : edge_vertices_) {
      v2v_[cursor[e[0]]++] = e[1];
      v2v_[cursor[e[1]]++] = e[0];
    }
  }
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    std::sort(v2v_.begin() + v2v_offsets_[v], v2v_.begin() + v2v_offsets_[v + 1]);
}

}  // namespace difftopo

#pragma once

// Level set extraction on the piecewise linear interpolant: marching
// triangles with watertight chaining across edges. Vertex values equal to
// the level are symbolically perturbed so every crossing is transversal.

#include <span>
#include <unordered_map>
#include <vector>

#include "difftopo/mesh.hpp"
#include "difftopo/surface_loop.hpp"

namespace difftopo {

namespace isoline_detail {

inline double signed_value(double value, double level) {
  double s = value - level;
  if (s == 0.0) s = 1e-12 * (1.0 + std::abs(level));
  return s;
}

struct Crossing {
  LoopPoint point;
  Index faces[2];
};

// One crossing per edge whose endpoint values straddle the level.
inline std::unordered_map<Index, Crossing> edge_crossings(const TriangleMesh& mesh,
                                                          std::span<const double> values,
                                                          double level) {
  std::unordered_map<Index, Crossing> crossings;
  for (Index e = 0; e < mesh.edge_count(); ++e) {
    const auto& ev = mesh.edge_vertices(e);
    double sa = signed_value(values[ev[0]], level);
    double sb = signed_value(values[ev[1]], level);
    if (sa * sb >= 0) continue;
    double t = sa / (sa - sb);
    Crossing c;
    c.point.edge = e;
    c.point.edge_t = t;
    c.point.position = lerp(mesh.position(ev[0]), mesh.position(ev[1]), t);
    c.faces[0] = mesh.edge_faces(e)[0];
    c.faces[1] = mesh.edge_faces(e)[1];
    crossings.emplace(e, c);
  }
  return crossings;
}

}  // namespace isoline_detail

// Closed polylines where the interpolated field equals `level`. Values must
// cover every vertex; levels outside the value range yield an empty list.
inline std::vector<SurfaceLoop> extract_isoline(std::span<const double> values, double level,
                                                const TriangleMesh& mesh) {
  if (values.size() != mesh.vertex_count())
    throw DimensionMismatch("isoline values must cover every vertex");

  auto crossings = isoline_detail::edge_crossings(mesh, values, level);

  // Face -> its two crossed edges. On a closed mesh every crossed face has
  // exactly two after perturbation.
  std::unordered_map<Index, std::array<Index, 2>> face_edges;
  for (const auto& [e, c] : crossings) {
    for (Index f : c.faces) {
      auto [it, inserted] = face_edges.try_emplace(f, std::array<Index, 2>{e, kInvalidIndex});
      if (!inserted) it->second[1] = e;
    }
  }

  std::vector<Index> seeds;
  seeds.reserve(crossings.size());
  for (const auto& [e, c] : crossings) seeds.push_back(e);
  std::sort(seeds.begin(), seeds.end());

  std::vector<SurfaceLoop> loops;
  std::unordered_map<Index, bool> visited;
  for (Index seed_edge : seeds) {
    if (visited[seed_edge]) continue;
    SurfaceLoop loop;
    loop.closed = true;
    Index edge = seed_edge;
    Index face = crossings.at(seed_edge).faces[0];
    while (true) {
      visited[edge] = true;
      LoopPoint p = crossings.at(edge).point;
      p.face = face;  // face shared with the next point
      loop.points.push_back(p);
      const auto& fe = face_edges.at(face);
      Index next_edge = fe[0] == edge ? fe[1] : fe[0];
      Index next_face = mesh.opposite_face(next_edge, face);
      edge = next_edge;
      face = next_face;
      if (edge == seed_edge) break;
    }
    LoopPoint first = loop.points.front();
    first.face = loop.points.back().face;  // unused; keeps the repeat anchored
    loop.points.push_back(first);
    loops.push_back(std::move(loop));
  }
  return loops;
}

// Total isoline length restricted to a face set, without chaining. Used for
// narrow-band front lengths.
inline double isoline_length_in_faces(std::span<const double> values, double level,
                                      const TriangleMesh& mesh, std::span<const Index> faces) {
  double total = 0;
  for (Index f : faces) {
    Vec3 pts[3];
    int count = 0;
    const auto& t = mesh.face(f);
    for (int k = 0; k < 3 && count < 3; ++k) {
      Index a = t[k], b = t[(k + 1) % 3];
      double sa = isoline_detail::signed_value(values[a], level);
      double sb = isoline_detail::signed_value(values[b], level);
      if (sa * sb >= 0) continue;
      double tt = sa / (sa - sb);
      pts[count++] = lerp(mesh.position(a), mesh.position(b), tt);
    }
    if (count == 2) total += distance(pts[0], pts[1]);
  }
  return total;
}

}  // namespace difftopo

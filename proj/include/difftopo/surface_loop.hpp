#pragma once

// Polylines embedded on the mesh: closed surface loops (handle / tunnel
// candidates) and open traces. Every point carries an anchor on a mesh
// element so exports and invariant checks can reconstruct it exactly.

#include <cmath>
#include <string>
#include <vector>

#include "difftopo/mesh.hpp"

namespace difftopo {

enum class LoopKind { Unclassified, Handle, Tunnel };

inline const char* to_string(LoopKind k) {
  switch (k) {
    case LoopKind::Handle: return "handle";
    case LoopKind::Tunnel: return "tunnel";
    default: return "unclassified";
  }
}

struct LoopPoint {
  Vec3 position;
  // Face shared with the next point along the polyline.
  Index face = kInvalidIndex;
  // Exactly one anchor is set: an edge (with parameter t from endpoint 0 to
  // endpoint 1 of edge_vertices) or a mesh vertex.
  Index edge = kInvalidIndex;
  double edge_t = 0.0;
  Index vertex = kInvalidIndex;
};

inline Vec3 anchor_position(const TriangleMesh& mesh, const LoopPoint& p) {
  if (p.vertex != kInvalidIndex) return mesh.position(p.vertex);
  if (p.edge != kInvalidIndex) {
    const auto& e = mesh.edge_vertices(p.edge);
    return lerp(mesh.position(e[0]), mesh.position(e[1]), p.edge_t);
  }
  return p.position;
}

struct SurfaceLoop {
  std::vector<LoopPoint> points;  // closed loops repeat the first point last
  bool closed = true;
  LoopKind kind = LoopKind::Unclassified;
  int pair_id = -1;

  double length() const {
    double total = 0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
      total += distance(points[i].position, points[i + 1].position);
    return total;
  }

  Vec3 centroid() const {
    // Length-weighted midpoint average; robust against uneven sampling.
    Vec3 c{};
    double total = 0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      double len = distance(points[i].position, points[i + 1].position);
      c += (points[i].position + points[i + 1].position) * (0.5 * len);
      total += len;
    }
    if (total <= 0) return points.empty() ? Vec3{} : points.front().position;
    return c / total;
  }
};

namespace loop_detail {

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double denom = squared_norm(ab);
  double t = denom > 0 ? std::clamp(dot(p - a, ab) / denom, 0.0, 1.0) : 0.0;
  return distance(p, a + ab * t);
}

inline double directed_hausdorff(const SurfaceLoop& from, const SurfaceLoop& to) {
  double worst = 0;
  for (const auto& p : from.points) {
    double best = 1e300;
    for (std::size_t i = 0; i + 1 < to.points.size(); ++i)
      best = std::min(best,
                      point_segment_distance(p.position, to.points[i].position,
                                             to.points[i + 1].position));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace loop_detail

inline double loop_hausdorff_distance(const SurfaceLoop& a, const SurfaceLoop& b) {
  return std::max(loop_detail::directed_hausdorff(a, b), loop_detail::directed_hausdorff(b, a));
}

// Mean edge length over the faces the loop traverses; used as the offset
// scale for classification.
inline double mean_incident_edge_length(const TriangleMesh& mesh, const SurfaceLoop& loop) {
  double total = 0;
  std::size_t count = 0;
  for (const auto& p : loop.points) {
    if (p.face == kInvalidIndex) continue;
    for (Index e : mesh.face_edges(p.face)) {
      total += mesh.edge_length(e);
      ++count;
    }
  }
  return count ? total / count : mesh.mean_edge_length();
}

}  // namespace difftopo

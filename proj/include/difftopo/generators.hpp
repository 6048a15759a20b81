#pragma once

// Synthetic test meshes on uniform parametric grids, chosen so analytic loop
// lengths are available as oracles: tori, icospheres, genus-g plates with
// rectangular through-holes, genus-0 limb stars, and a flat "coin" disk.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <unordered_map>
#include <vector>

#include "difftopo/mesh.hpp"

namespace difftopo {

inline constexpr double kPi = 3.14159265358979323846;

// Standard torus: major radius R, tube radius r. Shortest handle
// circumference is 2 pi r; the inner equator has circumference 2 pi (R - r).
inline TriangleMesh generate_torus(int major_segments, int minor_segments, double R, double r) {
  if (major_segments < 3 || minor_segments < 3)
    throw InvalidParameter("torus needs at least 3 segments in each direction");
  if (!(R > r) || !(r > 0)) throw InvalidParameter("torus needs R > r > 0");

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(major_segments) * minor_segments);
  for (int i = 0; i < major_segments; ++i) {
    double theta = 2.0 * kPi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      double psi = 2.0 * kPi * j / minor_segments;
      double rad = R + r * std::cos(psi);
      vertices.push_back({rad * std::cos(theta), rad * std::sin(theta), r * std::sin(psi)});
    }
  }
  std::vector<std::array<Index, 3>> faces;
  faces.reserve(static_cast<std::size_t>(major_segments) * minor_segments * 2);
  auto vid = [&](int i, int j) {
    return static_cast<Index>((i % major_segments) * minor_segments + (j % minor_segments));
  };
  for (int i = 0; i < major_segments; ++i)
    for (int j = 0; j < minor_segments; ++j) {
      Index a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      faces.push_back({a, b, c});
      faces.push_back({a, c, d});
    }
  return TriangleMesh(std::move(vertices), std::move(faces));
}

inline TriangleMesh generate_icosphere(int subdivisions, double radius = 1.0) {
  if (subdivisions < 0 || radius <= 0) throw InvalidParameter("bad icosphere parameters");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> vertices = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<Index, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::unordered_map<std::uint64_t, Index> midpoint;
    auto mid = [&](Index a, Index b) {
      std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Index id = static_cast<Index>(vertices.size());
      vertices.push_back((vertices[a] + vertices[b]) * 0.5);
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<Index, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& t : faces) {
      Index ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  for (Vec3& p : vertices) p = normalized(p) * radius;
  return TriangleMesh(std::move(vertices), std::move(faces));
}

namespace gen_detail {

// Boundary surface of a voxel solid, with each exposed cell face split into
// subdiv x subdiv quads (two triangles each). Cell coordinates may be
// negative; `solid` decides occupancy.
inline TriangleMesh voxel_surface(int lo[3], int hi[3],
                                  const std::function<bool(int, int, int)>& solid,
                                  int subdiv, double cell_size) {
  std::vector<Vec3> vertices;
  std::unordered_map<std::uint64_t, Index> vertex_ids;
  const double step = cell_size / subdiv;
  auto key_of = [&](long ix, long iy, long iz) {
    const std::uint64_t bias = 1u << 20;
    return ((static_cast<std::uint64_t>(ix + bias) << 42) |
            (static_cast<std::uint64_t>(iy + bias) << 21) |
            static_cast<std::uint64_t>(iz + bias));
  };
  auto vertex_at = [&](long ix, long iy, long iz) {
    auto [it, inserted] = vertex_ids.try_emplace(key_of(ix, iy, iz),
                                                 static_cast<Index>(vertices.size()));
    if (inserted) vertices.push_back({ix * step, iy * step, iz * step});
    return it->second;
  };

  std::vector<std::array<Index, 3>> faces;
  auto emit_face = [&](long ox, long oy, long oz, int axis_u[3], int axis_v[3]) {
    for (int a = 0; a < subdiv; ++a)
      for (int b = 0; b < subdiv; ++b) {
        auto corner = [&](int da, int db) {
          return vertex_at(ox + (a + da) * axis_u[0] + (b + db) * axis_v[0],
                           oy + (a + da) * axis_u[1] + (b + db) * axis_v[1],
                           oz + (a + da) * axis_u[2] + (b + db) * axis_v[2]);
        };
        Index p00 = corner(0, 0), p10 = corner(1, 0), p11 = corner(1, 1), p01 = corner(0, 1);
        faces.push_back({p00, p10, p11});
        faces.push_back({p00, p11, p01});
      }
  };

  static const int dirs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int cx = lo[0]; cx < hi[0]; ++cx)
    for (int cy = lo[1]; cy < hi[1]; ++cy)
      for (int cz = lo[2]; cz < hi[2]; ++cz) {
        if (!solid(cx, cy, cz)) continue;
        for (const auto& d : dirs) {
          if (solid(cx + d[0], cy + d[1], cz + d[2])) continue;
          // Plane of the exposed face, in sub-lattice units.
          long ox = (cx + (d[0] > 0 ? 1 : 0)) * static_cast<long>(subdiv);
          long oy = (cy + (d[1] > 0 ? 1 : 0)) * static_cast<long>(subdiv);
          long oz = (cz + (d[2] > 0 ? 1 : 0)) * static_cast<long>(subdiv);
          if (d[0] == 0) ox = cx * static_cast<long>(subdiv);
          if (d[1] == 0) oy = cy * static_cast<long>(subdiv);
          if (d[2] == 0) oz = cz * static_cast<long>(subdiv);
          int u[3] = {0, 0, 0}, v[3] = {0, 0, 0};
          if (d[0] != 0) { u[1] = 1; v[2] = 1; }
          else if (d[1] != 0) { u[0] = 1; v[2] = 1; }
          else { u[0] = 1; v[1] = 1; }
          emit_face(ox, oy, oz, u, v);
        }
      }
  return TriangleMesh(std::move(vertices), std::move(faces));
}

}  // namespace gen_detail

// Closed genus-g surface. Genus 0 is an icosphere; g >= 1 is the boundary of
// a slab with g square through-holes. `resolution` subdivides each lattice
// cell face into resolution^2 quads.
inline TriangleMesh generate_genus_g(int genus, int resolution = 3) {
  if (genus < 0) throw InvalidParameter("genus must be non-negative");
  if (resolution < 1) throw InvalidParameter("resolution must be positive");
  if (genus == 0) return generate_icosphere(std::min(resolution + 1, 6), 2.0);

  const int hole = 2, gap = 2, depth = 1;
  const int cols = genus * hole + (genus + 1) * gap;
  const int rows = hole + 2 * gap;
  auto solid = [=](int x, int y, int z) {
    if (x < 0 || x >= cols || y < 0 || y >= rows || z < 0 || z >= depth) return false;
    if (y >= gap && y < gap + hole) {
      int rel = x - gap;
      int pitch = hole + gap;
      if (rel >= 0 && rel % pitch < hole && rel / pitch < genus) return false;
    }
    return true;
  };
  int lo[3] = {0, 0, 0}, hi[3] = {cols, rows, depth};
  return gen_detail::voxel_surface(lo, hi, solid, resolution, 1.0);
}

// Genus-0 solid with `limbs` square tubes radiating from a central block
// (order: +x, -x, +y, -y, +z, -z). A diffusion front started at a limb tip
// branches once per junction exit.
inline TriangleMesh generate_limb_star(int limbs, int resolution = 3, int limb_length = 4) {
  if (limbs < 1 || limbs > 6) throw InvalidParameter("limb count must be in 1..6");
  if (limb_length < 1) throw InvalidParameter("limb length must be positive");
  if (resolution < 1) throw InvalidParameter("resolution must be positive");
  const int L = limb_length;
  auto in_arm = [&](int along, int s, int t) {
    return (along >= 1 && along <= L) && (s == -1 || s == 0) && (t == -1 || t == 0);
  };
  auto solid = [=](int x, int y, int z) {
    bool center = (x == -1 || x == 0) && (y == -1 || y == 0) && (z == -1 || z == 0);
    if (center) return true;
    if (limbs > 0 && in_arm(x, y, z)) return true;
    if (limbs > 1 && in_arm(-x - 1, y, z)) return true;
    if (limbs > 2 && in_arm(y, x, z)) return true;
    if (limbs > 3 && in_arm(-y - 1, x, z)) return true;
    if (limbs > 4 && in_arm(z, x, y)) return true;
    if (limbs > 5 && in_arm(-z - 1, x, y)) return true;
    return false;
  };
  int lo[3] = {-L - 2, -L - 2, -L - 2}, hi[3] = {L + 2, L + 2, L + 2};
  return gen_detail::voxel_surface(lo, hi, solid, resolution, 1.0);
}

// Flat closed disk ("coin"): two parallel triangulated disks joined by a rim.
// Scalar fields on the top face have analytic circular isolines.
inline TriangleMesh generate_coin(int rings, int sectors, double radius, double thickness) {
  if (rings < 1 || sectors < 3 || radius <= 0 || thickness <= 0)
    throw InvalidParameter("bad coin parameters");
  std::vector<Vec3> vertices;
  std::vector<std::array<Index, 3>> faces;

  auto build_disk = [&](double z) {
    Index center = static_cast<Index>(vertices.size());
    vertices.push_back({0, 0, z});
    std::vector<std::vector<Index>> ring_ids(rings);
    for (int i = 1; i <= rings; ++i) {
      double rad = radius * i / rings;
      for (int j = 0; j < sectors; ++j) {
        double ang = 2.0 * kPi * j / sectors;
        ring_ids[i - 1].push_back(static_cast<Index>(vertices.size()));
        vertices.push_back({rad * std::cos(ang), rad * std::sin(ang), z});
      }
    }
    for (int j = 0; j < sectors; ++j)
      faces.push_back({center, ring_ids[0][j], ring_ids[0][(j + 1) % sectors]});
    for (int i = 1; i < rings; ++i)
      for (int j = 0; j < sectors; ++j) {
        Index a = ring_ids[i - 1][j], b = ring_ids[i - 1][(j + 1) % sectors];
        Index c = ring_ids[i][j], d = ring_ids[i][(j + 1) % sectors];
        faces.push_back({a, c, d});
        faces.push_back({a, d, b});
      }
    return ring_ids.back();
  };

  std::vector<Index> top_rim = build_disk(thickness / 2);
  std::vector<Index> bottom_rim = build_disk(-thickness / 2);
  for (int j = 0; j < sectors; ++j) {
    Index a = top_rim[j], b = top_rim[(j + 1) % sectors];
    Index c = bottom_rim[j], d = bottom_rim[(j + 1) % sectors];
    faces.push_back({a, c, d});
    faces.push_back({a, d, b});
  }
  return TriangleMesh(std::move(vertices), std::move(faces));
}

// Random vertex displacement (uniform in a cube of half-width `amplitude`),
// preserving connectivity. Amplitude should stay well under half the local
// edge length to avoid degenerate faces.
inline TriangleMesh perturb_vertices(const TriangleMesh& mesh, double amplitude,
                                     unsigned rng_seed) {
  std::mt19937 rng(rng_seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  std::vector<Vec3> vertices = mesh.vertices();
  for (Vec3& p : vertices) p += Vec3{dist(rng), dist(rng), dist(rng)};
  return TriangleMesh(std::move(vertices), mesh.faces());
}

// Torus with non-uniformly clustered major spacing plus optional jitter;
// genus is unchanged, triangle quality and sampling become irregular.
inline TriangleMesh generate_torus_irregular(int major_segments, int minor_segments, double R,
                                             double r, double warp, double jitter,
                                             unsigned rng_seed) {
  if (major_segments < 3 || minor_segments < 3)
    throw InvalidParameter("torus needs at least 3 segments in each direction");
  if (!(R > r) || !(r > 0)) throw InvalidParameter("torus needs R > r > 0");
  if (warp < 0 || warp > 0.45) throw InvalidParameter("warp must be in [0, 0.45]");

  std::vector<Vec3> vertices;
  for (int i = 0; i < major_segments; ++i) {
    double u = static_cast<double>(i) / major_segments;
    double theta = 2.0 * kPi * (u + warp / (2.0 * kPi) * std::sin(2.0 * kPi * u));
    for (int j = 0; j < minor_segments; ++j) {
      double psi = 2.0 * kPi * j / minor_segments;
      double rad = R + r * std::cos(psi);
      vertices.push_back({rad * std::cos(theta), rad * std::sin(theta), r * std::sin(psi)});
    }
  }
  std::vector<std::array<Index, 3>> faces;
  auto vid = [&](int i, int j) {
    return static_cast<Index>((i % major_segments) * minor_segments + (j % minor_segments));
  };
  for (int i = 0; i < major_segments; ++i)
    for (int j = 0; j < minor_segments; ++j) {
      faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  TriangleMesh mesh(std::move(vertices), std::move(faces));
  if (jitter > 0) mesh = perturb_vertices(mesh, jitter, rng_seed);
  return mesh;
}

}  // namespace difftopo

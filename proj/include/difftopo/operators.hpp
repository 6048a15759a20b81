#pragma once

// Discrete differential operators: the cotangent finite element Laplacian
// with barycentric lumped masses, and per-face P1 gradients used for
// streamline tracing. Negative cotangent weights on obtuse triangles are
// kept; stability is handled by the time step bound instead.

#include <cmath>
#include <vector>

#include "difftopo/mesh.hpp"
#include "difftopo/sparse.hpp"

namespace difftopo {

struct LaplacianOperator {
  // Symmetric stiffness: off-diagonal (i,j) holds 1/2 (cot a + cot b) for the
  // two angles opposite edge (i,j); diagonal is minus the row sum, so
  // stiffness * ones == 0 and M^-1 * stiffness approximates the Laplacian.
  SparseMatrix stiffness;
  std::vector<double> vertex_mass;  // lumped: one third of incident face areas
  double gershgorin_bound = 0;      // max row sum of |M^-1 stiffness|

  Index vertex_count() const { return stiffness.rows; }

  // y = M^-1 S x  (dense apply)
  void apply(std::span<const double> x, std::span<double> y) const {
    stiffness.spmv(x, y);
    for (Index v = 0; v < stiffness.rows; ++v) y[v] /= vertex_mass[v];
  }
};

inline LaplacianOperator assemble_laplacian(const TriangleMesh& mesh) {
  const Index n = mesh.vertex_count();
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(mesh.face_count() * 12);
  std::vector<double> mass(n, 0.0);

  for (Index f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.face(f);
    double area = mesh.face_area(f);
    for (int k = 0; k < 3; ++k) mass[t[k]] += area / 3.0;
    for (int k = 0; k < 3; ++k) {
      Index a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
      Vec3 ca = mesh.position(a) - mesh.position(c);
      Vec3 cb = mesh.position(b) - mesh.position(c);
      double cot = dot(ca, cb) / norm(cross(ca, cb));
      if (!std::isfinite(cot))
        throw DegeneracyError("non-finite cotangent weight on face " + std::to_string(f));
      double w = 0.5 * cot;
      trips.push_back({a, b, w});
      trips.push_back({b, a, w});
      trips.push_back({a, a, -w});
      trips.push_back({b, b, -w});
    }
  }

  LaplacianOperator op;
  op.stiffness = SparseMatrix::from_triplets(n, n, std::move(trips));
  op.vertex_mass = std::move(mass);

  double bound = 0;
  for (Index v = 0; v < n; ++v) {
    double row = 0;
    for (double w : op.stiffness.row_values(v)) row += std::abs(w);
    bound = std::max(bound, row / op.vertex_mass[v]);
  }
  op.gershgorin_bound = bound;
  return op;
}

// Applies the mass-normalized Laplacian to every row of a sparse field
// matrix. Row i of the result is the Laplacian of field i; its sparsity is
// the one-ring dilation of the input row's support.
inline SparseMatrix apply_laplacian(const LaplacianOperator& op, const SparseMatrix& fields) {
  if (fields.cols != op.vertex_count())
    throw DimensionMismatch("field columns do not match operator size");

  std::vector<SparseMatrix::Triplet> trips;
  std::vector<double> acc(op.vertex_count(), 0.0);
  std::vector<Index> touched;
  for (Index r = 0; r < fields.rows; ++r) {
    touched.clear();
    auto cols_r = fields.row_columns(r);
    auto vals_r = fields.row_values(r);
    for (std::size_t k = 0; k < cols_r.size(); ++k) {
      Index u = cols_r[k];
      double fu = vals_r[k];
      auto scols = op.stiffness.row_columns(u);
      auto svals = op.stiffness.row_values(u);
      for (std::size_t m = 0; m < scols.size(); ++m) {
        if (acc[scols[m]] == 0.0) touched.push_back(scols[m]);
        acc[scols[m]] += svals[m] * fu;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (Index v : touched) {
      if (acc[v] != 0.0) trips.push_back({r, v, acc[v] / op.vertex_mass[v]});
      acc[v] = 0.0;
    }
  }
  return SparseMatrix::from_triplets(fields.rows, fields.cols, std::move(trips));
}

struct GradientOperator {
  // grad(u)|_f = sum_k u[face[f][k]] * coeff[f][k]; each coefficient lies in
  // the face plane, and the three sum to zero.
  std::vector<std::array<Vec3, 3>> coeff;
};

inline GradientOperator assemble_gradients(const TriangleMesh& mesh) {
  GradientOperator g;
  g.coeff.resize(mesh.face_count());
  for (Index f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.face(f);
    Vec3 n = cross(mesh.position(t[1]) - mesh.position(t[0]),
                   mesh.position(t[2]) - mesh.position(t[0]));
    double double_area = norm(n);
    n = n / double_area;
    for (int k = 0; k < 3; ++k) {
      // Edge opposite vertex k, rotated into the face plane.
      Vec3 opposite = mesh.position(t[(k + 2) % 3]) - mesh.position(t[(k + 1) % 3]);
      g.coeff[f][k] = cross(n, opposite) / double_area;
    }
  }
  return g;
}

inline Vec3 face_gradient(const GradientOperator& g, const TriangleMesh& mesh,
                          std::span<const double> field, Index f) {
  if (field.size() != mesh.vertex_count()) throw DimensionMismatch("field size mismatch");
  const auto& t = mesh.face(f);
  return field[t[0]] * g.coeff[f][0] + field[t[1]] * g.coeff[f][1] + field[t[2]] * g.coeff[f][2];
}

inline Vec3 face_gradient_values(const GradientOperator& g, Index f, double u0, double u1,
                                 double u2) {
  return u0 * g.coeff[f][0] + u1 * g.coeff[f][1] + u2 * g.coeff[f][2];
}

}  // namespace difftopo

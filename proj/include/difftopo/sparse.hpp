#pragma once

// Compressed sparse row matrix with strictly increasing column indices per
// row. Used for the assembled operators and for snapshots of the layer field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "difftopo/errors.hpp"
#include "difftopo/mesh.hpp"

namespace difftopo {

struct SparseMatrix {
  struct Triplet {
    Index row, col;
    double value;
  };

  Index rows = 0, cols = 0;
  std::vector<std::size_t> row_offsets;  // rows + 1 entries
  std::vector<Index> col_indices;
  std::vector<double> values;

  // Duplicate triplets are summed; entries with |value| <= drop_tolerance
  // are discarded.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets,
                                    double drop_tolerance = 0.0) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_offsets.assign(rows + 1, 0);
    std::size_t i = 0;
    while (i < triplets.size()) {
      std::size_t j = i;
      double sum = 0;
      while (j < triplets.size() && triplets[j].row == triplets[i].row &&
             triplets[j].col == triplets[i].col)
        sum += triplets[j++].value;
      if (triplets[i].row >= rows || triplets[i].col >= cols)
        throw DimensionMismatch("triplet outside matrix bounds");
      if (std::abs(sum) > drop_tolerance) {
        m.col_indices.push_back(triplets[i].col);
        m.values.push_back(sum);
        ++m.row_offsets[triplets[i].row + 1];
      }
      i = j;
    }
    for (Index r = 0; r < rows; ++r) m.row_offsets[r + 1] += m.row_offsets[r];
    return m;
  }

  std::size_t nnz() const { return values.size(); }

  std::span<const Index> row_columns(Index r) const {
    return {col_indices.data() + row_offsets[r], row_offsets[r + 1] - row_offsets[r]};
  }
  std::span<const double> row_values(Index r) const {
    return {values.data() + row_offsets[r], row_offsets[r + 1] - row_offsets[r]};
  }

  double at(Index r, Index c) const {
    auto cols_r = row_columns(r);
    auto it = std::lower_bound(cols_r.begin(), cols_r.end(), c);
    if (it == cols_r.end() || *it != c) return 0.0;
    return values[row_offsets[r] + static_cast<std::size_t>(it - cols_r.begin())];
  }

  // y = A x
  void spmv(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols || y.size() != rows) throw DimensionMismatch("spmv size mismatch");
    for (Index r = 0; r < rows; ++r) {
      double acc = 0;
      for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
        acc += values[k] * x[col_indices[k]];
      y[r] = acc;
    }
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> d(rows, std::vector<double>(cols, 0.0));
    for (Index r = 0; r < rows; ++r)
      for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
        d[r][col_indices[k]] = values[k];
    return d;
  }

  // Debug dump in Matrix Market coordinate format.
  void write_matrix_market(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << rows << " " << cols << " " << nnz() << "\n";
    for (Index r = 0; r < rows; ++r)
      for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
        out << r + 1 << " " << col_indices[k] + 1 << " " << values[k] << "\n";
  }
};

}  // namespace difftopo

#pragma once

#include "kpc/types.hpp"

#include <vector>

namespace kpc {

// Compressed sparse rows.  Column indices are strictly ascending within each
// row; the pattern is fixed after construction (values may be updated).
template <class T>
struct SparseCSR {
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> row_offsets;  // size rows+1, monotone
  std::vector<Index> col_indices;  // size nnz
  std::vector<T> values;           // size nnz

  Index nnz() const { return static_cast<Index>(values.size()); }

  static SparseCSR from_dense(const Mat<T>& W) {
    SparseCSR s;
    s.rows = W.rows();
    s.cols = W.cols();
    s.row_offsets.reserve(W.rows() + 1);
    s.row_offsets.push_back(0);
    for (Index i = 0; i < W.rows(); ++i) {
      for (Index j = 0; j < W.cols(); ++j) {
        if (W(i, j) != T(0)) {
          s.col_indices.push_back(j);
          s.values.push_back(W(i, j));
        }
      }
      s.row_offsets.push_back(static_cast<Index>(s.col_indices.size()));
    }
    return s;
  }

  Mat<T> materialize() const {
    Mat<T> W = Mat<T>::Zero(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        W(i, col_indices[k]) += values[k];
    return W;
  }

  Vec<T> apply(const Eigen::Ref<const Vec<T>>& x) const {
    if (x.size() != cols)
      throw ShapeError("SparseCSR::apply: x length " + std::to_string(x.size()) +
                       " != " + std::to_string(cols) + " columns");
    Vec<T> y = Vec<T>::Zero(rows);
    for (Index i = 0; i < rows; ++i) {
      T acc = T(0);
      for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        acc += values[k] * x[col_indices[k]];
      y[i] = acc;
    }
    return y;
  }

  Vec<T> apply_transpose(const Eigen::Ref<const Vec<T>>& g) const {
    if (g.size() != rows)
      throw ShapeError("SparseCSR::apply_transpose: g length mismatch");
    Vec<T> y = Vec<T>::Zero(cols);
    for (Index i = 0; i < rows; ++i)
      for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        y[col_indices[k]] += values[k] * g[i];
    return y;
  }

  void validate() const {
    if (static_cast<Index>(row_offsets.size()) != rows + 1)
      throw ShapeError("SparseCSR: row_offsets size mismatch");
    if (row_offsets.front() != 0 || row_offsets.back() != nnz())
      throw ShapeError("SparseCSR: offset bounds mismatch");
    for (Index i = 0; i < rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1]) throw ShapeError("SparseCSR: offsets not monotone");
      for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        if (col_indices[k] < 0 || col_indices[k] >= cols)
          throw ShapeError("SparseCSR: column index out of range");
        if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1])
          throw ShapeError("SparseCSR: column indices not strictly ascending");
      }
    }
  }
};

using SparseCSRd = SparseCSR<double>;
using SparseCSRf = SparseCSR<float>;

}  // namespace kpc

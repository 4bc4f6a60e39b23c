#pragma once

// Kronecker-product algebra.  A pair (B, C) represents A = B (x) C with
//   A[i1*m2 + i2, j1*n2 + j2] = B(i1, j1) * C(i2, j2)
// where B is m1 x n1 and C is m2 x n2.  A chain [F1, ..., Fk] represents the
// right fold F1 (x) (F2 (x) (... (x) Fk)).

#include "kpc/types.hpp"

#include <cstdint>
#include <vector>

namespace kpc {

template <class T>
struct KroneckerPair {
  Mat<T> B;  // left factor,  m1 x n1
  Mat<T> C;  // right factor, m2 x n2

  Index rows() const { return checked_dim_product(B.rows(), C.rows(), "KroneckerPair::rows"); }
  Index cols() const { return checked_dim_product(B.cols(), C.cols(), "KroneckerPair::cols"); }
};

template <class T>
struct KroneckerChain {
  std::vector<Mat<T>> factors;

  Index rows() const {
    Index r = 1;
    for (const auto& f : factors) r = checked_dim_product(r, f.rows(), "KroneckerChain::rows");
    return r;
  }
  Index cols() const {
    Index c = 1;
    for (const auto& f : factors) c = checked_dim_product(c, f.cols(), "KroneckerChain::cols");
    return c;
  }
};

using KroneckerPaird = KroneckerPair<double>;
using KroneckerChaind = KroneckerChain<double>;

namespace detail {

// Writes B (x) C into A, which must already have shape (B.rows*C.rows, B.cols*C.cols).
// One streaming pass over the row-major output: every output row is the
// Kronecker product of a B row with a C row, written left to right, so the
// cost per element does not depend on how the area splits into blocks.
template <class T, class Src, class Dst>
void kp_expand_blocks(const Mat<T>& B, const Src& C, Dst& A) {
  const Index m2 = C.rows(), n2 = C.cols();
  for (Index i1 = 0; i1 < B.rows(); ++i1)
    for (Index i2 = 0; i2 < m2; ++i2) {
      auto out = A.row(i1 * m2 + i2);
      for (Index j1 = 0; j1 < B.cols(); ++j1)
        out.segment(j1 * n2, n2) = B(i1, j1) * C.row(i2);
    }
}

}  // namespace detail

template <class T>
Mat<T> kp_expand(const Mat<T>& B, const Mat<T>& C) {
  const Index m1 = B.rows(), n1 = B.cols(), m2 = C.rows(), n2 = C.cols();
  if (m1 == 0 || n1 == 0 || m2 == 0 || n2 == 0)
    throw ShapeError("kp_expand: factors must be nonempty");
  Mat<T> A(checked_dim_product(m1, m2, "kp_expand"), checked_dim_product(n1, n2, "kp_expand"));
  detail::kp_expand_blocks(B, C, A);
  return A;
}

template <class T>
Mat<T> kp_expand(const KroneckerPair<T>& p) {
  return kp_expand<T>(p.B, p.C);
}

template <class T>
Mat<T> kp_expand_chain(const KroneckerChain<T>& chain) {
  if (chain.factors.empty()) throw ShapeError("kp_expand_chain: empty chain");
  Mat<T> acc = chain.factors.back();
  for (Index i = static_cast<Index>(chain.factors.size()) - 2; i >= 0; --i)
    acc = kp_expand<T>(chain.factors[i], acc);
  return acc;
}

// y = (B (x) C) x without forming the product matrix: reshape x column-wise
// into X (n2 x n1), compute Y = C * X * B^T, read y out of Y column-wise.
template <class T>
Vec<T> kp_matvec(const KroneckerPair<T>& p, const Eigen::Ref<const Vec<T>>& x) {
  const Index m1 = p.B.rows(), n1 = p.B.cols(), m2 = p.C.rows(), n2 = p.C.cols();
  if (x.size() != checked_dim_product(n1, n2, "kp_matvec"))
    throw ShapeError("kp_matvec: x has length " + std::to_string(x.size()) +
                     ", operator has " + std::to_string(n1 * n2) + " columns");
  using CMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;  // column-major
  Eigen::Map<const CMat> X(x.data(), n2, n1);
  CMat Y = p.C * X * p.B.transpose();  // m2 x m1
  Vec<T> y(m1 * m2);
  Eigen::Map<CMat>(y.data(), m2, m1) = Y;
  return y;
}

// Deliberate slow path: expands the chain, then multiplies.  This is the
// code path whose cost the chain benchmarks measure.
template <class T>
Vec<T> kp_matvec_chain(const KroneckerChain<T>& chain, const Eigen::Ref<const Vec<T>>& x) {
  Mat<T> A = kp_expand_chain(chain);
  if (x.size() != A.cols())
    throw ShapeError("kp_matvec_chain: x has length " + std::to_string(x.size()) +
                     ", operator has " + std::to_string(A.cols()) + " columns");
  return A * x;
}

// Scratch for the workspace overload below.  Buffers only ever grow, so
// repeated calls through the same workspace stay allocation-free; timing
// loops then measure the expansion work rather than the allocator.
template <class T>
struct KpChainWorkspace {
  std::vector<T> ping, pong;
  Vec<T> y;
};

using KpChainWorkspaced = KpChainWorkspace<double>;

template <class T>
const Vec<T>& kp_matvec_chain(const KroneckerChain<T>& chain, const Eigen::Ref<const Vec<T>>& x,
                              KpChainWorkspace<T>& ws) {
  if (chain.factors.empty()) throw ShapeError("kp_matvec_chain: empty chain");
  if (x.size() != chain.cols())
    throw ShapeError("kp_matvec_chain: x has length " + std::to_string(x.size()) +
                     ", operator has " + std::to_string(chain.cols()) + " columns");
  const auto& fs = chain.factors;
  const Index k = static_cast<Index>(fs.size());
  auto ensure = [](std::vector<T>& v, Index n) {
    if (static_cast<Index>(v.size()) < n) v.resize(static_cast<std::size_t>(n));
  };
  Index rows = fs[k - 1].rows(), cols = fs[k - 1].cols();
  // start on whichever buffer puts the final expansion in ws.ping, so chains
  // of any depth read the matvec input from the same memory
  const bool odd_merges = (k - 1) % 2 == 1;
  std::vector<T>* cur = odd_merges ? &ws.pong : &ws.ping;
  std::vector<T>* nxt = odd_merges ? &ws.ping : &ws.pong;
  ensure(*cur, rows * cols);
  Eigen::Map<Mat<T>>(cur->data(), rows, cols) = fs[k - 1];
  for (Index i = k - 2; i >= 0; --i) {
    const Mat<T>& B = fs[i];
    const Index nr = checked_dim_product(B.rows(), rows, "kp_matvec_chain");
    const Index nc = checked_dim_product(B.cols(), cols, "kp_matvec_chain");
    ensure(*nxt, nr * nc);
    Eigen::Map<const Mat<T>> acc(cur->data(), rows, cols);
    Eigen::Map<Mat<T>> merged(nxt->data(), nr, nc);
    detail::kp_expand_blocks(B, acc, merged);
    std::swap(cur, nxt);
    rows = nr;
    cols = nc;
  }
  Eigen::Map<const Mat<T>> A(cur->data(), rows, cols);
  ws.y.resize(rows);
  ws.y.noalias() = A * x;
  return ws.y;
}

template <class T>
struct KpMatvecGrads {
  Mat<T> grad_B;
  Mat<T> grad_C;
  Vec<T> grad_x;
};

// Reverse-mode of kp_matvec.  With G the column-stacked m2 x m1 reshape of
// g_y and X the n2 x n1 reshape of x:
//   dL/dB = G^T (C X),  dL/dC = G (X B^T)^T,  dL/dx = vec(C^T G B).
template <class T>
KpMatvecGrads<T> kp_matvec_grad(const Mat<T>& B, const Mat<T>& C,
                                const Eigen::Ref<const Vec<T>>& x,
                                const Eigen::Ref<const Vec<T>>& g_y) {
  const Index m1 = B.rows(), n1 = B.cols(), m2 = C.rows(), n2 = C.cols();
  if (x.size() != n1 * n2)
    throw ShapeError("kp_matvec_grad: x length " + std::to_string(x.size()) +
                     " != " + std::to_string(n1 * n2));
  if (g_y.size() != m1 * m2)
    throw ShapeError("kp_matvec_grad: g_y length " + std::to_string(g_y.size()) +
                     " != " + std::to_string(m1 * m2));
  using CMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::Map<const CMat> X(x.data(), n2, n1);
  Eigen::Map<const CMat> G(g_y.data(), m2, m1);
  KpMatvecGrads<T> g;
  g.grad_B = G.transpose() * (C * X);
  g.grad_C = G * (X * B.transpose()).transpose();
  CMat GX = C.transpose() * G * B;  // n2 x n1
  g.grad_x.resize(n1 * n2);
  Eigen::Map<CMat>(g.grad_x.data(), n2, n1) = GX;
  return g;
}

// Multiply-add counts for one matvec.
inline std::int64_t dense_matvec_flops(Index m, Index n) {
  return static_cast<std::int64_t>(m) * n;
}

// C*X costs m2*n2*n1, (C*X)*B^T costs m2*n1*m1.
inline std::int64_t kp_matvec_flops(Index m1, Index n1, Index m2, Index n2) {
  return static_cast<std::int64_t>(m2) * n2 * n1 + static_cast<std::int64_t>(m1) * n1 * m2;
}

// Expansion work for the chain slow path (entries written across the right
// fold) plus the final dense matvec.
inline std::int64_t kp_chain_expand_flops(const std::vector<std::pair<Index, Index>>& shapes) {
  std::int64_t total = 0;
  std::int64_t rows = 1, cols = 1;
  for (auto it = shapes.rbegin(); it != shapes.rend(); ++it) {
    rows *= it->first;
    cols *= it->second;
    if (it != shapes.rbegin()) total += rows * cols;
  }
  return total + rows * cols;  // + final matvec
}

}  // namespace kpc

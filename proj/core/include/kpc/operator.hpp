#pragma once

// LinearOperator: the uniform weight abstraction cells consume.  One of
// Dense | Kron | LowRank | Sparse, with a shared apply/materialize/backward
// surface so cell code never branches on the representation.

#include "kpc/kron.hpp"
#include "kpc/sparse.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace kpc {

struct LowRankPair {
  Matd U;  // m x r
  Matd V;  // r x n
  Index rows() const { return U.rows(); }
  Index cols() const { return V.cols(); }
  Index rank() const { return U.cols(); }
  Matd materialize() const { return U * V; }
};

class LinearOperator {
 public:
  enum class Kind { Dense, Kron, LowRank, Sparse };

  LinearOperator() : repr_(Matd()) {}

  static LinearOperator dense(Matd W) { return LinearOperator(std::move(W)); }
  static LinearOperator kron(Matd B, Matd C) {
    return LinearOperator(KroneckerPaird{std::move(B), std::move(C)});
  }
  static LinearOperator kron(KroneckerPaird pair) { return LinearOperator(std::move(pair)); }
  static LinearOperator low_rank(Matd U, Matd V) {
    if (U.cols() != V.rows()) throw ShapeError("LinearOperator::low_rank: inner dims differ");
    return LinearOperator(LowRankPair{std::move(U), std::move(V)});
  }
  static LinearOperator sparse(SparseCSRd A) {
    A.validate();
    return LinearOperator(std::move(A));
  }

  Kind kind() const { return static_cast<Kind>(repr_.index()); }
  Index rows() const;
  Index cols() const;

  Vecd apply(const Eigen::Ref<const Vecd>& x) const;
  Matd materialize() const;

  // weights stored by this representation (indices and structure excluded)
  std::int64_t parameter_count() const;

  // Accumulates dL/dparams into `grad` (same structure, e.g. zeros_like)
  // and returns dL/dx.
  Vecd apply_backward(const Eigen::Ref<const Vecd>& x, const Eigen::Ref<const Vecd>& g_y,
                      LinearOperator& grad) const;

  const Matd& dense_weight() const { return get<Matd>("dense"); }
  Matd& dense_weight() { return get<Matd>("dense"); }
  const KroneckerPaird& kron_pair() const { return get<KroneckerPaird>("kron"); }
  KroneckerPaird& kron_pair() { return get<KroneckerPaird>("kron"); }
  const LowRankPair& low_rank_pair() const { return get<LowRankPair>("lowrank"); }
  LowRankPair& low_rank_pair() { return get<LowRankPair>("lowrank"); }
  const SparseCSRd& sparse_matrix() const { return get<SparseCSRd>("sparse"); }
  SparseCSRd& sparse_matrix() { return get<SparseCSRd>("sparse"); }

  // Parameter tensors in a fixed order: f(name, data, size, rows, cols).
  template <class F>
  void for_each_tensor(F&& f) {
    switch (kind()) {
      case Kind::Dense: {
        Matd& W = dense_weight();
        f("w", W.data(), W.size(), W.rows(), W.cols());
        break;
      }
      case Kind::Kron: {
        KroneckerPaird& p = kron_pair();
        f("b", p.B.data(), p.B.size(), p.B.rows(), p.B.cols());
        f("c", p.C.data(), p.C.size(), p.C.rows(), p.C.cols());
        break;
      }
      case Kind::LowRank: {
        LowRankPair& lr = low_rank_pair();
        f("u", lr.U.data(), lr.U.size(), lr.U.rows(), lr.U.cols());
        f("v", lr.V.data(), lr.V.size(), lr.V.rows(), lr.V.cols());
        break;
      }
      case Kind::Sparse: {
        SparseCSRd& s = sparse_matrix();
        f("values", s.values.data(), static_cast<Index>(s.values.size()), Index(1),
          static_cast<Index>(s.values.size()));
        break;
      }
    }
  }

 private:
  template <class V>
  explicit LinearOperator(V v) : repr_(std::move(v)) {}

  template <class V>
  const V& get(const char* want) const {
    const V* p = std::get_if<V>(&repr_);
    if (!p) throw ShapeError(std::string("LinearOperator: not a ") + want + " operator");
    return *p;
  }
  template <class V>
  V& get(const char* want) {
    V* p = std::get_if<V>(&repr_);
    if (!p) throw ShapeError(std::string("LinearOperator: not a ") + want + " operator");
    return *p;
  }

  std::variant<Matd, KroneckerPaird, LowRankPair, SparseCSRd> repr_;
};

const char* operator_kind_name(LinearOperator::Kind k);

// Same structure and shapes, all weights zero; sparse keeps the pattern.
LinearOperator zeros_like(const LinearOperator& op);

}  // namespace kpc

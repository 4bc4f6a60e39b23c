#include "kpc/operator.hpp"

namespace kpc {

Index LinearOperator::rows() const {
  switch (kind()) {
    case Kind::Dense: return dense_weight().rows();
    case Kind::Kron: return kron_pair().rows();
    case Kind::LowRank: return low_rank_pair().rows();
    case Kind::Sparse: return sparse_matrix().rows;
  }
  return 0;
}

Index LinearOperator::cols() const {
  switch (kind()) {
    case Kind::Dense: return dense_weight().cols();
    case Kind::Kron: return kron_pair().cols();
    case Kind::LowRank: return low_rank_pair().cols();
    case Kind::Sparse: return sparse_matrix().cols;
  }
  return 0;
}

Vecd LinearOperator::apply(const Eigen::Ref<const Vecd>& x) const {
  if (x.size() != cols())
    throw ShapeError("LinearOperator::apply: x length " + std::to_string(x.size()) +
                     " != " + std::to_string(cols()) + " columns");
  switch (kind()) {
    case Kind::Dense: return dense_weight() * x;
    case Kind::Kron: return kp_matvec<double>(kron_pair(), x);
    case Kind::LowRank: {
      const LowRankPair& lr = low_rank_pair();
      return lr.U * (lr.V * x);
    }
    case Kind::Sparse: return sparse_matrix().apply(x);
  }
  throw ShapeError("LinearOperator::apply: empty operator");
}

Matd LinearOperator::materialize() const {
  switch (kind()) {
    case Kind::Dense: return dense_weight();
    case Kind::Kron: return kp_expand<double>(kron_pair());
    case Kind::LowRank: return low_rank_pair().materialize();
    case Kind::Sparse: return sparse_matrix().materialize();
  }
  throw ShapeError("LinearOperator::materialize: empty operator");
}

std::int64_t LinearOperator::parameter_count() const {
  switch (kind()) {
    case Kind::Dense: return dense_weight().size();
    case Kind::Kron: return kron_pair().B.size() + kron_pair().C.size();
    case Kind::LowRank: return low_rank_pair().U.size() + low_rank_pair().V.size();
    case Kind::Sparse: return sparse_matrix().nnz();
  }
  return 0;
}

Vecd LinearOperator::apply_backward(const Eigen::Ref<const Vecd>& x,
                                    const Eigen::Ref<const Vecd>& g_y,
                                    LinearOperator& grad) const {
  if (grad.kind() != kind() || grad.rows() != rows() || grad.cols() != cols())
    throw ShapeError("LinearOperator::apply_backward: gradient structure mismatch");
  if (x.size() != cols() || g_y.size() != rows())
    throw ShapeError("LinearOperator::apply_backward: vector length mismatch");
  switch (kind()) {
    case Kind::Dense: {
      grad.dense_weight().noalias() += g_y * x.transpose();
      return dense_weight().transpose() * g_y;
    }
    case Kind::Kron: {
      const KroneckerPaird& p = kron_pair();
      KpMatvecGrads<double> g = kp_matvec_grad<double>(p.B, p.C, x, g_y);
      grad.kron_pair().B += g.grad_B;
      grad.kron_pair().C += g.grad_C;
      return std::move(g.grad_x);
    }
    case Kind::LowRank: {
      const LowRankPair& lr = low_rank_pair();
      Vecd t = lr.V * x;                 // r
      Vecd s = lr.U.transpose() * g_y;   // r
      grad.low_rank_pair().U.noalias() += g_y * t.transpose();
      grad.low_rank_pair().V.noalias() += s * x.transpose();
      return lr.V.transpose() * s;
    }
    case Kind::Sparse: {
      const SparseCSRd& s = sparse_matrix();
      SparseCSRd& gs = grad.sparse_matrix();
      if (gs.col_indices != s.col_indices || gs.row_offsets != s.row_offsets)
        throw ShapeError("LinearOperator::apply_backward: sparse pattern mismatch");
      for (Index i = 0; i < s.rows; ++i)
        for (Index k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k)
          gs.values[k] += g_y[i] * x[s.col_indices[k]];
      return s.apply_transpose(g_y);
    }
  }
  throw ShapeError("LinearOperator::apply_backward: empty operator");
}

const char* operator_kind_name(LinearOperator::Kind k) {
  switch (k) {
    case LinearOperator::Kind::Dense: return "dense";
    case LinearOperator::Kind::Kron: return "kron";
    case LinearOperator::Kind::LowRank: return "lowrank";
    case LinearOperator::Kind::Sparse: return "sparse";
  }
  return "?";
}

LinearOperator zeros_like(const LinearOperator& op) {
  switch (op.kind()) {
    case LinearOperator::Kind::Dense:
      return LinearOperator::dense(Matd::Zero(op.rows(), op.cols()));
    case LinearOperator::Kind::Kron: {
      const KroneckerPaird& p = op.kron_pair();
      return LinearOperator::kron(Matd::Zero(p.B.rows(), p.B.cols()),
                                  Matd::Zero(p.C.rows(), p.C.cols()));
    }
    case LinearOperator::Kind::LowRank: {
      const LowRankPair& lr = op.low_rank_pair();
      return LinearOperator::low_rank(Matd::Zero(lr.U.rows(), lr.U.cols()),
                                      Matd::Zero(lr.V.rows(), lr.V.cols()));
    }
    case LinearOperator::Kind::Sparse: {
      SparseCSRd z = op.sparse_matrix();
      std::fill(z.values.begin(), z.values.end(), 0.0);
      return LinearOperator::sparse(std::move(z));
    }
  }
  throw ShapeError("zeros_like: empty operator");
}

}  // namespace kpc

#include "kpc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kpc {

namespace {

// Indices of the entries to prune: the floor(sparsity*size) smallest by
// |value|, ties resolved by row-major index order.
std::vector<Index> pruned_indices(const Matd& W, double sparsity) {
  if (sparsity < 0.0 || sparsity >= 1.0)
    throw SizeError("magnitude_prune: sparsity must be in [0, 1)");
  const Index total = W.size();
  const Index k = static_cast<Index>(std::floor(sparsity * static_cast<double>(total)));
  std::vector<Index> order(total);
  std::iota(order.begin(), order.end(), Index(0));
  // row-major flat index
  auto mag = [&](Index f) { return std::abs(W(f / W.cols(), f % W.cols())); };
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return mag(a) < mag(b); });
  order.resize(k);
  return order;
}

}  // namespace

Matd magnitude_mask(const Matd& W, double sparsity) {
  Matd mask = Matd::Ones(W.rows(), W.cols());
  for (Index f : pruned_indices(W, sparsity)) mask(f / W.cols(), f % W.cols()) = 0.0;
  return mask;
}

SparseCSRd magnitude_prune(const Matd& W, double sparsity) {
  Matd masked = W.cwiseProduct(magnitude_mask(W, sparsity));
  return SparseCSRd::from_dense(masked);
}

double schedule_sparsity(const PruneSchedule& sched, std::int64_t step) {
  if (step < 0) throw SizeError("schedule_sparsity: step must be >= 0");
  if (step < sched.start_step) return 0.0;
  if (step >= sched.end_step) return sched.final_sparsity;
  const double t = static_cast<double>(step - sched.start_step) /
                   static_cast<double>(sched.end_step - sched.start_step);
  const double u = 1.0 - t;
  return sched.final_sparsity * (1.0 - u * u * u);
}

LowRankPair lowrank_for_budget(Index m, Index n, std::int64_t param_budget) {
  if (param_budget < m + n)
    throw SizeError("lowrank_for_budget: budget " + std::to_string(param_budget) +
                    " below m+n = " + std::to_string(m + n) + " (rank would be 0)");
  const Index r = static_cast<Index>(param_budget / (m + n));
  return LowRankPair{Matd::Zero(m, r), Matd::Zero(r, n)};
}

CellSpec small_baseline(const CellSpec& spec, std::int64_t param_budget) {
  CellSpec out = spec;
  out.kind = OperatorKind::Dense;
  auto fits = [&](Index m) {
    out.hidden_size = m;
    return dense_cell_parameter_count(out) <= param_budget;
  };
  if (!fits(1)) throw SizeError("small_baseline: no hidden size fits budget " +
                                std::to_string(param_budget));
  Index lo = 1, hi = std::max<Index>(spec.hidden_size, 1);
  while (fits(hi)) hi *= 2;  // budget may exceed the reference cell
  while (lo < hi) {
    Index mid = lo + (hi - lo + 1) / 2;
    if (fits(mid))
      lo = mid;
    else
      hi = mid - 1;
  }
  out.hidden_size = lo;
  return out;
}

}  // namespace kpc

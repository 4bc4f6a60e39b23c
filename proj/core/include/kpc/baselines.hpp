#pragma once

// Comparison techniques: magnitude pruning (with a gradual schedule),
// low-rank factorization under a parameter budget, and width-scaled small
// dense baselines.

#include "kpc/cells.hpp"

#include <cstdint>

namespace kpc {

// Zeroes the floor(sparsity * m * n) smallest-|value| entries under a
// global threshold (ties by index order), returns the survivors.
SparseCSRd magnitude_prune(const Matd& W, double sparsity);

// 1/0 keep-mask for the same rule; used for masked dense training.
Matd magnitude_mask(const Matd& W, double sparsity);

struct PruneSchedule {
  std::int64_t start_step = 0;
  std::int64_t end_step = 1;
  double final_sparsity = 0.9;
  std::int64_t interval = 1;  // steps between mask refreshes
};

// 0 before start, final after end, cubic ramp s_f*(1-(1-t)^3) between.
double schedule_sparsity(const PruneSchedule& sched, std::int64_t step);

// r = floor(budget / (m+n)); throws SizeError when budget < m+n.
LowRankPair lowrank_for_budget(Index m, Index n, std::int64_t param_budget);

// Largest hidden size whose dense cell fits the budget (binary search);
// throws SizeError when even hidden size 1 does not fit.
CellSpec small_baseline(const CellSpec& spec, std::int64_t param_budget);

}  // namespace kpc

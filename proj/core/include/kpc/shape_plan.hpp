#pragma once

// Factor-shape planning: given an m x n target, pick factor shapes
// (m1,n1),(m2,n2) with m1*m2 = m and n1*n2 = n minimizing the stored
// parameter count m1*n1 + m2*n2.

#include "kpc/types.hpp"

#include <cstdint>
#include <vector>

namespace kpc {

// Ascending prime factors with multiplicity; 1 -> {}.
std::vector<std::uint64_t> prime_factorize(std::uint64_t k);

// Ascending list of all divisors.
std::vector<Index> divisors_of(Index k);

struct FactorShape {
  Index rows = 0;
  Index cols = 0;
  bool operator==(const FactorShape&) const = default;
};

struct ShapePlan {
  Index target_rows = 0;
  Index target_cols = 0;
  FactorShape shape1;  // left factor (m1, n1)
  FactorShape shape2;  // right factor (m2, n2)
  std::int64_t cost = 0;  // m1*n1 + m2*n2
  double compression = 0.0;
  bool degenerate = false;  // some factor dimension is 1 (prime m or n)
};

enum class PlanStrategy {
  Exhaustive,    // scan all divisor pairs; optimal
  GreedyReduce,  // fold the two smallest prime factors together until two remain
};

// Equal-cost ties: fewest unit dimensions, then smaller |m1*n1 - m2*n2|,
// then squarer factors (smaller |m1-m2| + |n1-n2|), then lexicographic.
ShapePlan plan_factor_shapes(Index m, Index n, PlanStrategy strategy = PlanStrategy::Exhaustive);

// (m*n) / (m1*n1 + m2*n2); throws ShapeError unless the shapes multiply
// back to (m, n).
double compression_ratio(Index m, Index n, FactorShape shape1, FactorShape shape2);

}  // namespace kpc

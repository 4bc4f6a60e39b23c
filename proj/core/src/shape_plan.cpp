#include "kpc/shape_plan.hpp"

#include <algorithm>
#include <array>
#include <tuple>

namespace kpc {

std::vector<std::uint64_t> prime_factorize(std::uint64_t k) {
  if (k == 0) throw SizeError("prime_factorize: k must be >= 1");
  std::vector<std::uint64_t> primes;
  for (std::uint64_t p = 2; p * p <= k; ++p) {
    while (k % p == 0) {
      primes.push_back(p);
      k /= p;
    }
  }
  if (k > 1) primes.push_back(k);
  return primes;
}

std::vector<Index> divisors_of(Index k) {
  if (k <= 0) throw SizeError("divisors_of: k must be >= 1");
  std::vector<Index> small, large;
  for (Index d = 1; d * d <= k; ++d) {
    if (k % d == 0) {
      small.push_back(d);
      if (d != k / d) large.push_back(k / d);
    }
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

namespace {

ShapePlan make_plan(Index m, Index n, Index m1, Index n1) {
  ShapePlan plan;
  plan.target_rows = m;
  plan.target_cols = n;
  plan.shape1 = {m1, n1};
  plan.shape2 = {m / m1, n / n1};
  plan.cost = static_cast<std::int64_t>(m1) * n1 +
              static_cast<std::int64_t>(plan.shape2.rows) * plan.shape2.cols;
  plan.compression = static_cast<double>(static_cast<std::int64_t>(m) * n) /
                     static_cast<double>(plan.cost);
  plan.degenerate = m1 == 1 || n1 == 1 || plan.shape2.rows == 1 || plan.shape2.cols == 1;
  return plan;
}

// cost, unit dims, imbalance, non-squareness, then lexicographic
auto rank_key(const ShapePlan& p) {
  const Index m1 = p.shape1.rows, n1 = p.shape1.cols;
  const Index m2 = p.shape2.rows, n2 = p.shape2.cols;
  const int units = (m1 == 1) + (n1 == 1) + (m2 == 1) + (n2 == 1);
  const std::int64_t imbalance = std::abs(m1 * n1 - m2 * n2);
  const Index squareness = std::abs(m1 - m2) + std::abs(n1 - n2);
  return std::make_tuple(p.cost, units, imbalance, squareness, m1, n1, m2, n2);
}

ShapePlan plan_exhaustive(Index m, Index n) {
  const auto dm = divisors_of(m);
  const auto dn = divisors_of(n);
  ShapePlan best;
  bool have = false;
  for (Index m1 : dm) {
    for (Index n1 : dn) {
      ShapePlan cand = make_plan(m, n, m1, n1);
      if (!have || rank_key(cand) < rank_key(best)) {
        best = cand;
        have = true;
      }
    }
  }
  return best;
}

// One pass of the greedy reduction: merge the two smallest entries, keep
// the list sorted ascending.
void reduce_list(std::vector<std::uint64_t>& list) {
  const std::uint64_t smallest = list.front();
  list.erase(list.begin());
  list.front() *= smallest;
  std::sort(list.begin(), list.end());
}

std::array<Index, 2> greedy_two_factors(Index k) {
  auto primes = prime_factorize(static_cast<std::uint64_t>(k));
  if (primes.empty()) primes.push_back(1);        // k == 1
  if (primes.size() == 1) primes.insert(primes.begin(), 1);  // prime k
  while (primes.size() > 2) reduce_list(primes);
  return {static_cast<Index>(primes[0]), static_cast<Index>(primes[1])};
}

ShapePlan plan_greedy(Index m, Index n) {
  auto fm = greedy_two_factors(m);  // ascending
  auto fn = greedy_two_factors(n);
  // row factors take the descending order, column factors ascending
  return make_plan(m, n, fm[1], fn[0]);
}

}  // namespace

ShapePlan plan_factor_shapes(Index m, Index n, PlanStrategy strategy) {
  if (m < 2 || n < 2) throw ShapeError("plan_factor_shapes: target dims must be >= 2");
  return strategy == PlanStrategy::Exhaustive ? plan_exhaustive(m, n) : plan_greedy(m, n);
}

double compression_ratio(Index m, Index n, FactorShape shape1, FactorShape shape2) {
  if (shape1.rows < 1 || shape1.cols < 1 || shape2.rows < 1 || shape2.cols < 1)
    throw ShapeError("compression_ratio: factor dims must be >= 1");
  if (shape1.rows * shape2.rows != m || shape1.cols * shape2.cols != n)
    throw ShapeError("compression_ratio: factor shapes do not multiply to target");
  const std::int64_t cost = shape1.rows * shape1.cols + shape2.rows * shape2.cols;
  return static_cast<double>(static_cast<std::int64_t>(m) * n) / static_cast<double>(cost);
}

}  // namespace kpc

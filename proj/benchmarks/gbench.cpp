// google-benchmark lane for the operator kernels.  The in-tree harness
// (kpc bench) is what the tests gate on; this target exists for interactive
// profiling with --benchmark_* flags and is not registered with ctest.

#include "kpc/baselines.hpp"
#include "kpc/cells.hpp"
#include "kpc/kron.hpp"
#include "kpc/shape_plan.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace kpc;

void BM_DenseMatvec(benchmark::State& state) {
  const Index m = state.range(0), n = state.range(1);
  Rng rng(99);
  const Matd W = uniform_matrix(m, n, 1.0, rng);
  const Vecd x = uniform_vector(n, 1.0, rng);
  Vecd y(m);
  for (auto _ : state) {
    y.noalias() = W * x;
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * dense_matvec_flops(m, n));
}
BENCHMARK(BM_DenseMatvec)->Args({256, 256})->Args({512, 512})->Args({1024, 512})->Args({1024, 1024});

void BM_KpMatvec(benchmark::State& state) {
  const Index m = state.range(0), n = state.range(1);
  const ShapePlan plan = plan_factor_shapes(m, n);
  Rng rng(99);
  KroneckerPaird p{uniform_matrix(plan.shape1.rows, plan.shape1.cols, 1.0, rng),
                   uniform_matrix(plan.shape2.rows, plan.shape2.cols, 1.0, rng)};
  const Vecd x = uniform_vector(n, 1.0, rng);
  for (auto _ : state) {
    Vecd y = kp_matvec<double>(p, x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * kp_matvec_flops(plan.shape1.rows, plan.shape1.cols,
                                                               plan.shape2.rows, plan.shape2.cols));
}
BENCHMARK(BM_KpMatvec)->Args({256, 256})->Args({512, 512})->Args({1024, 512})->Args({1024, 1024});

void BM_ChainMatvec(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Rng rng(99);
  KroneckerChaind chain;
  for (int i = 0; i < k; ++i) chain.factors.push_back(uniform_matrix(2, 2, 1.0, rng));
  const Index n = Index(1) << k;
  const Vecd x = uniform_vector(n, 1.0, rng);
  for (auto _ : state) {
    Vecd y = kp_matvec_chain<double>(chain, x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_ChainMatvec)->Arg(4)->Arg(6)->Arg(8);

void BM_SparseMatvec(benchmark::State& state) {
  const Index m = state.range(0), n = state.range(1);
  const ShapePlan plan = plan_factor_shapes(m, n);
  Rng rng(99);
  const Matd W = uniform_matrix(m, n, 1.0, rng);
  const double sparsity = 1.0 - static_cast<double>(plan.cost) / (double(m) * double(n));
  const SparseCSRd S = magnitude_prune(W, sparsity);
  const Vecd x = uniform_vector(n, 1.0, rng);
  for (auto _ : state) {
    Vecd y = S.apply(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * S.nnz());
}
BENCHMARK(BM_SparseMatvec)->Args({256, 256})->Args({1024, 1024});

void BM_CellStep(benchmark::State& state) {
  CellSpec spec;
  spec.family = static_cast<CellFamily>(state.range(0));
  spec.kind = static_cast<OperatorKind>(state.range(1));
  spec.hidden_size = 256;
  spec.input_size = 256;
  Rng rng(99);
  const CellParams params = init_cell(spec, rng);
  const Vecd x = uniform_vector(spec.input_size, 1.0, rng);
  CellState st = initial_state(spec);
  for (auto _ : state) {
    CellState next = cell_step(spec, params, x, st);
    benchmark::DoNotOptimize(next.h.data());
  }
}
BENCHMARK(BM_CellStep)
    ->ArgsProduct({{0, 1, 2, 3}, {0, 1}})  // family x {dense, kron}
    ->ArgNames({"family", "kind"});

}  // namespace

BENCHMARK_MAIN();

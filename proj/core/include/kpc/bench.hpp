#pragma once

// Microbenchmark harness: median/MAD over >= 30 reps after warmup, automatic
// batching when the timer cannot resolve a single call, and output checksums
// compared against straightforward reference implementations.

#include "kpc/cells.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace kpc {

struct TimingOptions {
  int warmup = 5;
  int reps = 40;
  double min_rep_seconds = 2e-3;  // batch is widened to reach this per rep
};

struct BenchResult {
  std::string label;
  std::string config;
  int warmup = 0;
  int reps = 0;
  Index batch = 1;                // kernel calls per repetition
  std::vector<double> samples_ns; // per-call ns, one entry per rep
  double median_ns = 0.0;
  double mad_ns = 0.0;
  double checksum = 0.0;
  bool checksum_ok = true;
  bool at_timer_floor = false;    // median below ~10x timer resolution

  std::string to_json_line() const;
};

double median(std::vector<double> v);
double median_abs_deviation(const std::vector<double>& v, double med);

// Measured cost/granularity of reading the monotonic clock, in ns.
double timer_resolution_ns();

// kernel() performs one unit of work and returns a checksum of its output.
// The checksum of one call is compared to reference_checksum within
// |a-b| <= tol * max(1, |reference|).
BenchResult time_kernel(const std::string& label, const std::string& config,
                        const std::function<double()>& kernel, const TimingOptions& opts,
                        double reference_checksum, double checksum_tol = 1e-8);

// Interleaved A/B comparison for ordering claims.  Separately-timed kernels
// drift apart by more than their true gap on a busy host, so both kernels
// are timed in alternating ~100us slices (order flips every rep to cancel
// bias) and the statistic is the per-call median of (b - a) over >= 1000
// slice pairs, which shrugs off scheduler spikes that poison single slices.
struct PairedDelta {
  std::string label_a;
  std::string label_b;
  std::string config;
  int reps = 0;                  // number of slice pairs
  Index batch = 1;               // kernel calls per slice
  double median_delta_ns = 0.0;  // median over reps of per-call t(b) - t(a)
  double mad_delta_ns = 0.0;

  std::string to_json_line() const;
};

PairedDelta paired_delta(const std::string& label_a, const std::string& label_b,
                         const std::string& config, const std::function<double()>& a,
                         const std::function<double()>& b, const TimingOptions& opts);

struct SuiteOptions {
  TimingOptions timing;
  std::uint64_t seed = 42;
  bool use_f32 = false;  // matvec kernels only; everything else is f64
};

// Dense | planned 2-factor Kron | all-2x2 chain (square power-of-two sizes)
// | compression-matched Sparse | budget-matched LowRank, per size.
std::vector<BenchResult> matvec_suite(const std::vector<std::pair<Index, Index>>& sizes,
                                      const SuiteOptions& opts);

// Fixed 256x256 target expressed as chains of 4..8 factors.  Runtime is
// dominated by how the expansion is blocked, not by the op count alone, so
// the factor lists are chosen to keep per-rung gaps resolvable; consecutive
// rungs are additionally compared with paired_delta, which is the statistic
// to check for the "slower with more factors" ordering.  All rungs share one
// workspace so the allocator stays out of the measurement.
struct ChainSeriesReport {
  std::vector<BenchResult> results;  // "dense" baseline + one row per factor count
  std::vector<PairedDelta> deltas;   // consecutive rungs: (k) vs (k+1)
};
ChainSeriesReport chain_factor_series(const SuiteOptions& opts, int k_min = 4, int k_max = 8);
std::vector<std::pair<Index, Index>> chain_series_shapes(int k);  // the factor list used

// Per-step latency per family for one operator kind.
std::vector<BenchResult> cell_step_suite(const std::vector<CellSpec>& specs,
                                         const SuiteOptions& opts);

// The same dense matvec timed under two labels; medians should agree.
std::vector<BenchResult> aa_suite(Index m, Index n, const SuiteOptions& opts);

std::string bench_metadata_json(const SuiteOptions& opts);
// Aligned table with per-config ratio against the "dense" row.
std::string format_table(const std::vector<BenchResult>& results);

}  // namespace kpc

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kpc/bench.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

using namespace kpc;

namespace {

TimingOptions fast_timing() {
  TimingOptions t;
  t.warmup = 5;
  t.reps = 30;
  t.min_rep_seconds = 2e-4;
  return t;
}

}  // namespace

TEST_CASE("median and MAD") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({7.0}) == 7.0);
  CHECK_THROWS_AS(median({}), SizeError);

  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 100.0};
  CHECK(median_abs_deviation(v, median(v)) == 1.0);
  CHECK(median_abs_deviation({5.0, 5.0, 5.0}, 5.0) == 0.0);
}

TEST_CASE("timer_resolution_ns is positive and stable") {
  const double r = timer_resolution_ns();
  CHECK(r > 0.0);
  CHECK(timer_resolution_ns() == r);  // cached
}

TEST_CASE("time_kernel enforces floors and checks the checksum") {
  Rng rng(61);
  const Matd W = uniform_matrix(64, 64, 1.0, rng);
  const Vecd x = uniform_vector(64, 1.0, rng);
  Vecd y(64);
  auto kernel = [&]() -> double {
    y.noalias() = W * x;
    return y.sum();
  };
  const double ref = (W * x).sum();

  TimingOptions lax;
  lax.warmup = 0;
  lax.reps = 3;
  lax.min_rep_seconds = 1e-4;
  const BenchResult r = time_kernel("dense", "64x64", kernel, lax, ref);
  CHECK(r.warmup == 5);
  CHECK(r.reps == 30);
  CHECK(r.samples_ns.size() == 30);
  CHECK(r.batch >= 1);
  CHECK(r.median_ns > 0.0);
  CHECK(r.mad_ns >= 0.0);
  CHECK(r.checksum_ok);
  CHECK_FALSE(r.at_timer_floor);  // batching lifts the rep above the floor

  // a fast kernel must be batched to reach the requested rep length
  int calls = 0;
  auto tiny = [&]() -> double { return double(++calls); };
  TimingOptions meaty = fast_timing();
  meaty.min_rep_seconds = 1e-3;
  const BenchResult t = time_kernel("tiny", "", tiny, meaty, 1.0, 1e12);
  CHECK(t.batch > 1);

  const BenchResult bad = time_kernel("dense", "64x64", kernel, lax, ref + 1.0);
  CHECK_FALSE(bad.checksum_ok);
}

TEST_CASE("BenchResult::to_json_line carries the full record") {
  BenchResult r;
  r.label = "dense";
  r.config = "8x8";
  r.warmup = 5;
  r.reps = 30;
  r.batch = 17;
  r.samples_ns = {10.0, 11.0};
  r.median_ns = 10.5;
  r.mad_ns = 0.5;
  r.checksum = 3.25;
  r.checksum_ok = true;
  r.at_timer_floor = false;
  const auto j = nlohmann::json::parse(r.to_json_line());
  CHECK(j["label"] == "dense");
  CHECK(j["config"] == "8x8");
  CHECK(j["batch"] == 17);
  CHECK(j["median_ns"].get<double>() == 10.5);
  CHECK(j["checksum_ok"] == true);
  CHECK(j["samples_ns"].size() == 2);
}

TEST_CASE("A/A runs agree within noise") {
  SuiteOptions opts;
  opts.timing = fast_timing();
  opts.timing.min_rep_seconds = 1e-3;
  const std::vector<BenchResult> aa = aa_suite(64, 64, opts);
  REQUIRE(aa.size() == 2);
  CHECK(aa[0].label == "aa1");
  CHECK(aa[1].label == "aa2");
  CHECK(aa[0].checksum_ok);
  CHECK(aa[1].checksum_ok);
  const double gap = std::abs(aa[0].median_ns - aa[1].median_ns);
  const double allowance = std::max({3.0 * (aa[0].mad_ns + aa[1].mad_ns),
                                     0.02 * aa[0].median_ns, 50.0});
  CHECK(gap <= allowance);
}

TEST_CASE("paired_delta resolves a constructed 2x work gap; A vs A sits at zero") {
  Rng rng(62);
  const Matd W = uniform_matrix(64, 64, 1.0, rng);
  const Vecd x = uniform_vector(64, 1.0, rng);
  Vecd y(64);
  auto once = [&]() -> double {
    y.noalias() = W * x;
    return y.sum();
  };
  auto twice = [&]() -> double {
    y.noalias() = W * x;
    const double s = y.sum();
    y.noalias() = W * x;
    return s + y.sum();
  };

  const TimingOptions opts = fast_timing();
  const PairedDelta gap = paired_delta("once", "twice", "64x64", once, twice, opts);
  CHECK(gap.reps >= 1000);
  CHECK(gap.batch >= 1);
  CHECK(gap.median_delta_ns > 0.0);

  const PairedDelta same = paired_delta("a", "a", "64x64", once, once, opts);
  const BenchResult scale = time_kernel("once", "64x64", once, opts, once());
  CHECK(std::abs(same.median_delta_ns) <=
        std::max({5.0 * same.mad_delta_ns, 0.2 * scale.median_ns, 50.0}));

  const auto j = nlohmann::json::parse(gap.to_json_line());
  CHECK(j["type"] == "paired_delta");
  CHECK(j["label_a"] == "once");
  CHECK(j["label_b"] == "twice");
  CHECK(j["median_delta_ns"].get<double>() > 0.0);
}

TEST_CASE("matvec_suite: row layout and checksums") {
  SuiteOptions opts;
  opts.timing = fast_timing();
  const std::vector<BenchResult> rows = matvec_suite({{16, 16}, {12, 10}}, opts);
  REQUIRE(rows.size() == 9);  // 16x16 gets the all-2x2 chain row, 12x10 does not
  const std::vector<std::string> want{"dense", "kron", "chain",  "sparse", "lowrank",
                                      "dense", "kron", "sparse", "lowrank"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].label == want[i]);
    CHECK(rows[i].config == (i < 5 ? "16x16" : "12x10"));
    CHECK(rows[i].checksum_ok);
    CHECK(rows[i].median_ns > 0.0);
  }

  SuiteOptions f32 = opts;
  f32.use_f32 = true;
  const std::vector<BenchResult> frows = matvec_suite({{16, 16}}, f32);
  CHECK(frows.size() == 4);  // chain stays on the f64 library path
  for (const auto& r : frows) CHECK(r.checksum_ok);
}

TEST_CASE("chain_series_shapes: frozen ladder") {
  for (int k = 4; k <= 8; ++k) {
    const auto shapes = chain_series_shapes(k);
    REQUIRE(static_cast<int>(shapes.size()) == k);
    Index rows = 1, cols = 1;
    for (const auto& [r, c] : shapes) {
      rows *= r;
      cols *= c;
    }
    CHECK(rows == 256);
    CHECK(cols == 256);
  }
  CHECK(kp_chain_expand_flops(chain_series_shapes(4)) == 136192);
  CHECK(kp_chain_expand_flops(chain_series_shapes(5)) == 141824);
  CHECK(kp_chain_expand_flops(chain_series_shapes(6)) == 148800);
  CHECK(kp_chain_expand_flops(chain_series_shapes(7)) == 150176);
  CHECK(kp_chain_expand_flops(chain_series_shapes(8)) == 152912);
  for (int k = 5; k <= 8; ++k)
    CHECK(kp_chain_expand_flops(chain_series_shapes(k)) >
          kp_chain_expand_flops(chain_series_shapes(k - 1)));
  CHECK_THROWS_AS(chain_series_shapes(3), SizeError);
  CHECK_THROWS_AS(chain_series_shapes(9), SizeError);
}

TEST_CASE("chain_factor_series: rows, deltas, checksums") {
  SuiteOptions opts;
  opts.timing = fast_timing();
  const ChainSeriesReport report = chain_factor_series(opts, 4, 5);
  REQUIRE(report.results.size() == 3);
  CHECK(report.results[0].label == "dense");
  CHECK(report.results[1].label == "chain4");
  CHECK(report.results[2].label == "chain5");
  for (const auto& r : report.results) {
    CHECK(r.config == "256x256");
    CHECK(r.checksum_ok);
  }
  REQUIRE(report.deltas.size() == 1);
  CHECK(report.deltas[0].label_a == "chain4");
  CHECK(report.deltas[0].label_b == "chain5");
  CHECK(report.deltas[0].reps >= 1000);

  CHECK_THROWS_AS(chain_factor_series(opts, 3, 5), SizeError);
  CHECK_THROWS_AS(chain_factor_series(opts, 6, 5), SizeError);
}

TEST_CASE("cell_step_suite smoke") {
  CellSpec spec;
  spec.family = CellFamily::Gru;
  spec.input_size = 8;
  spec.hidden_size = 16;
  spec.kind = OperatorKind::Kron;
  SuiteOptions opts;
  opts.timing = fast_timing();
  const std::vector<BenchResult> rows = cell_step_suite({spec}, opts);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == "gru/kron");
  CHECK(rows[0].config == "16x8");
  CHECK(rows[0].checksum_ok);
}

TEST_CASE("metadata and table formatting") {
  SuiteOptions opts;
  opts.timing = fast_timing();
  const auto meta = nlohmann::json::parse(bench_metadata_json(opts));
  CHECK(meta["type"] == "metadata");
  CHECK(meta["seed"] == 42);
  CHECK(meta["precision"] == "f64");
  CHECK(meta["timer_resolution_ns"].get<double>() > 0.0);

  const std::vector<BenchResult> rows = matvec_suite({{16, 16}}, opts);
  const std::string table = format_table(rows);
  CHECK(table.find("config") != std::string::npos);
  CHECK(table.find("dense") != std::string::npos);
  CHECK(table.find("kron") != std::string::npos);
  CHECK(table.find("16x16") != std::string::npos);
}

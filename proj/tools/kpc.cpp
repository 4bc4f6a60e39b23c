// kpc: plan factor shapes, train/evaluate compressed RNN classifiers,
// benchmark operator kernels, inspect model spectra, synthesize toy data.
//
// Exit codes: 0 success, 2 usage/config/input errors, 1 internal errors.

#include "kpc/analysis.hpp"
#include "kpc/bench.hpp"
#include "kpc/io.hpp"
#include "kpc/kron.hpp"
#include "kpc/shape_plan.hpp"
#include "kpc/train.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace kpc;

ShapePlan run_plan(Index rows, Index cols, const std::string& strategy, std::ostream& os) {
  const PlanStrategy s =
      strategy == "greedy" ? PlanStrategy::GreedyReduce : PlanStrategy::Exhaustive;
  const ShapePlan plan = plan_factor_shapes(rows, cols, s);
  os << "target:      " << plan.target_rows << " x " << plan.target_cols << "\n";
  os << "factor 1:    " << plan.shape1.rows << " x " << plan.shape1.cols << "\n";
  os << "factor 2:    " << plan.shape2.rows << " x " << plan.shape2.cols << "\n";
  os << "parameters:  " << plan.cost << "  (dense " << rows * cols << ")\n";
  os << "compression: " << std::fixed << std::setprecision(2) << plan.compression << "x\n";
  os << "matvec ops:  "
     << kp_matvec_flops(plan.shape1.rows, plan.shape1.cols, plan.shape2.rows, plan.shape2.cols)
     << "  (dense " << dense_matvec_flops(rows, cols) << ")\n";
  if (plan.degenerate)
    std::cerr << "note: a target dimension is prime; one factor is 1-wide and the "
                 "product degenerates to a scaled copy\n";
  return plan;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ParseError("short write to " + path);
}

struct BenchCli {
  std::string suite = "matvec";
  std::vector<std::string> sizes;
  int factors_min = 4, factors_max = 8;
  std::string precision = "f64";
  int reps = 40, warmup = 5;
  std::uint64_t seed = 42;
  std::string out;
};

std::vector<std::pair<Index, Index>> parse_sizes(const std::vector<std::string>& sizes) {
  std::vector<std::pair<Index, Index>> out;
  for (const std::string& s : sizes) {
    const auto x = s.find('x');
    if (x == std::string::npos)
      throw ParseError("bad --sizes entry '" + s + "' (expected MxN)");
    try {
      out.emplace_back(std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1)));
    } catch (const std::exception&) {
      throw ParseError("bad --sizes entry '" + s + "' (expected MxN)");
    }
  }
  return out;
}

int run_bench(const BenchCli& cli) {
  SuiteOptions opts;
  opts.seed = cli.seed;
  opts.timing.reps = cli.reps;
  opts.timing.warmup = cli.warmup;
  if (cli.precision == "f32")
    opts.use_f32 = true;
  else if (cli.precision != "f64")
    throw ParseError("unknown --precision '" + cli.precision + "' (expected f64|f32)");

  std::vector<std::pair<Index, Index>> sizes = parse_sizes(cli.sizes);
  if (sizes.empty()) sizes = {{256, 256}, {512, 512}, {1024, 512}, {1024, 1024}};

  std::vector<BenchResult> results;
  std::vector<PairedDelta> deltas;
  if (cli.suite == "matvec") {
    results = matvec_suite(sizes, opts);
  } else if (cli.suite == "chain") {
    ChainSeriesReport report = chain_factor_series(opts, cli.factors_min, cli.factors_max);
    results = std::move(report.results);
    deltas = std::move(report.deltas);
  } else if (cli.suite == "cells") {
    std::vector<CellSpec> specs;
    for (CellFamily fam :
         {CellFamily::Rnn, CellFamily::Lstm, CellFamily::Gru, CellFamily::FastRnn})
      for (OperatorKind kind : {OperatorKind::Dense, OperatorKind::Kron, OperatorKind::LowRank,
                                OperatorKind::Sparse}) {
        CellSpec spec;
        spec.family = fam;
        spec.kind = kind;
        spec.hidden_size = sizes.front().first;
        spec.input_size = sizes.front().second;
        specs.push_back(spec);
      }
    results = cell_step_suite(specs, opts);
  } else if (cli.suite == "aa") {
    results = aa_suite(sizes.front().first, sizes.front().second, opts);
  } else {
    throw ParseError("unknown --suite '" + cli.suite + "' (expected matvec|cells|chain|aa)");
  }

  std::string jsonl = bench_metadata_json(opts) + "\n";
  for (const BenchResult& r : results) jsonl += r.to_json_line() + "\n";
  for (const PairedDelta& d : deltas) jsonl += d.to_json_line() + "\n";
  if (cli.out.empty())
    std::cout << jsonl;
  else
    write_text(cli.out, jsonl);
  std::cout << format_table(results);
  for (const PairedDelta& d : deltas) {
    std::ostringstream os;
    os << "paired " << d.label_b << " - " << d.label_a << ": " << std::showpos << std::fixed
       << std::setprecision(3) << d.median_delta_ns / 1e3 << std::noshowpos << " us/call (mad "
       << d.mad_delta_ns / 1e3 << ")\n";
    std::cout << os.str();
  }

  for (const BenchResult& r : results)
    if (!r.checksum_ok) {
      std::cerr << "error: checksum mismatch in " << r.config << " " << r.label << "\n";
      return 1;
    }
  return 0;
}

int run_analyze(const std::string& model_path, const std::string& out_path) {
  const LoadedModel loaded = load_model(model_path);
  const RnnClassifier& model = loaded.model;
  std::string jsonl;

  auto emit_cell = [&](const CellParams& cell, const std::string& prefix) {
    for (std::size_t i = 0; i < cell.ops.size(); ++i) {
      const std::string label = prefix + "op" + std::to_string(i);
      const OperatorSpectra sp = analyze_operator(cell.ops[i]);
      jsonl += sp.combined.to_json_line(label) + "\n";
      if (sp.factor1) jsonl += sp.factor1->to_json_line(label + ".factor1") + "\n";
      if (sp.factor2) jsonl += sp.factor2->to_json_line(label + ".factor2") + "\n";
      if (sp.sigma_product_rel_err) {
        std::ostringstream os;
        os << "{\"label\":\"" << label << ".multiplicativity\",\"sigma_rel_err\":"
           << *sp.sigma_product_rel_err << ",\"cond_rel_err\":"
           << (sp.cond_product_rel_err ? *sp.cond_product_rel_err : -1.0)
           << ",\"rank_multiplicative\":"
           << ((sp.rank_multiplicative && *sp.rank_multiplicative) ? "true" : "false") << "}";
        jsonl += os.str() + "\n";
      }
    }
  };
  emit_cell(model.cell, "cell.");
  if (model.bidirectional) emit_cell(model.cell_bwd, "bwd.");
  jsonl += svd_metrics(model.head_w).to_json_line("head.w") + "\n";

  if (out_path.empty())
    std::cout << jsonl;
  else
    write_text(out_path, jsonl);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kronecker-product compressed RNN toolkit"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ---- plan ----
  auto* plan_cmd = app.add_subcommand("plan", "Pick factor shapes for an m x n operator");
  Index plan_rows = 0, plan_cols = 0;
  std::string plan_strategy = "exhaustive";
  plan_cmd->add_option("rows", plan_rows, "target rows")->required();
  plan_cmd->add_option("cols", plan_cols, "target cols")->required();
  plan_cmd->add_option("--strategy", plan_strategy, "exhaustive|greedy")
      ->check(CLI::IsMember({"exhaustive", "greedy"}));
  plan_cmd->callback([&] { run_plan(plan_rows, plan_cols, plan_strategy, std::cout); });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train a classifier from a JSON config");
  std::string train_config, train_operator, train_out;
  std::int64_t train_seed = -1, train_epochs = -1;
  train_cmd->add_option("--config", train_config, "experiment config (JSON)")->required();
  train_cmd->add_option("--seed", train_seed, "override train.seed");
  train_cmd->add_option("--operator", train_operator, "override operator kind");
  train_cmd->add_option("--epochs", train_epochs, "override train.epochs");
  train_cmd->add_option("--out", train_out, "override output directory");
  train_cmd->callback([&] {
    ExperimentConfig cfg = load_experiment_config(train_config);
    if (train_seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(train_seed);
    if (train_epochs >= 0) cfg.train.epochs = train_epochs;
    if (!train_operator.empty()) cfg.spec.kind = parse_operator_kind(train_operator);
    if (!train_out.empty()) cfg.out_dir = train_out;

    const Dataset data = load_dataset(cfg.dataset);
    const std::uint64_t hash = experiment_config_hash(cfg);
    const TrainResult result =
        train_model(cfg.spec, cfg.classes, cfg.bidirectional, data, cfg.train);

    std::filesystem::create_directories(cfg.out_dir);
    const std::string model_path = cfg.out_dir + "/model.kpc";
    const std::string metrics_path = cfg.out_dir + "/metrics.csv";
    std::map<std::string, double> final_metrics;
    if (!result.metrics.empty()) {
      final_metrics["loss"] = result.metrics.back().loss;
      final_metrics["accuracy"] = result.metrics.back().accuracy;
    }
    save_model(model_path, result.model, final_metrics, cfg.train.seed, hash);
    write_metrics_csv(metrics_path, result.metrics, hash, cfg.train.seed);

    const std::int64_t dense_params = dense_cell_parameter_count(cfg.spec);
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "config_hash: " << to_hex(hash) << "\n";
    std::cout << "parameters:  " << result.model.parameter_count() << "  (cell weights "
              << result.model.cell.weight_parameter_count() << ", dense cell " << dense_params
              << ")\n";
    std::cout << "epochs:      " << (result.metrics.size() - 1) << "\n";
    if (!result.metrics.empty()) {
      std::cout << "final loss:  " << result.metrics.back().loss << "\n";
      std::cout << "accuracy:    " << std::setprecision(2) << result.metrics.back().accuracy
                << "\n";
    }
    std::cout << "model:       " << model_path << "\n";
    std::cout << "metrics:     " << metrics_path << "\n";
    if (result.diverged) {
      std::cerr << "error: training diverged (" << result.note
                << "); saved the last finite checkpoint\n";
      exit_code = 1;
    }
  });

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on a dataset");
  std::string eval_model;
  DatasetSpec eval_data;
  eval_cmd->add_option("--model", eval_model, "model archive")->required();
  eval_cmd->add_option("--format", eval_data.format, "toy|csv|idx");
  eval_cmd->add_option("--data", eval_data.path, "csv file or idx image file");
  eval_cmd->add_option("--labels", eval_data.labels_path, "idx label file");
  eval_cmd->add_option("--sequences", eval_data.sequences, "toy: sequence count");
  eval_cmd->add_option("--timesteps", eval_data.timesteps, "toy: steps per sequence");
  eval_cmd->add_option("--features", eval_data.features, "toy: features per step");
  eval_cmd->add_option("--data-seed", eval_data.seed, "toy: generator seed");
  eval_cmd->callback([&] {
    const LoadedModel loaded = load_model(eval_model);
    if (eval_data.format == "toy" && eval_data.path.empty())
      eval_data.features = loaded.model.spec.input_size;
    const Dataset data = load_dataset(eval_data);
    const double acc = evaluate_accuracy(loaded.model, data);
    const double loss = evaluate_loss(loaded.model, data);
    std::cout << std::fixed << std::setprecision(4) << "sequences: " << data.size() << "\n"
              << "loss:      " << loss << "\n"
              << "accuracy:  " << std::setprecision(2) << acc << "\n";
  });

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "Time operator kernels");
  BenchCli bench_cli;
  bench_cmd->add_option("--suite", bench_cli.suite, "matvec|cells|chain|aa");
  bench_cmd->add_option("--sizes", bench_cli.sizes, "comma list of MxN")->delimiter(',');
  bench_cmd->add_option("--factors-min", bench_cli.factors_min, "chain suite: smallest k");
  bench_cmd->add_option("--factors-max", bench_cli.factors_max, "chain suite: largest k");
  bench_cmd->add_option("--precision", bench_cli.precision, "f64|f32");
  bench_cmd->add_option("--reps", bench_cli.reps, "timed repetitions (min 30)");
  bench_cmd->add_option("--warmup", bench_cli.warmup, "warmup iterations (min 5)");
  bench_cmd->add_option("--seed", bench_cli.seed, "input generator seed");
  bench_cmd->add_option("--out", bench_cli.out, "write JSON lines here instead of stdout");
  bench_cmd->callback([&] { exit_code = run_bench(bench_cli); });

  // ---- analyze ----
  auto* an_cmd = app.add_subcommand("analyze", "Spectral reports for a saved model");
  std::string an_model, an_out;
  an_cmd->add_option("--model", an_model, "model archive")->required();
  an_cmd->add_option("--out", an_out, "write JSON lines here instead of stdout");
  an_cmd->callback([&] { exit_code = run_analyze(an_model, an_out); });

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic 2-class CSV dataset");
  std::string synth_out;
  DatasetSpec synth_spec;
  synth_cmd->add_option("--out", synth_out, "output csv path")->required();
  synth_cmd->add_option("--sequences", synth_spec.sequences, "sequence count");
  synth_cmd->add_option("--timesteps", synth_spec.timesteps, "steps per sequence");
  synth_cmd->add_option("--features", synth_spec.features, "features per step");
  synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");
  synth_cmd->callback([&] {
    const Dataset data = make_separable_dataset(synth_spec.sequences, synth_spec.timesteps,
                                                synth_spec.features, synth_spec.seed);
    write_dataset_csv(synth_out, data);
    std::cout << "wrote " << data.size() << " sequences x " << synth_spec.timesteps
              << " steps to " << synth_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // help/version exit cleanly
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// End-to-end runs of the installed binary (path injected as KPC_BIN), plus
// in-process reads of its outputs through the library.

#include "kpc/io.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace kpc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("kpc_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream os;
  os << in.rdbuf();
  return std::move(os).str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(bool(out));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

RunResult run(const TempDir& tmp, const std::string& args) {
  const std::string out_path = tmp / ".stdout", err_path = tmp / ".stderr";
  const std::string cmd =
      std::string("'") + KPC_BIN + "' " + args + " >'" + out_path + "' 2>'" + err_path + "'";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = (raw >= 0 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

}  // namespace

TEST_CASE("plan: exhaustive and greedy splits of 154 x 164") {
  TempDir tmp;
  const RunResult r = run(tmp, "plan 154 164");
  CHECK(r.code == 0);
  CHECK(r.out.find("target:      154 x 164") != std::string::npos);
  CHECK(r.out.find("factor 1:    2 x 82") != std::string::npos);
  CHECK(r.out.find("factor 2:    77 x 2") != std::string::npos);
  CHECK(r.out.find("parameters:  318") != std::string::npos);
  CHECK(r.out.find("79.42x") != std::string::npos);

  const RunResult g = run(tmp, "plan 154 164 --strategy greedy");
  CHECK(g.code == 0);
  CHECK(g.out.find("factor 1:    14 x 4") != std::string::npos);
  CHECK(g.out.find("factor 2:    11 x 41") != std::string::npos);
  CHECK(g.out.find("parameters:  507") != std::string::npos);
  CHECK(g.out.find("49.81x") != std::string::npos);

  const RunResult p = run(tmp, "plan 13 13");
  CHECK(p.code == 0);
  CHECK(p.err.find("prime") != std::string::npos);
}

TEST_CASE("usage errors exit with 2; help exits with 0") {
  TempDir tmp;
  CHECK(run(tmp, "plan 1 8").code == 2);       // dims below 2
  CHECK(run(tmp, "plan 154").code == 2);       // missing required arg
  CHECK(run(tmp, "").code == 2);               // subcommand required
  CHECK(run(tmp, "frobnicate").code == 2);     // unknown subcommand
  CHECK(run(tmp, "--help").code == 0);
  CHECK(run(tmp, "bench --suite nope").code == 2);
  CHECK(run(tmp, "bench --sizes 12y10").code == 2);
  CHECK(run(tmp, "bench --suite matvec --sizes 16x16 --precision f16").code == 2);
  CHECK(run(tmp, "train --config /nonexistent/cfg.json").code == 2);
  CHECK(run(tmp, "eval --model /nonexistent/model.kpc").code == 2);
  CHECK(run(tmp, "analyze --model /nonexistent/model.kpc").code == 2);
}

TEST_CASE("synth -> train -> eval -> analyze pipeline") {
  TempDir tmp;
  const std::string csv = tmp / "data.csv";

  const RunResult s =
      run(tmp, "synth --out '" + csv + "' --sequences 12 --timesteps 4 --features 3 --seed 9");
  REQUIRE(s.code == 0);
  CHECK(s.out.find("wrote 12 sequences") != std::string::npos);
  REQUIRE(fs::exists(csv));

  const std::string cfg_path = tmp / "exp.json";
  const std::string run_dir = tmp / "run1";
  spit(cfg_path, std::string(R"({
    "family": "rnn", "input_size": 3, "hidden_size": 6, "operator": "kron",
    "train": {"epochs": 12, "seed": 5, "learning_rate": 0.01},
    "dataset": {"format": "csv", "path": ")") +
                      csv + R"("},
    "out_dir": ")" + run_dir + R"("
  })");

  const RunResult t = run(tmp, "train --config '" + cfg_path + "'");
  REQUIRE(t.code == 0);
  CHECK(t.out.find("config_hash: ") != std::string::npos);
  CHECK(t.out.find("epochs:      12") != std::string::npos);
  REQUIRE(fs::exists(run_dir + "/model.kpc"));
  REQUIRE(fs::exists(run_dir + "/metrics.csv"));

  // every output embeds the config hash and seed, and they agree
  const std::string metrics = slurp(run_dir + "/metrics.csv");
  REQUIRE(metrics.rfind("# config_hash=", 0) == 0);
  const std::string hex = metrics.substr(14, 16);
  CHECK(metrics.find(" seed=5\n") != std::string::npos);
  CHECK(t.out.find("config_hash: " + hex) != std::string::npos);
  const LoadedModel archived = load_model(run_dir + "/model.kpc");
  CHECK(to_hex(archived.config_hash) == hex);
  CHECK(archived.seed == 5);
  CHECK(archived.metrics.count("accuracy") == 1);
  CHECK(archived.model.cell.ops[0].kind() == LinearOperator::Kind::Kron);

  // identical config, identical bytes
  const std::string model_bytes = slurp(run_dir + "/model.kpc");
  const RunResult t2 = run(tmp, "train --config '" + cfg_path + "'");
  REQUIRE(t2.code == 0);
  CHECK(slurp(run_dir + "/metrics.csv") == metrics);
  CHECK(slurp(run_dir + "/model.kpc") == model_bytes);

  const RunResult e =
      run(tmp, "eval --model '" + run_dir + "/model.kpc' --format csv --data '" + csv + "'");
  REQUIRE(e.code == 0);
  CHECK(e.out.find("sequences: 12") != std::string::npos);
  CHECK(e.out.find("loss:") != std::string::npos);
  CHECK(e.out.find("accuracy:") != std::string::npos);

  const RunResult etoy = run(tmp, "eval --model '" + run_dir +
                                      "/model.kpc' --sequences 8 --timesteps 4 --data-seed 77");
  CHECK(etoy.code == 0);
  CHECK(etoy.out.find("sequences: 8") != std::string::npos);

  const std::string spectra = tmp / "spectra.jsonl";
  const RunResult a =
      run(tmp, "analyze --model '" + run_dir + "/model.kpc' --out '" + spectra + "'");
  REQUIRE(a.code == 0);
  const std::string lines = slurp(spectra);
  CHECK(lines.find("\"label\":\"cell.op0\"") != std::string::npos);
  CHECK(lines.find("cell.op0.factor1") != std::string::npos);
  CHECK(lines.find("cell.op0.multiplicativity") != std::string::npos);
  CHECK(lines.find("head.w") != std::string::npos);

  const RunResult a2 = run(tmp, "analyze --model '" + run_dir + "/model.kpc'");
  CHECK(a2.code == 0);
  CHECK(a2.out == lines);  // stdout matches the file sink
}

TEST_CASE("train: cli overrides and divergence reporting") {
  TempDir tmp;
  const std::string cfg_path = tmp / "exp.json";
  const std::string run_dir = tmp / "out";
  spit(cfg_path, std::string(R"({
    "family": "rnn", "input_size": 4, "hidden_size": 6,
    "train": {"epochs": 20, "seed": 0, "optimizer": "sgd", "learning_rate": 1e307},
    "dataset": {"format": "toy", "sequences": 16, "timesteps": 5, "features": 4, "seed": 23},
    "out_dir": ")") + run_dir + R"("
  })");
  const RunResult d = run(tmp, "train --config '" + cfg_path + "'");
  CHECK(d.code == 1);  // diverged: reported as a runtime failure, not usage
  CHECK(d.err.find("diverged") != std::string::npos);
  CHECK(fs::exists(run_dir + "/model.kpc"));  // checkpoint still saved

  // --operator / --epochs / --seed / --out override the file
  const std::string sane_cfg = tmp / "sane.json";
  const std::string run2 = tmp / "out2";
  spit(sane_cfg, std::string(R"({
    "family": "rnn", "input_size": 3, "hidden_size": 5,
    "train": {"epochs": 6, "seed": 2, "learning_rate": 0.01},
    "dataset": {"format": "toy", "sequences": 12, "timesteps": 4, "features": 3},
    "out_dir": ")") + run_dir + R"("
  })");
  const RunResult o = run(tmp, "train --config '" + sane_cfg +
                                   "' --operator lowrank --epochs 3 --seed 8 --out '" + run2 +
                                   "'");
  REQUIRE(o.code == 0);
  CHECK(o.out.find("epochs:      3") != std::string::npos);
  const LoadedModel over = load_model(run2 + "/model.kpc");
  CHECK(over.seed == 8);
  CHECK(over.model.cell.ops[0].kind() == LinearOperator::Kind::LowRank);
  const std::string metrics = slurp(run2 + "/metrics.csv");
  CHECK(metrics.find(" seed=8\n") != std::string::npos);
  // 3 epochs -> initial row + 3 epoch rows after the two header lines
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2 + 4);
}

TEST_CASE("bench: aa suite writes jsonl and a table") {
  TempDir tmp;
  const std::string jsonl_path = tmp / "bench.jsonl";
  const RunResult b = run(tmp, "bench --suite aa --sizes 48x48 --reps 30 --warmup 5 --out '" +
                                   jsonl_path + "'");
  REQUIRE(b.code == 0);
  CHECK(b.out.find("aa1") != std::string::npos);
  CHECK(b.out.find("aa2") != std::string::npos);
  CHECK(b.out.find("config") != std::string::npos);

  const std::string lines = slurp(jsonl_path);
  CHECK(lines.find("\"type\":\"metadata\"") != std::string::npos);
  CHECK(lines.find("\"label\":\"aa1\"") != std::string::npos);
  CHECK(lines.find("\"label\":\"aa2\"") != std::string::npos);
  CHECK(lines.find("\"checksum_ok\":true") != std::string::npos);
}

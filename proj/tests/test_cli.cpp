#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "synthetic.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef COFEDREC_CLI_PATH
#define COFEDREC_CLI_PATH "cofedrec"
#endif

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COFEDREC_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path sandbox() {
  const fs::path dir = fs::temp_directory_path() / "cofedrec_cli_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_tiny_dataset() {
  const auto ratings = cofedrec::testutil::planted_ratings(16, 24, 8, 12, 77);
  const fs::path p = sandbox() / "tiny.csv";
  std::ofstream out(p);
  out << "user,item,rating,timestamp\n";
  for (const auto& r : ratings)
    out << r.user_id << "," << r.item_id << "," << r.rating << "," << r.timestamp << "\n";
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run writes config, log, metrics, summary and checkpoint") {
  const auto data = write_tiny_dataset();
  const auto out = sandbox() / "run1";
  fs::remove_all(out);
  const int code = run_cli("run --data " + data.string() +
                           " --rounds 3 --dim 4 --item-clusters 2 --batch-size 32" +
                           " --seed 5 --out " + out.string());
  REQUIRE(code == 0);
  CHECK(fs::exists(out / "config.cfg"));
  CHECK(fs::exists(out / "run_log.jsonl"));
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "summary.json"));
  CHECK(fs::exists(out / "checkpoint" / "manifest.json"));
  CHECK(fs::exists(out / "checkpoint" / "client_embeddings.bin"));

  const std::string metrics = slurp(out / "metrics.csv");
  CHECK(metrics.find("# config=") == 0);
  CHECK(metrics.find("seed=5") != std::string::npos);
}

TEST_CASE("metrics files are byte-identical across worker counts") {
  const auto data = write_tiny_dataset();
  const auto out1 = sandbox() / "det1";
  const auto out2 = sandbox() / "det2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const std::string base = "run --data " + data.string() +
                           " --rounds 3 --dim 4 --item-clusters 2 --batch-size 32 --seed 9 ";
  REQUIRE(run_cli(base + "--workers 1 --out " + out1.string()) == 0);
  REQUIRE(run_cli(base + "--workers 3 --out " + out2.string()) == 0);
  CHECK(slurp(out1 / "metrics.csv") == slurp(out2 / "metrics.csv"));
  CHECK(slurp(out1 / "summary.json") == slurp(out2 / "summary.json"));
  CHECK(slurp(out1 / "run_log.jsonl") == slurp(out2 / "run_log.jsonl"));
}

TEST_CASE("eval reproduces the run's best-round metrics from the checkpoint") {
  const auto out = sandbox() / "run1";
  REQUIRE(fs::exists(out / "checkpoint"));
  const int code = run_cli("eval --checkpoint " + (out / "checkpoint").string() + " --out " +
                           (sandbox() / "eval.json").string());
  CHECK(code == 0);
}

TEST_CASE("diagnose writes a histogram and the flattened dump") {
  const auto out = sandbox() / "run1";
  const auto diag = sandbox() / "diag";
  const int code = run_cli("diagnose --checkpoint " + (out / "checkpoint").string() +
                           " -k 2 --out " + diag.string());
  REQUIRE(code == 0);
  CHECK(fs::exists(diag / "histogram.csv"));
  CHECK(fs::exists(diag / "clients_flat.bin"));
}

TEST_CASE("prepare exports splits and id maps") {
  const auto data = write_tiny_dataset();
  const auto out = sandbox() / "prep";
  const int code = run_cli("prepare --data " + data.string() + " --out " + out.string());
  REQUIRE(code == 0);
  CHECK(fs::exists(out / "splits.csv"));
  CHECK(fs::exists(out / "user_map.csv"));
  CHECK(fs::exists(out / "item_map.csv"));
}

TEST_CASE("sweep emits one row per value") {
  const auto data = write_tiny_dataset();
  const auto out = sandbox() / "sweep";
  const int code = run_cli("sweep --data " + data.string() +
                           " --rounds 2 --dim 4 --item-clusters 2 --batch-size 32" +
                           " --param lambda --values 0.001 0.01 --out " + out.string());
  REQUIRE(code == 0);
  const std::string csv = slurp(out / "sweep.csv");
  CHECK(csv.find("0.001") != std::string::npos);
  CHECK(csv.find("0.01") != std::string::npos);
}

TEST_CASE("exit codes: 1 for config errors, 2 for runtime errors") {
  CHECK(run_cli("run --out /tmp/cofedrec_nocfg") == 1);           // no dataset path
  CHECK(run_cli("run --data /nonexistent.csv --out /tmp/x") == 2);  // missing file
  const auto data = write_tiny_dataset();
  CHECK(run_cli("run --data " + data.string() + " --ablation bogus --out /tmp/x") == 1);
  CHECK(run_cli("sweep --data " + data.string() + " --param bogus --values 1 --out /tmp/x") == 1);
}

}  // TEST_SUITE

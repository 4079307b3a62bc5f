// Copyright 2026 The dictpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dictpfl/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string temp_path(const std::string& stem) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path();
  return (dir / ("dictpfl_cli_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++) + "_" + stem))
      .string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the installed binary through the shell; `env_prefix` may carry
// variable assignments like "DICTPFL_SEED=7 ".
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string out_path = temp_path("stdout");
  const std::string err_path = temp_path("stderr");
  const std::string cmd = env_prefix + "'" + DICTPFL_CLI_PATH + "' " + args +
                          " >'" + out_path + "' 2>'" + err_path + "'";
  const int rc = std::system(cmd.c_str());
  CliResult res;
  if (WIFEXITED(rc)) res.exit_code = WEXITSTATUS(rc);
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  std::filesystem::remove(out_path);
  std::filesystem::remove(err_path);
  return res;
}

// Small, fast run shared by most cases.
const char kTinyRun[] =
    "run --strategy dictpfl --clients 2 --rounds 3 --hidden 8 --dim 8 "
    "--classes 3 --samples-per-class 12 --lr 0.3 --seed 9";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

// Value of a "key=value" line in dryrun output, or empty.
std::string lookup(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

const std::string kCsvHeader =
    "round,local_train_s,encrypt_s,upload_s,aggregate_s,download_s,"
    "decrypt_s,update_s,ciphertext_up_bytes,ciphertext_down_bytes,"
    "plaintext_up_bytes,plaintext_down_bytes,ct_count,loss,accuracy";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("metrics serializer emits the documented table") {
  dictpfl::protocol::RoundMetrics m;
  m.round = 1;
  m.local_train_s = 0.5;
  m.ciphertext_up_bytes = 123;
  m.loss = 1.25;
  m.accuracy = 0.75;
  std::ostringstream out;
  const std::vector<dictpfl::protocol::RoundMetrics> rounds = {m};
  dictpfl::cli::write_metrics_csv(out, rounds);
  std::istringstream lines(out.str());
  std::string header;
  std::string row;
  REQUIRE(std::getline(lines, header));
  REQUIRE(std::getline(lines, row));
  CHECK(header == kCsvHeader);
  CHECK(row == "1,0.5,0,0,0,0,0,0,123,0,0,0,0,1.25,0.75");
}

TEST_CASE("a run prints one csv row per round") {
  const CliResult res = run_cli(kTinyRun);
  CHECK(res.exit_code == 0);
  CHECK(res.err.empty());
  std::istringstream lines(res.out);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == kCsvHeader);
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    const auto fields = split(line, ',');
    REQUIRE(fields.size() == 15);
    CHECK(fields[0] == std::to_string(rows));
    CHECK(std::stod(fields[13]) > 0.0);  // loss
  }
  CHECK(rows == 3);
}

TEST_CASE("identical invocations produce identical bytes") {
  const CliResult a = run_cli(kTinyRun);
  const CliResult b = run_cli(kTinyRun);
  CHECK(a.exit_code == 0);
  CHECK(b.exit_code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("environment seed overrides the flag") {
  const CliResult flag_seven = run_cli(
      "run --strategy dictpfl --clients 2 --rounds 2 --hidden 8 --dim 8 "
      "--classes 3 --samples-per-class 12 --seed 7");
  const CliResult env_seven = run_cli(
      "run --strategy dictpfl --clients 2 --rounds 2 --hidden 8 --dim 8 "
      "--classes 3 --samples-per-class 12 --seed 1",
      "DICTPFL_SEED=7 ");
  const CliResult flag_one = run_cli(
      "run --strategy dictpfl --clients 2 --rounds 2 --hidden 8 --dim 8 "
      "--classes 3 --samples-per-class 12 --seed 1");
  CHECK(env_seven.exit_code == 0);
  CHECK(env_seven.out == flag_seven.out);
  CHECK(env_seven.out != flag_one.out);

  const CliResult junk = run_cli(kTinyRun, "DICTPFL_SEED=abc ");
  CHECK(junk.exit_code == 2);
  CHECK(junk.err.find("configuration error") != std::string::npos);
}

TEST_CASE("out file captures the table and stdout gets a summary") {
  const std::string csv = temp_path("metrics.csv");
  const CliResult res = run_cli(std::string(kTinyRun) + " --out '" + csv + "'");
  CHECK(res.exit_code == 0);
  CHECK(res.out.rfind("strategy=dictpfl", 0) == 0);
  CHECK(res.out.find("rounds=3") != std::string::npos);
  CHECK(res.out.find("final_loss=") != std::string::npos);
  CHECK(res.out.find("up_bytes=") != std::string::npos);
  const std::string table = slurp(csv);
  CHECK(table.rfind(kCsvHeader, 0) == 0);
  std::filesystem::remove(csv);
}

TEST_CASE("configuration problems exit with code 2") {
  CHECK(run_cli("").exit_code == 2);  // missing subcommand
  CHECK(run_cli("run --strategy bogus").exit_code == 2);
  CHECK(run_cli("run --rounds 0").exit_code == 2);
  const CliResult bad = run_cli(
      "run --clients 0 --rounds 1 --hidden 8 --dim 8 --classes 3 "
      "--samples-per-class 12");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("configuration error") != std::string::npos);
  CHECK(run_cli("run --rounds 1 --dataset /nonexistent.bin").exit_code == 2);
  CHECK(run_cli("dryrun").exit_code == 2);  // manifest is required
  CHECK(run_cli("dryrun --manifest /nonexistent.txt").exit_code == 2);
}

TEST_CASE("runtime problems exit with code 3") {
  const CliResult res = run_cli(std::string(kTinyRun) +
                                " --out /nonexistent_dir/metrics.csv");
  CHECK(res.exit_code == 3);
  CHECK(res.err.find("runtime error") != std::string::npos);

  // A wildly unstable learning rate diverges mid-flight.
  const CliResult diverged = run_cli(
      "run --strategy full --clients 2 --rounds 6 --hidden 8 --dim 8 "
      "--classes 3 --samples-per-class 12 --lr 1e130");
  CHECK(diverged.exit_code == 3);
}

TEST_CASE("config files feed options and flags take precedence") {
  const std::string cfg = temp_path("session.cfg");
  {
    std::ofstream f(cfg);
    f << "strategy=dictpfl\n"
      << "clients=2\n"
      << "rounds=3\n"
      << "hidden=8\n"
      << "dim=8\n"
      << "classes=3\n"
      << "samples-per-class=12\n"
      << "lr=0.3\n"
      << "seed=9\n";
  }
  const CliResult from_file = run_cli("run --config '" + cfg + "'");
  const CliResult from_flags = run_cli(kTinyRun);
  CHECK(from_file.exit_code == 0);
  CHECK(from_file.out == from_flags.out);

  // The command line overrides the file.
  const CliResult overridden =
      run_cli("run --config '" + cfg + "' --seed 11");
  const CliResult direct = run_cli(
      "run --strategy dictpfl --clients 2 --rounds 3 --hidden 8 --dim 8 "
      "--classes 3 --samples-per-class 12 --lr 0.3 --seed 11");
  CHECK(overridden.exit_code == 0);
  CHECK(overridden.out == direct.out);
  CHECK(overridden.out != from_file.out);
  std::filesystem::remove(cfg);
}

TEST_CASE("lattice backend smoke run") {
  const CliResult res = run_cli(
      "run --strategy dictpfl --backend rlwe --clients 2 --rounds 2 "
      "--hidden 8 --dim 8 --classes 3 --samples-per-class 12 --seed 3");
  CHECK(res.exit_code == 0);
  CHECK(res.out.rfind(kCsvHeader, 0) == 0);
}

TEST_CASE("dry run reports the footprint and the reduction") {
  const std::string manifest =
      std::string(DICTPFL_SOURCE_DIR) + "/data/manifests/vit_b.txt";
  const CliResult res =
      run_cli("dryrun --manifest '" + manifest + "' --strategy dictpfl "
              "--rank 4 --prune 0.7 --clients 10");
  CHECK(res.exit_code == 0);
  CHECK(lookup(res.out, "strategy") == "dictpfl");
  CHECK(lookup(res.out, "model_elements") == "86292480");
  CHECK(lookup(res.out, "enc_elements_warmup") == "338848");
  CHECK(lookup(res.out, "enc_elements_steady") == "101654");
  CHECK(lookup(res.out, "ciphertext_bytes") == "25559040");
  const double elem_red = std::stod(lookup(res.out, "reduction_elements"));
  const double byte_red = std::stod(lookup(res.out, "reduction_bytes"));
  CHECK(elem_red > 100.0);
  CHECK(elem_red < 1000.0);
  CHECK(byte_red > 100.0);
  CHECK(byte_red < 1000.0);

  const CliResult full =
      run_cli("dryrun --manifest '" + manifest + "' --strategy full");
  CHECK(full.exit_code == 0);
  CHECK(lookup(full.out, "enc_elements_steady") == "86292480");
  // The baseline reports no reduction against itself.
  CHECK(lookup(full.out, "reduction_elements").empty());
}

TEST_SUITE_END();

// Copyright 2026 The softbridge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "softbridge/cli.hpp"
#include "softbridge/errors.hpp"
#include "softbridge/io.hpp"

using namespace softbridge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("softbridge_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "softbridge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("csv: round trip is bit exact") {
  TempDir dir;
  io::CsvTable t;
  t.header = {"a", "b", "c"};
  t.rows = {{0.1, 1.0 / 3.0, -2.5e-300},
            {std::numeric_limits<double>::max(), std::numeric_limits<double>::denorm_min(), -0.0},
            {123456789.123456789, 1e22, std::nextafter(1.0, 2.0)}};
  io::write_csv(dir.path / "t.csv", t);
  const io::CsvTable back = io::read_csv(dir.path / "t.csv");
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::bit_cast<std::uint64_t>(back.rows[i][j]) == std::bit_cast<std::uint64_t>(t.rows[i][j]));
    }
  }
  const std::string text = slurp(dir.path / "t.csv");
  CHECK(text.back() == '\n');
}

TEST_CASE("csv: empty table, NaN rejection, ragged rows, bad path") {
  TempDir dir;
  io::CsvTable t;
  t.header = {"x", "y"};
  io::write_csv(dir.path / "empty.csv", t);
  CHECK(slurp(dir.path / "empty.csv") == "x,y\n");

  t.rows = {{1.0, std::nan("")}};
  CHECK_THROWS_AS(io::write_csv(dir.path / "nan.csv", t), ContractError);
  CHECK_FALSE(fs::exists(dir.path / "nan.csv"));
  t.rows = {{1.0, std::numeric_limits<double>::infinity()}};
  CHECK_THROWS_AS(io::write_csv(dir.path / "inf.csv", t), ContractError);
  t.rows = {{1.0}};
  CHECK_THROWS_AS(io::write_csv(dir.path / "ragged.csv", t), ContractError);

  t.rows = {{1.0, 2.0}};
  try {
    io::write_csv(dir.path / "missing" / "deeper" / "x.csv", t);
    FAIL("expected an I/O error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("x.csv") != std::string::npos);
  }
}

TEST_CASE("config: parse, comments, duplicates, unknown keys") {
  const auto cfg = io::KeyValueConfig::parse("# comment\nsteps = 12\nname = \"pen dulum\"  # trailing\nflag = true\n");
  CHECK(cfg.get_int("steps", 0) == 12);
  CHECK(cfg.get_string("name", "") == "pen dulum");
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_double("missing", 2.5) == 2.5);
  CHECK_NOTHROW(cfg.require_known({"steps", "name", "flag"}));
  CHECK_THROWS_AS(cfg.require_known({"steps", "name"}), UsageError);
  CHECK_THROWS_AS(io::KeyValueConfig::parse("a = 1\na = 2\n"), UsageError);
  CHECK_THROWS_AS(io::KeyValueConfig::parse("just words\n"), UsageError);
  const auto bad = io::KeyValueConfig::parse("n = 1.5x\nb = maybe\n");
  CHECK_THROWS_AS(bad.get_double("n", 0.0), UsageError);
  CHECK_THROWS_AS(bad.get_int("n", 0), UsageError);
  CHECK_THROWS_AS(bad.get_bool("b", false), UsageError);
}

TEST_CASE("checkpoint: round trip and layout") {
  TempDir dir;
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Vector b{{-1.5, 0.25}};
  const ParamList params{{"a", 2, 3, std::span<double>(a.data(), 6)}, {"b", 2, 1, std::span<double>(b.data(), 2)}};
  io::write_checkpoint(dir.path / "c.bin", params);

  const std::string bytes = slurp(dir.path / "c.bin");
  CHECK(bytes.substr(0, 8) == std::string("SBRIDGE\0", 8));
  std::uint32_t version = 0, count = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&count, bytes.data() + 12, 4);
  CHECK(version == 1);
  CHECK(count == 2);
  // Header: 16 + (4 + 1 + 16) * 2, then 8 doubles.
  CHECK(bytes.size() == 16 + 42 + 8 * 8);
  double first = 0.0, second = 0.0;
  std::memcpy(&first, bytes.data() + 58, 8);
  std::memcpy(&second, bytes.data() + 66, 8);
  CHECK(first == 1.0);
  CHECK(second == 4.0);  // column-major

  Matrix a2 = Matrix::Zero(2, 3);
  Vector b2 = Vector::Zero(2);
  const ParamList into{{"a", 2, 3, std::span<double>(a2.data(), 6)}, {"b", 2, 1, std::span<double>(b2.data(), 2)}};
  io::read_checkpoint(dir.path / "c.bin", into);
  CHECK(a2 == a);
  CHECK(b2 == b);

  Vector wrong = Vector::Zero(3);
  const ParamList bad{{"a", 2, 3, std::span<double>(a2.data(), 6)}, {"b", 3, 1, std::span<double>(wrong.data(), 3)}};
  CHECK_THROWS_AS(io::read_checkpoint(dir.path / "c.bin", bad), ShapeError);
  const ParamList renamed{{"a", 2, 3, std::span<double>(a2.data(), 6)}, {"z", 2, 1, std::span<double>(b2.data(), 2)}};
  CHECK_THROWS_AS(io::read_checkpoint(dir.path / "c.bin", renamed), ShapeError);
}

TEST_CASE("run directory: staged, manifest last, abandoned runs vanish") {
  TempDir dir;
  const fs::path target = dir.path / "run";
  {
    io::RunDirectory rd(target);
    std::ofstream(rd.file("sub/a.txt")) << "hello";
    CHECK_FALSE(fs::exists(target));
  }
  CHECK_FALSE(fs::exists(target));
  CHECK(fs::is_empty(dir.path));

  {
    io::RunDirectory rd(dir.path / "run/");
    std::ofstream(rd.file("a.txt")) << "hello";
    rd.finalize("test", 3, 0.5);
  }
  REQUIRE(fs::exists(target / "manifest.json"));
  const auto m = nlohmann::json::parse(slurp(target / "manifest.json"));
  CHECK(m["artifact_version"] == io::kArtifactVersion);
  CHECK(m["seed"] == 3);
  CHECK(m["files"].size() == 1);
  CHECK(m["files"][0]["path"] == "a.txt");
  CHECK(m["files"][0]["fnv1a64"] == io::hex64(io::fnv1a_file(target / "a.txt")));

  // A previous run may be replaced; a foreign directory may not.
  {
    io::RunDirectory again(target);
    std::ofstream(again.file("b.txt")) << "x";
    again.finalize("test", 4, 0.1);
  }
  CHECK_FALSE(fs::exists(target / "a.txt"));
  fs::create_directories(dir.path / "foreign");
  std::ofstream(dir.path / "foreign" / "keep.txt") << "mine";
  CHECK_THROWS_AS(io::RunDirectory(dir.path / "foreign"), UsageError);
}

TEST_CASE("fnv1a of a known string") {
  TempDir dir;
  std::ofstream(dir.path / "f") << "a";
  CHECK(io::fnv1a_file(dir.path / "f") == 0xaf63dc4c8601ec8cULL);
  CHECK(io::hex64(0xabcULL) == "0000000000000abc");
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("usage and help exit codes") {
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  CHECK(run_cli({"bias", "--help"}).code == cli::kExitOk);
  CHECK(run_cli({}).code == cli::kExitUsage);
  const Run bad = run_cli({"launch"});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("verify") != std::string::npos);
  CHECK(run_cli({"bias", "--frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"bias", "--dims", "19,x"}).code == cli::kExitUsage);
  CHECK(run_cli({"train", "--env", "cartpole"}).code == cli::kExitUsage);
}

TEST_CASE("config keys are checked") {
  TempDir dir;
  std::ofstream(dir.path / "c.cfg") << "k = 6\nbogus = 1\n";
  const Run r = run_cli({"bias", "--config", (dir.path / "c.cfg").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("bogus") != std::string::npos);
}

TEST_CASE("bias writes the documented CSV") {
  TempDir dir;
  const fs::path out = dir.path / "bias.csv";
  const Run r = run_cli({"bias", "--k", "6", "--dims", "19,21,38", "--out", out.string()});
  REQUIRE(r.code == cli::kExitOk);
  const io::CsvTable t = io::read_csv(out);
  CHECK(t.header == std::vector<std::string>{"K", "per_dim_kl_forward", "per_dim_kl_reverse", "G_d19",
                                             "G_d21", "G_d38", "entropy_d19", "entropy_d21",
                                             "entropy_d38"});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][0] == 6.0);
  CHECK(std::abs(t.rows[0][3] - 0.085) < 0.005);
  CHECK(std::abs(t.rows[0][4] - 0.094) < 0.005);
  CHECK(std::abs(t.rows[0][5] - 0.169) < 0.005);

  // Directory form gets a config echo and a manifest.
  const Run d = run_cli({"--seed", "4", "bias", "--k", "4", "--dims", "2", "--out", (dir.path / "b").string()});
  REQUIRE(d.code == cli::kExitOk);
  CHECK(fs::exists(dir.path / "b" / "bias.csv"));
  CHECK(fs::exists(dir.path / "b" / "manifest.json"));
  const auto cfg = nlohmann::json::parse(slurp(dir.path / "b" / "config.json"));
  CHECK(cfg["k"] == 4);
  CHECK(cfg["seed"] == 4);
}

TEST_CASE("global flags work after the subcommand") {
  TempDir dir;
  const Run r = run_cli({"bias", "--k", "3", "--dims", "1", "--seed", "9", "--out", (dir.path / "x").string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto m = nlohmann::json::parse(slurp(dir.path / "x" / "manifest.json"));
  CHECK(m["seed"] == 9);
}

TEST_CASE("small verify run reports and exits 0") {
  TempDir dir;
  const Run r = run_cli({"verify", "--instances", "5", "--mc-samples", "20000", "--out", (dir.path / "v").string()});
  CHECK(r.code == cli::kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["passed"] == true);
  CHECK(fs::exists(dir.path / "v" / "verify.json"));
}

TEST_CASE("train and infer-bench write their files") {
  TempDir dir;
  std::ofstream(dir.path / "t.cfg") << "learn_starts = 50\nbatch = 16\nactor_width = 16\ncritic_width = 16\n"
                                       "K = 2\neval_every = 100\neval_episodes = 1\n";
  const fs::path run = dir.path / "run0";
  const Run r = run_cli({"train", "--env", "pendulum", "--steps", "100", "--config",
                         (dir.path / "t.cfg").string(), "--out", run.string() + "/"});
  REQUIRE(r.code == cli::kExitOk);
  for (const char* f : {"curve.csv", "config.json", "checkpoint.bin", "final_eval.csv", "stats.json", "manifest.json"}) {
    CHECK(fs::exists(run / f));
  }
  const io::CsvTable curve = io::read_csv(run / "curve.csv");
  CHECK(curve.header == std::vector<std::string>{"step", "eval_return_mean", "eval_return_std", "alpha", "mean_energy"});
  CHECK(curve.rows.size() == 1);
  const auto cfg = nlohmann::json::parse(slurp(run / "config.json"));
  CHECK(cfg["K"] == 2);
  CHECK(cfg["total_steps"] == 100);

  const Run b = run_cli({"infer-bench", "--k", "2,3", "--width", "8", "--n", "50", "--out", (dir.path / "bench").string()});
  REQUIRE(b.code == cli::kExitOk);
  const io::CsvTable bench = io::read_csv(dir.path / "bench" / "bench.csv");
  REQUIRE(bench.rows.size() == 2);
  CHECK(bench.rows[0][5] == 2.0);
  CHECK(bench.rows[1][5] == 3.0);
}

}  // TEST_SUITE

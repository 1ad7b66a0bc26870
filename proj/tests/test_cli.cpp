// Copyright 2026 The decq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "decq/cli.hpp"
#include "decq/io.hpp"

namespace fs = std::filesystem;
using namespace decq;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "decq");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  // Keep test logs readable.
  std::ostringstream sink;
  auto* old_out = std::cout.rdbuf(sink.rdbuf());
  auto* old_err = std::cerr.rdbuf(sink.rdbuf());
  const int code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("decq_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& text = {}) const {
    const auto p = path / name;
    if (!text.empty()) write_text_file(p, text);
    return p.string();
  }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}) == kExitUsage);
  CHECK(run({"frobnicate"}) == kExitUsage);
  CHECK(run({"graph", "--variant", "sideways"}) == kExitUsage);
  CHECK(run({"--threads", "0", "fig7"}) == kExitUsage);
  CHECK(run({"--help"}) == kExitOk);
}

TEST_CASE("validate") {
  TempDir tmp;
  const auto good = tmp.file("pd.json", R"({"builder": "pd"})");
  CHECK(run({"validate", "--config", good}) == kExitOk);

  std::ostringstream os;
  os << R"({"num_dms": 1, "num_states": 1, "action_counts": [2], "costs": [[[0, 1]]],)"
     << R"( "kernel": [[[1.0], [0.9]]], "discounts": [0.5], "initial_dist": [1.0]})";
  const auto bad = tmp.file("bad.json", os.str());
  const auto out = tmp.file("report.txt");
  CHECK(run({"validate", "--config", bad, "--out", out}) == kExitValidation);
  CHECK(slurp(out).find("violation:") != std::string::npos);
  CHECK(run({"validate"}) == kExitValidation);
  CHECK(run({"validate", "--config", tmp.file("missing.json")}) == kExitValidation);
}

TEST_CASE("graph and solve") {
  TempDir tmp;
  const auto cfg = tmp.file("pd.json", R"({"builder": "pd", "params": {"gamma": 0.1}})");
  const auto out = tmp.file("graph.json");
  CHECK(run({"graph", "--config", cfg, "--out", out}) == kExitOk);
  const auto doc = read_json_file(out);
  CHECK(doc["certificate"]["weakly_acyclic"] == true);
  CHECK(doc["certificate"]["equilibria"] == nlohmann::json({5, 15}));

  const auto sol = tmp.file("solve.json");
  CHECK(run({"solve", "--config", cfg, "--policy", "5", "--out", sol}) == kExitOk);
  CHECK(read_json_file(sol)["at_equilibrium"] == true);
  CHECK(run({"solve", "--config", cfg, "--policy", "16"}) == kExitValidation);
}

TEST_CASE("learner runs write CSV and are reproducible") {
  TempDir tmp;
  const auto cfg = tmp.file("run.json", R"({"builder": "pd",
    "learner": {"delta": 0.05}, "schedule": {"kind": "constant", "T": 300},
    "num_updates": 15, "start": 0, "seed": 3, "diagnostics": true})");
  const auto a = tmp.file("a.csv"), b = tmp.file("b.csv"), c = tmp.file("c.csv");
  CHECK(run({"run-coupled", "--config", cfg, "--out", a}) == kExitOk);
  CHECK(run({"run-coupled", "--config", cfg, "--out", b, "--threads", "2"}) == kExitOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind("k,policy,label,at_equilibrium,reference,agreement,q_error_0,q_error_1\n",
                       0) == 0);
  CHECK(run({"run-coupled", "--config", cfg, "--out", c, "--seed", "4"}) == kExitOk);
  CHECK(slurp(a) != slurp(c));
  CHECK(run({"run-alg1", "--config", cfg, "--out", c}) == kExitOk);
  CHECK(run({"run-alg2", "--config", cfg, "--out", c}) == kExitOk);
  CHECK(slurp(c).rfind("k,policy,label,at_equilibrium,q_error_0", 0) == 0);
  CHECK(run({"run-baseline", "--config", cfg, "--out", c}) == kExitOk);
  CHECK(slurp(c).rfind("k,policy,label,at_equilibrium\n0,0,\"0,0|0,0\",0\n", 0) == 0);

  const auto bad = tmp.file("bad.json", R"({"builder": "pd", "learner": {"rho": 0}})");
  CHECK(run({"run-alg1", "--config", bad}) == kExitValidation);
}

TEST_CASE("table1 output does not depend on threads") {
  TempDir tmp;
  const auto cfg = tmp.file("t.json", R"({"pd": {"gamma": 0.1}, "T": [10, 30],
    "num_updates": 20, "starts": [0, 5], "seeds_per_start": 2})");
  const auto a = tmp.file("a.csv"), b = tmp.file("b.csv");
  CHECK(run({"table1", "--config", cfg, "--out", a, "--threads", "1"}) == kExitOk);
  CHECK(run({"table1", "--config", cfg, "--out", b, "--threads", "4"}) == kExitOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind("T,frac_eq,frac_agree\n", 0) == 0);
}

TEST_CASE("fig7 and teamgen") {
  TempDir tmp;
  const auto out = tmp.file("fig7.json");
  CHECK(run({"fig7", "--out", out}) == kExitOk);
  const auto doc = read_json_file(out);
  CHECK(doc.size() == 4);
  CHECK(doc[0]["unreachable"].size() == 6);
  CHECK(doc[2]["weakly_acyclic"] == true);

  const auto team = tmp.file("team.json");
  CHECK(run({"teamgen", "--seed", "2", "--num-states", "3", "--out", team}) == kExitOk);
  CHECK(run({"validate", "--config", team}) == kExitOk);
  CHECK(run({"graph", "--config", team, "--out", tmp.file("g.json")}) == kExitOk);
}

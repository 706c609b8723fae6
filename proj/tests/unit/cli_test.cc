/* Copyright 2026 The epd-sim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "epdsim/cli.h"

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "epdsim/metrics.h"
#include "support/temp_dir.h"

namespace epdsim {
namespace {

using fixture::slurp;
using fixture::TempDir;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = run_cli(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string config(const TempDir& dir, const std::string& deployment = "E-P-D",
                   int requests = 48) {
  return dir.write("cfg.json", R"({
  "deployment": ")" + deployment + R"(",
  "seed": 3,
  "workload": {"profile": "sharegpt4o-like", "requests": )" +
                                   std::to_string(requests) + R"(},
  "model": {"profile": "pangu7bvl-like"}
})");
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> out;
  std::istringstream in(row);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

TEST_CASE("run writes a report and prints a summary") {
  const TempDir dir;
  const std::string report = dir.file("r.json");
  const Outcome o = cli({"run", "--config", config(dir), "--report", report});
  CHECK(o.code == kExitOk);
  CHECK(o.out.rfind("E-P-D npus=3 requests=48 ttft_p99_ms=", 0) == 0);
  CHECK(o.out.find("goodput=") != std::string::npos);
  const RunReport r = report_from_json(slurp(report));
  CHECK(r.records.size() == 48);
  CHECK(r.seed == 3);
}

TEST_CASE("run without a report path prints the document") {
  const TempDir dir;
  const Outcome o = cli({"run", "--config", config(dir), "--format", "csv"});
  CHECK(o.code == kExitOk);
  CHECK(lines(o.out).size() == 1 + 48 + kCsvFooterLines);
  CHECK(o.err.rfind("E-P-D npus=3", 0) == 0);
}

TEST_CASE("unknown deployment token exits 2 naming it") {
  const TempDir dir;
  const Outcome o =
      cli({"run", "--config", config(dir), "--deployment", "Q-D"});
  CHECK(o.code == kExitInvalid);
  CHECK(o.err.find("'Q'") != std::string::npos);
}

TEST_CASE("same seed gives identical report bytes") {
  const TempDir dir;
  const std::string cfg = config(dir, "(E-P)-D");
  REQUIRE(cli({"run", "--config", cfg, "--seed", "1", "--report",
               dir.file("a.json")}).code == kExitOk);
  REQUIRE(cli({"run", "--config", cfg, "--seed", "1", "--report",
               dir.file("b.json")}).code == kExitOk);
  CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));
  REQUIRE(cli({"run", "--config", cfg, "--seed", "2", "--report",
               dir.file("c.json")}).code == kExitOk);
  CHECK(slurp(dir.file("a.json")) != slurp(dir.file("c.json")));
}

TEST_CASE("flags override config fields") {
  const TempDir dir;
  const std::string report = dir.file("r.json");
  REQUIRE(cli({"run", "--config", config(dir), "--deployment", "(E-PD)",
               "--seed", "11", "--report", report})
              .code == kExitOk);
  const RunReport r = report_from_json(slurp(report));
  CHECK(r.deployment == "(E-PD)");
  CHECK(r.npu_count == 1);
  CHECK(r.seed == 11);
}

TEST_CASE("transfer toggles reach the engine") {
  const TempDir dir;
  const std::string cfg = config(dir, "E-P-D", 24);
  REQUIRE(cli({"run", "--config", cfg, "--pd-grouping", "off", "--report",
               dir.file("off.json")}).code == kExitOk);
  const RunReport off = report_from_json(slurp(dir.file("off.json")));
  CHECK(off.transfer.kv_mean_group_size == 1.0);
  CHECK(cli({"run", "--config", cfg, "--ep-prefetch", "maybe"}).code ==
        kExitInvalid);
}

TEST_CASE("config path defaults to the environment") {
  const TempDir dir;
  const std::string cfg = config(dir, "EP-D", 16);
  ::setenv("EPD_SIM_CONFIG", cfg.c_str(), 1);
  const Outcome o = cli({"run", "--report", dir.file("r.json")});
  ::unsetenv("EPD_SIM_CONFIG");
  CHECK(o.code == kExitOk);
  CHECK(o.out.rfind("EP-D npus=2 requests=16", 0) == 0);
}

TEST_CASE("event log is written on request") {
  const TempDir dir;
  const std::string log = dir.file("events.jsonl");
  REQUIRE(cli({"run", "--config", config(dir, "E-P-D", 8), "--report",
               dir.file("r.json"), "--event-log", log})
              .code == kExitOk);
  const auto rows = lines(slurp(log));
  CHECK(rows.size() > 8);
  CHECK(rows[0].find("\"event\":\"arrival\"") != std::string::npos);
}

TEST_CASE("sweep emits one row per cell") {
  const TempDir dir;
  const Outcome o = cli({"sweep", "--config", config(dir, "E-P-D", 32),
                         "--rates", "2,3", "--deployments", "E-P-D"});
  CHECK(o.code == kExitOk);
  const auto rows = lines(o.out);
  REQUIRE(rows.size() == 3);
  CHECK(fields(rows[0])[3] == "total_rate_rps");
  CHECK(fields(rows[1])[4] == "ok");
}

TEST_CASE("sweep normalizes the rate per NPU") {
  const TempDir dir;
  const Outcome o =
      cli({"sweep", "--config", config(dir, "E-P-D", 16), "--rates", "4",
           "--deployments", "(E-PD),E-P-D", "--jobs", "2"});
  REQUIRE(o.code == kExitOk);
  const auto rows = lines(o.out);
  REQUIRE(rows.size() == 3);
  CHECK(fields(rows[1])[0] == "(E-PD)");
  CHECK(std::stod(fields(rows[1])[3]) == 4.0);
  CHECK(fields(rows[2])[0] == "E-P-D");
  CHECK(std::stod(fields(rows[2])[3]) == 12.0);
}

TEST_CASE("sweep input errors exit 2") {
  const TempDir dir;
  const std::string cfg = config(dir);
  CHECK(cli({"sweep", "--config", cfg, "--rates", ""}).code == kExitInvalid);
  CHECK(cli({"sweep", "--config", cfg, "--rates", "2,x"}).code == kExitInvalid);
  CHECK(cli({"sweep", "--config", cfg, "--rates", "-1"}).code == kExitInvalid);
}

TEST_CASE("failed sweep cells are kept and the sweep exits 1") {
  const TempDir dir;
  const Outcome o = cli({"sweep", "--config", config(dir, "E-P-D", 16),
                         "--rates", "2,3", "--deployments", "E-P-D,Q-D",
                         "--cell-dir", dir.file("cells")});
  CHECK(o.code == kExitFailure);
  const auto rows = lines(o.out);
  REQUIRE(rows.size() == 1 + 2 * 2);
  CHECK(fields(rows[3])[4] == "failed");
  CHECK(fields(rows[4])[4] == "failed");
  CHECK(std::filesystem::exists(dir.file("cells/E-P-D_r2.000.json")));
}

TEST_CASE("compare reports each SLO regime") {
  const TempDir dir;
  const Outcome o =
      cli({"compare", "--config", config(dir, "E-P-D", 24), "--deployments",
           "E-P-D,TP1×2", "--slo", "2000:50", "--slo", "2000:80"});
  CHECK(o.code == kExitOk);
  const auto rows = lines(o.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].find("slo_attainment@2000/50") != std::string::npos);
  CHECK(rows[0].find("per_npu_effective_throughput@2000/80") !=
        std::string::npos);
  CHECK(cli({"compare", "--config", config(dir), "--slo", "fast"}).code ==
        kExitInvalid);
}

TEST_CASE("validate lists every problem") {
  const TempDir dir;
  Outcome o = cli({"validate", "--config", config(dir)});
  CHECK(o.code == kExitOk);
  CHECK(o.out == "0 errors\n");

  const std::string one = dir.write("one.json", R"({
    "deployment": "E-P-D",
    "workload": {"profile": "sharegpt4o-like"},
    "model": {}
  })");
  o = cli({"validate", "--config", one});
  CHECK(o.code == kExitInvalid);
  CHECK(o.out.find("model.profile") != std::string::npos);
  CHECK(o.out.find("\n1 error\n") != std::string::npos);

  const std::string two = dir.write("two.json", R"({
    "deployment": "Q-D",
    "workload": {"profile": "sharegpt4o-like"},
    "model": {"profile": "pangu7bvl-like"},
    "slo": {"ttft_max_ms": 0}
  })");
  o = cli({"validate", "--config", two});
  CHECK(o.code == kExitInvalid);
  CHECK(o.out.find("'Q'") != std::string::npos);
  CHECK(o.out.find("slo.ttft_max_ms") != std::string::npos);
  CHECK(o.out.find("\n2 errors\n") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == kExitInvalid);
  CHECK(cli({"frobnicate"}).code == kExitInvalid);
  CHECK(cli({"run", "--no-such-flag"}).code == kExitInvalid);
  CHECK(cli({"--help"}).code == kExitOk);
}

}  // namespace
}  // namespace epdsim

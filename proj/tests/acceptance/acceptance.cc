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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "epdsim/cli.h"
#include "epdsim/config.h"
#include "epdsim/engine.h"
#include "epdsim/error.h"
#include "epdsim/transfer.h"
#include "support/fixtures.h"
#include "support/notations.h"
#include "support/oracles.h"
#include "support/temp_dir.h"

namespace epdsim {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

RunConfig shipped(const std::string& name) {
  const ConfigLoad load =
      load_config(std::string(EPDSIM_CONFIG_DIR) + "/" + name);
  if (!load.ok()) throw Error("config " + name + ": " + load.errors.front());
  return load.config;
}

// Overlap ratios recomputed from the measured latency pairs.
Verdict overlap_arithmetic() {
  Verdict v;
  struct Row {
    double latency, window_or_exposed, percent;
  };
  const Row prefetch[] = {{8.145, 30.803, 100.0},   {15.819, 42.406, 100.0},
                          {17.019, 49.549, 100.0},  {38.776, 81.028, 100.0},
                          {80.771, 151.77, 100.0},  {729.724, 728.109, 99.78}};
  const Row kv[] = {{1127.45, 955.24, 15.27},
                    {715.53, 8.76, 98.78},
                    {1688.40, 1264.87, 25.08},
                    {1536.49, 1.16, 99.92}};
  double worst = 0.0;
  for (const Row& r : prefetch) {
    const double got = 100.0 * plan_prefetch(r.latency, r.window_or_exposed)
                                   .overlap_ratio;
    worst = std::max(worst, std::abs(got - r.percent));
  }
  for (const Row& r : kv) {
    const double got = 100.0 * overlap_metrics(r.latency, r.window_or_exposed);
    worst = std::max(worst, std::abs(got - r.percent));
  }
  // The published ratios are rounded to two decimals.
  if (worst > 0.01 + 1e-9) v.fail(format("max deviation %.4f pp", worst));
  v.detail += format("10 ratios, max deviation %.4f pp", worst);
  return v;
}

Verdict grouping_oracle() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> layers(1, 64);
  std::uniform_real_distribution<double> ms(0.0, 50.0);
  int mismatches = 0, worse = 0;
  for (int i = 0; i < 1000; ++i) {
    const int L = layers(rng);
    const double c = ms(rng), p = ms(rng), h = ms(rng);
    const int g = choose_group_size(L, c, p, h);
    if (g != oracle::best_group(L, c, p, h)) ++mismatches;
    if (kv_timeline(L, g, c, p, h).outcome.exposed >
        oracle::kv(L, 1, c, p, h).exposed + 1e-9)
      ++worse;
  }
  const double secs = seconds_since(t0);
  if (mismatches) v.fail(format("%d choices differ from enumeration", mismatches));
  if (worse) v.fail(format("%d choices expose more than g=1", worse));
  if (secs >= 5.0) v.fail(format("took %.2f s", secs));
  v.detail += format("1000 configs, %d mismatches, %.3f s", mismatches, secs);
  return v;
}

Verdict ablation() {
  Verdict v;
  const RunConfig base = shipped("ablation.json");
  std::string magnitudes;
  for (double rate : {2.0, 3.0}) {
    double sum[4] = {0, 0, 0, 0};
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      double ttft[4];
      for (int mask = 0; mask < 4; ++mask) {
        RunConfig cfg = base;
        cfg.seed = seed;
        cfg.workload.rate_per_npu = rate;
        cfg.engine.ep_prefetch = mask & 1;
        cfg.engine.pd_grouping = mask & 2;
        ttft[mask] = simulate(build_input(cfg)).report.ttft.mean;
        sum[mask] += ttft[mask];
      }
      const std::string cell = format("rate %.0f seed %llu", rate,
                                      static_cast<unsigned long long>(seed));
      if (!(ttft[1] < ttft[0])) v.fail(cell + ": prefetch alone did not help");
      if (!(ttft[2] < ttft[0])) v.fail(cell + ": grouping alone did not help");
      if (!(ttft[3] <= std::min(ttft[1], ttft[2])))
        v.fail(cell + ": both toggles worse than the better single one");
    }
    const auto cut = [&](int m) { return 100.0 * (1.0 - sum[m] / sum[0]); };
    magnitudes += format("%srate %.0f: prefetch -%.1f%%, grouping -%.1f%%, both -%.1f%%",
                         magnitudes.empty() ? "" : "; ", rate, cut(1), cut(2),
                         cut(3));
  }
  if (!v.pass) v.detail += "; ";
  v.detail += "mean TTFT over seeds 1-4, " + magnitudes;
  return v;
}

Verdict deployment_ordering() {
  Verdict v;
  const RunConfig base = shipped("compare.json");
  const std::vector<std::string> names = {"TP1×2",   "(E-PD)×2", "EP-D",
                                          "(E-P)-D", "(E-D)-P",  "E-P-D"};
  const auto t0 = Clock::now();
  std::map<std::string, RunReport> r;
  for (const auto& d : names) {
    RunConfig cfg = base;
    cfg.deployment = d;
    r[d] = simulate(build_input(cfg)).report;
  }
  const double secs = seconds_since(t0);

  double best_other = 0.0;
  for (const auto& d : names)
    if (d != "E-P-D") best_other = std::max(best_other, r[d].slo_attainment);
  const bool a = r["E-P-D"].slo_attainment >= best_other;
  if (!a)
    v.fail(format("(a) E-P-D attainment %.4f below %.4f",
                  r["E-P-D"].slo_attainment, best_other));

  const double tp1 = r["TP1×2"].tpot.mean;
  double worst_ratio = 0.0;
  for (const char* d : {"EP-D", "(E-P)-D", "(E-D)-P"})
    worst_ratio = std::max(worst_ratio, r[d].tpot.mean / tp1);
  if (!(worst_ratio <= 0.5))
    v.fail(format("(b) decode-disaggregated TPOT only %.1f%% below TP1",
                  100 * (1 - worst_ratio)));

  const double ttft_cut = 1.0 - r["(E-D)-P"].ttft.mean / r["EP-D"].ttft.mean;
  if (!(ttft_cut > 0.0)) v.fail("(c) (E-D)-P TTFT not below EP-D");

  const double good_gain = r["(E-P)-D"].per_npu_effective_throughput /
                               r["EP-D"].per_npu_effective_throughput -
                           1.0;
  if (!(good_gain > 0.0)) v.fail("(d) (E-P)-D goodput not above EP-D");
  if (secs >= 60.0) v.fail(format("grid took %.1f s", secs));

  if (!v.pass) v.detail += "; ";
  v.detail += format(
      "(a) E-P-D %.1f%% vs best other %.1f%%; (b) TPOT at least %.1f%% below "
      "TP1; (c) TTFT -%.1f%%; (d) goodput %+.1f%%; %.2f s",
      100 * r["E-P-D"].slo_attainment, 100 * best_other,
      100 * (1 - worst_ratio), 100 * ttft_cut, 100 * good_gain, secs);
  return v;
}

Verdict determinism() {
  Verdict v;
  const fixture::TempDir dir;
  const std::string cfg = std::string(EPDSIM_CONFIG_DIR) + "/compare.json";
  int compared = 0;
  for (const char* d : {"E-P-D", "(E-PD)×2", "(E-D)-P", "TP2"}) {
    std::string docs[2];
    for (int k = 0; k < 2; ++k) {
      const std::string path = dir.file("r" + std::to_string(k) + ".json");
      std::ostringstream out, err;
      const int code = run_cli({"run", "--config", cfg, "--deployment", d,
                                "--seed", "5", "--report", path},
                               out, err);
      if (code != kExitOk) v.fail(std::string(d) + ": exit " + std::to_string(code));
      docs[k] = fixture::slurp(path);
    }
    if (docs[0].empty() || docs[0] != docs[1])
      v.fail(std::string(d) + ": reports differ");
    ++compared;
  }
  v.detail += format("%d deployments run twice, reports byte-identical",
                     compared);
  return v;
}

Verdict dedup() {
  Verdict v;
  std::vector<Request> trace;
  for (int i = 0; i < 512; ++i)
    trace.push_back(fixture::image_request(i, i * 40.0, 560, 560,
                                           1000 + i % 256, 12, 16));
  const SimulationResult res = simulate(fixture::input("E-P-D", trace));
  const TransferStats& t = res.report.transfer;
  if (t.encode_executions != 256)
    v.fail(format("%lld encode executions", static_cast<long long>(t.encode_executions)));
  if (t.dedup_hits != 256)
    v.fail(format("%lld dedup hits", static_cast<long long>(t.dedup_hits)));
  if (res.report.completed != 512) v.fail("not every request completed");
  v.detail += format("512 requests over 256 images: %lld encodes, %lld dedup hits",
                     static_cast<long long>(t.encode_executions),
                     static_cast<long long>(t.dedup_hits));
  return v;
}

// Timestamps that must be non-decreasing along each request's path. A
// prefill batch may form before its features land, so batch start is
// ordered on its own chain.
const std::vector<std::vector<const char*>> kChains = {
    {"arrival", "encode_start", "encode_done", "feature_ready", "prefill_done",
     "kv_ready", "first_token", "done"},
    {"arrival", "prefill_start", "prefill_done"},
    {"kv_ready", "decode_step_first", "decode_step_last", "done"},
};

Verdict conservation_and_causality() {
  Verdict v;
  const std::vector<std::string> pool = {
      "TP1",      "TP2",      "TP1×2",   "E-PD",    "(E-PD)",  "EP-D",
      "(E-P)-D",  "(E-D)-P",  "E-P-D",   "(E-PD)×2", "(E-P-D)", "E-P-D×2",
      "(E-P)-D×2", "EP-D-D",  "E-P-D-D"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> count(20, 160), outputs(1, 96), imgs(0, 40);
  std::uniform_real_distribution<double> rate(0.5, 12.0), frac(0.0, 1.0);
  int requests = 0, gamma_violations = 0, first_violation = -1;
  double worst_gamma = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::string d = pool[pick(rng)];
    WorkloadProfile p = workload_profile(trial % 2 ? "sharegpt4o-like"
                                                   : "visualweb-like");
    p.per_npu_rate = rate(rng);
    p.output_tokens = outputs(rng);
    p.multimodal_fraction = frac(rng);
    p.image_pool = imgs(rng);
    const std::uint64_t seed = rng();
    const auto n = static_cast<std::size_t>(count(rng));
    SimulationInput in = fixture::input(
        d, generate_trace(p, parse_deployment(d).devices, INFINITY, seed, n),
        seed);
    const std::string tag = format("trial %d (%s)", trial, d.c_str());

    SimulationResult res;
    try {
      res = simulate(in);
    } catch (const std::exception& e) {
      v.fail(tag + ": " + e.what());
      continue;
    }
    requests += static_cast<int>(n);
    const RunReport& rep = res.report;
    if (rep.completed + rep.rejected != static_cast<std::int64_t>(n))
      v.fail(tag + ": requests did not all terminate");
    std::int64_t generated = 0, expected = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ts = res.requests[i].timestamps;
      for (const auto& chain : kChains) {
        double prev = -INFINITY;
        for (const char* key : chain) {
          auto it = ts.find(key);
          if (it == ts.end()) continue;
          if (it->second < prev) v.fail(tag + ": " + key + " out of order");
          prev = it->second;
        }
      }
      if (rep.records[i].status == RequestStatus::kCompleted) {
        generated += res.generated_tokens[i];
        expected += rep.records[i].output_tokens;
      }
    }
    if (generated != expected) v.fail(tag + ": generated token count differs");

    SimulationInput quiet = in;
    quiet.interference = InterferenceMatrix::zero();
    const RunReport calm = simulate(quiet).report;
    for (std::size_t i = 0; i < n; ++i) {
      const RequestRecord& a = calm.records[i];
      const RequestRecord& b = rep.records[i];
      if (a.status != RequestStatus::kCompleted ||
          b.status != RequestStatus::kCompleted)
        continue;
      const double tol = 1e-9 * std::max(1.0, b.done);
      const double over = std::max(ttft(a) - ttft(b), tpot(a) - tpot(b));
      if (over > tol) {
        ++gamma_violations;
        worst_gamma = std::max(worst_gamma, over);
        if (first_violation < 0) first_violation = trial;
      }
    }
  }
  if (gamma_violations)
    v.fail(format("%d requests slower without interference (worst +%.3f ms, "
                  "first in trial %d)",
                  gamma_violations, worst_gamma, first_violation));
  if (!v.pass) v.detail += "; ";
  v.detail += format("100 triples, %d requests checked", requests);
  return v;
}

Verdict parser_suite() {
  Verdict v;
  int ok = 0;
  for (const auto& c : expected::notation_cases()) {
    try {
      const Deployment d = parse_deployment(c.notation);
      const std::string shape = expected::shape_mismatch(d, c);
      if (!shape.empty()) {
        v.fail(c.notation + ": " + shape);
        continue;
      }
      const std::string text = format_deployment(d);
      if (text != c.canonical || !(parse_deployment(text) == d)) {
        v.fail(c.notation + ": round trip gave " + text);
        continue;
      }
      ++ok;
    } catch (const std::exception& e) {
      v.fail(c.notation + ": " + e.what());
    }
  }
  if (!v.pass) v.detail += "; ";
  v.detail += format("%d/%zu notations parse and round-trip", ok,
                     expected::notation_cases().size());
  return v;
}

Verdict performance() {
  Verdict v;
  RunConfig cfg = shipped("compare.json");
  double worst = 0.0;
  for (const char* d : {"E-P-D", "TP1×2", "(E-PD)×2"}) {
    cfg.deployment = d;
    const SimulationInput in = build_input(cfg);
    const auto t0 = Clock::now();
    const SimulationResult res = simulate(in);
    worst = std::max(worst, seconds_since(t0));
    if (res.report.records.size() != 512) v.fail("trace is not 512 requests");
  }
  if (worst >= 5.0) v.fail(format("%.2f s", worst));
  v.detail += format("slowest 512-request run %.3f s", worst);
  return v;
}

}  // namespace
}  // namespace epdsim

int main() {
  using namespace epdsim;
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"overlap arithmetic", overlap_arithmetic},
      {"grouping oracle equivalence", grouping_oracle},
      {"ablation direction", ablation},
      {"deployment ordering", deployment_ordering},
      {"determinism", determinism},
      {"dedup", dedup},
      {"conservation and causality", conservation_and_causality},
      {"parser suite", parser_suite},
      {"performance budget", performance},
  };
  int failed = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    std::printf("criterion %d %-28s %s  %s\n", index, name,
                v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

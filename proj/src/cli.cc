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

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "epdsim/config.h"
#include "epdsim/engine.h"
#include "epdsim/error.h"
#include "epdsim/metrics.h"
#include "epdsim/topology.h"
#include "epdsim/workload.h"

namespace epdsim {

namespace {

const std::vector<std::string> kCompareDefaults = {
    "TP1x2", "(E-PD)x2", "EP-D", "(E-P)-D", "(E-D)-P", "E-P-D"};

struct CommonFlags {
  std::string config;
  std::string deployment;
  std::optional<double> rate;
  std::optional<std::uint64_t> seed;
  std::string ep_prefetch;
  std::string pd_grouping;
  std::string report;
  std::string format = "json";
  std::string event_log;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config,
                  "Config file (default: $EPD_SIM_CONFIG)");
  cmd->add_option("--deployment", f.deployment, "Deployment notation");
  cmd->add_option("--rate-per-npu", f.rate, "Requests/s per NPU")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--ep-prefetch", f.ep_prefetch, "E-P feature prefetch")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--pd-grouping", f.pd_grouping, "P-D grouped KV transfer")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--report", f.report, "Output path (default: stdout)");
  cmd->add_option("--format", f.format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}));
}

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << data;
  if (!f) throw Error("failed writing '" + path + "'");
}

// Loads the config named by flag or environment, applies flag overrides, and
// validates. Returns nullopt after printing diagnostics.
std::optional<RunConfig> resolve(const CommonFlags& f, std::ostream& err) {
  std::string path = f.config;
  if (path.empty())
    if (const char* env = std::getenv("EPD_SIM_CONFIG")) path = env;
  ConfigLoad load;
  if (!path.empty()) load = load_config(path);
  Overrides o;
  if (!f.deployment.empty()) o.deployment = f.deployment;
  o.rate_per_npu = f.rate;
  o.seed = f.seed;
  if (!f.ep_prefetch.empty()) o.ep_prefetch = f.ep_prefetch == "on";
  if (!f.pd_grouping.empty()) o.pd_grouping = f.pd_grouping == "on";
  apply_overrides(load.config, o);
  if (load.ok()) load.errors = validate_config(load.config);
  if (load.ok()) return load.config;
  for (const auto& e : load.errors) err << "error: " << e << "\n";
  return std::nullopt;
}

std::string summary_line(const RunReport& r) {
  return r.deployment + " npus=" + std::to_string(r.npu_count) +
         " requests=" + std::to_string(r.records.size()) +
         " ttft_p99_ms=" + fmt(r.ttft.p99) + " tpot_p99_ms=" + fmt(r.tpot.p99) +
         " slo=" + fmt(100.0 * r.slo_attainment) + "%" +
         " goodput=" + fmt(r.per_npu_effective_throughput) + " tok/s/npu";
}

int cmd_run(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const std::optional<RunConfig> cfg = resolve(f, err);
  if (!cfg) return kExitInvalid;
  try {
    SimulationInput in = build_input(*cfg);
    in.engine.record_events = !f.event_log.empty();
    const SimulationResult res = simulate(in);
    const std::string doc =
        export_report(res.report, parse_report_format(f.format));
    if (f.report.empty()) {
      out << doc;
      err << summary_line(res.report) << "\n";
    } else {
      write_file(f.report, doc);
      out << summary_line(res.report) << "\n";
    }
    if (!f.event_log.empty()) write_file(f.event_log, res.event_log);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

struct Cell {
  std::string deployment;
  double rate = 0.0;
  int npus = 0;
  bool ok = false;
  std::string error;
  RunReport report;
};

Cell make_cell(const std::string& deployment, double rate) {
  Cell c;
  c.deployment = deployment;
  c.rate = rate;
  return c;
}

void run_cells(const RunConfig& base, std::vector<Cell>& cells, int jobs) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      try {
        RunConfig cfg = base;
        cfg.deployment = c.deployment;
        cfg.workload.rate_per_npu = c.rate;
        c.npus = parse_deployment(c.deployment).devices;
        c.report = simulate(build_input(cfg)).report;
        c.deployment = c.report.deployment;
        c.ok = true;
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  const int n = std::clamp<int>(jobs, 1, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string sweep_csv(const std::vector<Cell>& cells) {
  std::string s =
      "deployment,npus,rate_per_npu,total_rate_rps,status,requests,completed,"
      "rejected,ttft_mean_ms,ttft_p99_ms,tpot_mean_ms,tpot_p99_ms,"
      "slo_attainment,per_npu_effective_throughput,per_npu_raw_throughput,"
      "makespan_ms,error\n";
  for (const Cell& c : cells) {
    s += csv_field(c.deployment) + "," + std::to_string(c.npus) + "," +
         fmt(c.rate, 4) + "," + fmt(c.rate * c.npus, 4) + "," +
         (c.ok ? "ok" : "failed") + ",";
    if (c.ok) {
      const RunReport& r = c.report;
      s += std::to_string(r.records.size()) + "," + std::to_string(r.completed) +
           "," + std::to_string(r.rejected) + "," + fmt(r.ttft.mean, 4) + "," +
           fmt(r.ttft.p99, 4) + "," + fmt(r.tpot.mean, 4) + "," +
           fmt(r.tpot.p99, 4) + "," + fmt(r.slo_attainment, 6) + "," +
           fmt(r.per_npu_effective_throughput, 4) + "," +
           fmt(r.per_npu_raw_throughput, 4) + "," + fmt(r.makespan_ms, 4) + ",";
    } else {
      s += ",,,,,,,,,,,";
    }
    s += csv_field(c.error) + "\n";
  }
  return s;
}

std::string cell_filename(const Cell& c) {
  std::string plain = c.deployment;
  for (std::size_t p; (p = plain.find("\xC3\x97")) != std::string::npos;)
    plain.replace(p, 2, "x");
  std::string name;
  for (char ch : plain) {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-')
      name += ch;
    else if (ch == '(' || ch == ')')
      continue;
    else
      name += '_';
  }
  return name + "_r" + fmt(c.rate, 3) + ".json";
}

int cmd_sweep(const CommonFlags& f, const std::string& rates_arg,
              const std::string& deps_arg, const std::string& cell_dir,
              int jobs, std::ostream& out, std::ostream& err) {
  const std::optional<RunConfig> cfg = resolve(f, err);
  if (!cfg) return kExitInvalid;
  std::vector<double> rates;
  try {
    for (const auto& r : split_list(rates_arg)) {
      std::size_t used = 0;
      const double v = std::stod(r, &used);
      if (used != r.size() || !(v > 0.0)) throw std::invalid_argument(r);
      rates.push_back(v);
    }
  } catch (const std::exception&) {
    err << "error: --rates must be a comma-separated list of positive numbers\n";
    return kExitInvalid;
  }
  std::vector<std::string> deps =
      deps_arg.empty() ? std::vector<std::string>{cfg->deployment}
                       : split_list(deps_arg);
  if (rates.empty() || deps.empty()) {
    err << "error: sweep needs a non-empty --rates and --deployments list\n";
    return kExitInvalid;
  }
  std::vector<Cell> cells;
  for (const auto& d : deps)
    for (double r : rates) cells.push_back(make_cell(d, r));
  run_cells(*cfg, cells, jobs);

  bool failed = false;
  for (const Cell& c : cells) {
    if (!c.ok) {
      failed = true;
      err << "cell " << c.deployment << " @ " << fmt(c.rate, 3)
          << " failed: " << c.error << "\n";
    }
  }
  try {
    if (!cell_dir.empty()) {
      std::filesystem::create_directories(cell_dir);
      for (const Cell& c : cells)
        if (c.ok)
          write_file((std::filesystem::path(cell_dir) / cell_filename(c)).string(),
                     export_report(c.report, ReportFormat::kJson));
    }
    const std::string csv = sweep_csv(cells);
    if (f.report.empty())
      out << csv;
    else
      write_file(f.report, csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return failed ? kExitFailure : kExitOk;
}

std::optional<SloConfig> parse_slo(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) return std::nullopt;
  try {
    SloConfig slo{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    slo.validate();
    return slo;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int cmd_compare(const CommonFlags& f, const std::string& deps_arg,
                const std::vector<std::string>& slo_args, int jobs,
                std::ostream& out, std::ostream& err) {
  const std::optional<RunConfig> cfg = resolve(f, err);
  if (!cfg) return kExitInvalid;
  const std::vector<std::string> deps =
      deps_arg.empty() ? kCompareDefaults : split_list(deps_arg);
  std::vector<SloConfig> regimes;
  for (const auto& s : slo_args) {
    const auto slo = parse_slo(s);
    if (!slo) {
      err << "error: --slo expects TTFT_MS:TPOT_MS, got '" << s << "'\n";
      return kExitInvalid;
    }
    regimes.push_back(*slo);
  }
  if (regimes.empty()) regimes.push_back(cfg->slo);
  if (deps.empty()) {
    err << "error: compare needs at least one deployment\n";
    return kExitInvalid;
  }
  const double rate = cfg->workload.rate_per_npu
                          ? *cfg->workload.rate_per_npu
                          : (cfg->workload.profile.empty()
                                 ? 1.0
                                 : workload_profile(cfg->workload.profile)
                                       .per_npu_rate);
  std::vector<Cell> cells;
  for (const auto& d : deps) cells.push_back(make_cell(d, rate));
  run_cells(*cfg, cells, jobs);

  std::string csv = "deployment,npus,status,ttft_mean_ms,tpot_mean_ms";
  for (const auto& s : regimes) {
    const std::string tag = fmt(s.ttft_max, 0) + "/" + fmt(s.tpot_max, 0);
    csv += ",slo_attainment@" + tag + ",per_npu_effective_throughput@" + tag;
  }
  csv += "\n";
  bool failed = false;
  for (const Cell& c : cells) {
    csv += csv_field(c.deployment) + "," + std::to_string(c.npus) + "," +
           (c.ok ? "ok" : "failed");
    if (!c.ok) {
      failed = true;
      err << "cell " << c.deployment << " failed: " << c.error << "\n";
      csv += ",,";
      for (std::size_t i = 0; i < regimes.size(); ++i) csv += ",,";
      csv += "\n";
      continue;
    }
    const RunReport& r = c.report;
    csv += "," + fmt(r.ttft.mean, 4) + "," + fmt(r.tpot.mean, 4);
    for (const auto& slo : regimes) {
      const double att = slo_attainment(r.records, slo);
      const double good =
          r.makespan_ms > 0.0
              ? effective_throughput(r.records, slo, r.npu_count, r.makespan_ms)
              : 0.0;
      csv += "," + fmt(att, 6) + "," + fmt(good, 4);
    }
    csv += "\n";
  }
  try {
    if (f.report.empty())
      out << csv;
    else
      write_file(f.report, csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return failed ? kExitFailure : kExitOk;
}

int cmd_validate(const std::string& config_flag, std::ostream& out) {
  std::string path = config_flag;
  if (path.empty())
    if (const char* env = std::getenv("EPD_SIM_CONFIG")) path = env;
  std::vector<std::string> errors;
  if (path.empty()) {
    errors.push_back("config: no path given (--config or EPD_SIM_CONFIG)");
  } else {
    ConfigLoad load = load_config(path);
    errors = load.errors;
    // Semantic checks skip fields the parser already rejected.
    for (auto& e : validate_config(load.config)) {
      const std::string field = e.substr(0, e.find(':'));
      const bool dup = std::any_of(errors.begin(), errors.end(), [&](const auto& x) {
        return x.rfind(field, 0) == 0;
      });
      if (!dup) errors.push_back(std::move(e));
    }
  }
  for (const auto& e : errors) out << "error: " << e << "\n";
  out << errors.size() << (errors.size() == 1 ? " error" : " errors") << "\n";
  return errors.empty() ? kExitOk : kExitInvalid;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Discrete-event simulator for encode/prefill/decode serving"};
  app.name("epd_sim");
  app.require_subcommand(1);

  CommonFlags run_f, sweep_f, compare_f;
  std::string validate_config_path;
  std::string rates, sweep_deps, cell_dir, compare_deps;
  std::vector<std::string> slos;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  CLI::App* run = app.add_subcommand("run", "Run one simulation");
  add_common(run, run_f);
  run->add_option("--event-log", run_f.event_log, "Write per-event JSON lines");

  CLI::App* sweep = app.add_subcommand("sweep", "Grid over rates and deployments");
  add_common(sweep, sweep_f);
  sweep->add_option("--rates", rates, "Comma-separated per-NPU rates")
      ->required();
  sweep->add_option("--deployments", sweep_deps,
                    "Comma-separated notations (default: config deployment)");
  sweep->add_option("--cell-dir", cell_dir, "Write one JSON report per cell");
  sweep->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);

  CLI::App* compare = app.add_subcommand("compare", "Compare deployments under SLO regimes");
  add_common(compare, compare_f);
  compare->add_option("--deployments", compare_deps,
                      "Comma-separated notations (default: the six reference layouts)");
  compare->add_option("--slo", slos, "SLO regime TTFT_MS:TPOT_MS (repeatable)");
  compare->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);

  CLI::App* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("--config", validate_config_path, "Config file");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  if (*run) return cmd_run(run_f, out, err);
  if (*sweep) return cmd_sweep(sweep_f, rates, sweep_deps, cell_dir, jobs, out, err);
  if (*compare) return cmd_compare(compare_f, compare_deps, slos, jobs, out, err);
  if (*validate) return cmd_validate(validate_config_path, out);
  return kExitInvalid;
}

}  // namespace epdsim

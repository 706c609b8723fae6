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

#include "epdsim/metrics.h"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "epdsim/error.h"

namespace epdsim {

using ojson = nlohmann::ordered_json;

void SloConfig::validate() const {
  if (!(ttft_max > 0.0) || !(tpot_max > 0.0))
    throw InvalidInput("slo thresholds must be > 0");
}

double ttft(const RequestRecord& r) {
  if (r.status != RequestStatus::kCompleted)
    throw UndefinedMetric("ttft of rejected request " + std::to_string(r.id));
  return r.first_token - r.arrival;
}

double tpot(const RequestRecord& r) {
  if (r.status != RequestStatus::kCompleted)
    throw UndefinedMetric("tpot of rejected request " + std::to_string(r.id));
  if (r.output_tokens <= 1) return 0.0;
  return (r.done - r.first_token) / static_cast<double>(r.output_tokens - 1);
}

bool meets_slo(const RequestRecord& r, const SloConfig& slo) {
  return r.status == RequestStatus::kCompleted && ttft(r) <= slo.ttft_max &&
         tpot(r) <= slo.tpot_max;
}

double slo_attainment(std::span<const RequestRecord> records,
                      const SloConfig& slo, bool* empty) {
  if (empty) *empty = records.empty();
  if (records.empty()) return 1.0;
  const auto pass = std::count_if(records.begin(), records.end(),
                                  [&](const auto& r) { return meets_slo(r, slo); });
  return static_cast<double>(pass) / static_cast<double>(records.size());
}

double effective_throughput(std::span<const RequestRecord> records,
                            const SloConfig& slo, int npu_count,
                            double makespan_ms) {
  if (npu_count < 1) throw InvalidInput("npu_count must be >= 1");
  if (!(makespan_ms > 0.0)) throw InvalidInput("makespan must be > 0");
  std::int64_t tokens = 0;
  for (const auto& r : records)
    if (meets_slo(r, slo)) tokens += r.output_tokens;
  return static_cast<double>(tokens) / (makespan_ms / 1000.0) / npu_count;
}

double percentile(std::vector<double> values, double p) {
  if (!(p > 0.0 && p <= 100.0))
    throw InvalidInput("percentile must be in (0, 100]");
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = static_cast<std::int64_t>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.p50 = percentile(values, 50);
  s.p90 = percentile(values, 90);
  s.p99 = percentile(values, 99);
  return s;
}

double makespan(std::span<const RequestRecord> records) {
  double first = INFINITY;
  double last = -INFINITY;
  for (const auto& r : records) {
    first = std::min(first, r.arrival);
    if (r.status == RequestStatus::kCompleted) last = std::max(last, r.done);
  }
  if (!std::isfinite(first) || !std::isfinite(last)) return 0.0;
  return std::max(0.0, last - first);
}

void compute_aggregates(RunReport& report) {
  std::vector<double> ttfts, tpots;
  std::int64_t raw_tokens = 0;
  report.completed = 0;
  report.rejected = 0;
  for (const auto& r : report.records) {
    if (r.status == RequestStatus::kCompleted) {
      ++report.completed;
      ttfts.push_back(ttft(r));
      tpots.push_back(tpot(r));
      raw_tokens += r.output_tokens;
    } else {
      ++report.rejected;
    }
  }
  report.ttft = summarize(std::move(ttfts));
  report.tpot = summarize(std::move(tpots));
  report.slo_attainment =
      slo_attainment(report.records, report.slo, &report.slo_attainment_empty);
  report.makespan_ms = makespan(report.records);
  if (report.makespan_ms > 0.0) {
    report.per_npu_effective_throughput = effective_throughput(
        report.records, report.slo, report.npu_count, report.makespan_ms);
    report.per_npu_raw_throughput = static_cast<double>(raw_tokens) /
                                    (report.makespan_ms / 1000.0) /
                                    report.npu_count;
  } else {
    report.per_npu_effective_throughput = 0.0;
    report.per_npu_raw_throughput = 0.0;
  }
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  throw InvalidInput("unknown report format '" + std::string(s) + "'");
}

namespace {

constexpr const char* kSchema = "epdsim.run_report/1";

std::string_view status_name(RequestStatus s) {
  return s == RequestStatus::kCompleted ? "completed" : "rejected";
}

ojson summary_json(const Summary& s) {
  ojson j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["p50"] = s.p50;
  j["p90"] = s.p90;
  j["p99"] = s.p99;
  return j;
}

Summary summary_from(const ojson& j) {
  Summary s;
  s.count = j.at("count").get<std::int64_t>();
  s.mean = j.at("mean").get<double>();
  s.p50 = j.at("p50").get<double>();
  s.p90 = j.at("p90").get<double>();
  s.p99 = j.at("p99").get<double>();
  return s;
}

ojson to_json(const RunReport& r) {
  ojson j;
  j["schema"] = kSchema;
  j["deployment"] = r.deployment;
  j["npu_count"] = r.npu_count;
  j["seed"] = r.seed;
  j["slo"] = {{"ttft_max_ms", r.slo.ttft_max}, {"tpot_max_ms", r.slo.tpot_max}};

  ojson agg;
  agg["requests"] = static_cast<std::int64_t>(r.records.size());
  agg["completed"] = r.completed;
  agg["rejected"] = r.rejected;
  agg["ttft_ms"] = summary_json(r.ttft);
  agg["tpot_ms"] = summary_json(r.tpot);
  agg["slo_attainment"] = r.slo_attainment;
  agg["slo_attainment_empty"] = r.slo_attainment_empty;
  agg["per_npu_effective_throughput"] = r.per_npu_effective_throughput;
  agg["per_npu_raw_throughput"] = r.per_npu_raw_throughput;
  agg["makespan_ms"] = r.makespan_ms;
  j["aggregates"] = agg;

  const TransferStats& t = r.transfer;
  ojson tj;
  tj["encode_executions"] = t.encode_executions;
  tj["dedup_hits"] = t.dedup_hits;
  tj["store_misses"] = t.store_misses;
  tj["recomputes"] = t.recomputes;
  tj["ep_transfers"] = t.ep_transfers;
  tj["ep_mean_overlap_ratio"] = t.ep_mean_overlap_ratio;
  tj["ep_exposed_ms"] = t.ep_exposed_ms;
  tj["kv_transfers"] = t.kv_transfers;
  tj["kv_mean_overlap_ratio"] = t.kv_mean_overlap_ratio;
  tj["kv_exposed_ms"] = t.kv_exposed_ms;
  tj["kv_mean_group_size"] = t.kv_mean_group_size;
  j["transfer"] = tj;

  ojson recs = ojson::array();
  for (const auto& rec : r.records) {
    ojson e;
    e["id"] = rec.id;
    e["arrival_ms"] = rec.arrival;
    const bool ok = rec.status == RequestStatus::kCompleted;
    e["first_token_ms"] = ok ? ojson(rec.first_token) : ojson(nullptr);
    e["done_ms"] = ok ? ojson(rec.done) : ojson(nullptr);
    e["output_tokens"] = rec.output_tokens;
    e["status"] = status_name(rec.status);
    e["reject_reason"] = rec.reject_reason;
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  return j;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string to_csv(const RunReport& r) {
  std::string out =
      "id,arrival_ms,first_token_ms,done_ms,output_tokens,status,ttft_ms,"
      "tpot_ms\n";
  for (const auto& rec : r.records) {
    const bool ok = rec.status == RequestStatus::kCompleted;
    out += std::to_string(rec.id) + "," + fmt(rec.arrival) + "," +
           (ok ? fmt(rec.first_token) : "") + "," + (ok ? fmt(rec.done) : "") +
           "," + std::to_string(rec.output_tokens) + "," +
           std::string(status_name(rec.status)) + "," +
           (ok ? fmt(ttft(rec)) : "") + "," + (ok ? fmt(tpot(rec)) : "") +
           "\n";
  }
  const std::vector<std::pair<std::string, std::string>> footer = {
      {"deployment", r.deployment},
      {"npu_count", std::to_string(r.npu_count)},
      {"completed", std::to_string(r.completed)},
      {"rejected", std::to_string(r.rejected)},
      {"ttft_mean_ms", fmt(r.ttft.mean)},
      {"ttft_p99_ms", fmt(r.ttft.p99)},
      {"tpot_mean_ms", fmt(r.tpot.mean)},
      {"tpot_p99_ms", fmt(r.tpot.p99)},
      {"slo_attainment", fmt(r.slo_attainment)},
      {"per_npu_effective_throughput", fmt(r.per_npu_effective_throughput)},
      {"per_npu_raw_throughput", fmt(r.per_npu_raw_throughput)},
      {"makespan_ms", fmt(r.makespan_ms)},
  };
  out += "aggregate,value\n";
  for (const auto& [k, v] : footer) out += k + "," + v + "\n";
  return out;
}

}  // namespace

std::string export_report(const RunReport& report, ReportFormat format) {
  if (format == ReportFormat::kCsv) return to_csv(report);
  return to_json(report).dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kSchema)
      throw ParseError("report: unsupported schema");
    RunReport r;
    r.deployment = j.at("deployment").get<std::string>();
    r.npu_count = j.at("npu_count").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.slo.ttft_max = j.at("slo").at("ttft_max_ms").get<double>();
    r.slo.tpot_max = j.at("slo").at("tpot_max_ms").get<double>();
    const ojson& agg = j.at("aggregates");
    r.completed = agg.at("completed").get<std::int64_t>();
    r.rejected = agg.at("rejected").get<std::int64_t>();
    r.ttft = summary_from(agg.at("ttft_ms"));
    r.tpot = summary_from(agg.at("tpot_ms"));
    r.slo_attainment = agg.at("slo_attainment").get<double>();
    r.slo_attainment_empty = agg.at("slo_attainment_empty").get<bool>();
    r.per_npu_effective_throughput =
        agg.at("per_npu_effective_throughput").get<double>();
    r.per_npu_raw_throughput = agg.at("per_npu_raw_throughput").get<double>();
    r.makespan_ms = agg.at("makespan_ms").get<double>();
    const ojson& t = j.at("transfer");
    TransferStats& ts = r.transfer;
    ts.encode_executions = t.at("encode_executions").get<std::int64_t>();
    ts.dedup_hits = t.at("dedup_hits").get<std::int64_t>();
    ts.store_misses = t.at("store_misses").get<std::int64_t>();
    ts.recomputes = t.at("recomputes").get<std::int64_t>();
    ts.ep_transfers = t.at("ep_transfers").get<std::int64_t>();
    ts.ep_mean_overlap_ratio = t.at("ep_mean_overlap_ratio").get<double>();
    ts.ep_exposed_ms = t.at("ep_exposed_ms").get<double>();
    ts.kv_transfers = t.at("kv_transfers").get<std::int64_t>();
    ts.kv_mean_overlap_ratio = t.at("kv_mean_overlap_ratio").get<double>();
    ts.kv_exposed_ms = t.at("kv_exposed_ms").get<double>();
    ts.kv_mean_group_size = t.at("kv_mean_group_size").get<double>();
    for (const auto& e : j.at("records")) {
      RequestRecord rec;
      rec.id = e.at("id").get<std::int64_t>();
      rec.arrival = e.at("arrival_ms").get<double>();
      rec.output_tokens = e.at("output_tokens").get<std::int64_t>();
      rec.status = e.at("status").get<std::string>() == "completed"
                       ? RequestStatus::kCompleted
                       : RequestStatus::kRejected;
      if (rec.status == RequestStatus::kCompleted) {
        rec.first_token = e.at("first_token_ms").get<double>();
        rec.done = e.at("done_ms").get<double>();
      }
      rec.reject_reason = e.at("reject_reason").get<std::string>();
      r.records.push_back(std::move(rec));
    }
    return r;
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

}  // namespace epdsim

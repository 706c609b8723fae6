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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace epdsim {

enum class RequestStatus { kCompleted, kRejected };

struct RequestRecord {
  std::int64_t id = 0;
  double arrival = 0.0;      // ms
  double first_token = 0.0;  // ms, completed only
  double done = 0.0;         // ms, completed only
  std::int64_t output_tokens = 1;
  RequestStatus status = RequestStatus::kCompleted;
  std::string reject_reason;
};

struct SloConfig {
  double ttft_max = 2000.0;  // ms
  double tpot_max = 50.0;    // ms

  void validate() const;
};

struct Summary {
  std::int64_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};

struct TransferStats {
  std::int64_t encode_executions = 0;
  std::int64_t dedup_hits = 0;
  std::int64_t store_misses = 0;
  std::int64_t recomputes = 0;
  std::int64_t ep_transfers = 0;
  double ep_mean_overlap_ratio = 1.0;
  double ep_exposed_ms = 0.0;
  std::int64_t kv_transfers = 0;
  double kv_mean_overlap_ratio = 1.0;
  double kv_exposed_ms = 0.0;
  double kv_mean_group_size = 0.0;
};

struct RunReport {
  std::string deployment;
  int npu_count = 1;
  std::uint64_t seed = 0;
  SloConfig slo;
  std::vector<RequestRecord> records;

  std::int64_t completed = 0;
  std::int64_t rejected = 0;
  Summary ttft;
  Summary tpot;
  double slo_attainment = 1.0;
  bool slo_attainment_empty = false;  // no requests arrived
  double per_npu_effective_throughput = 0.0;  // SLO-passing tokens/s/NPU
  double per_npu_raw_throughput = 0.0;        // all completed tokens/s/NPU
  double makespan_ms = 0.0;
  TransferStats transfer;
};

double ttft(const RequestRecord& r);
double tpot(const RequestRecord& r);
bool meets_slo(const RequestRecord& r, const SloConfig& slo);

// Fraction of all arrived requests that completed within both limits.
// Empty input yields 1.0 and sets `*empty`.
double slo_attainment(std::span<const RequestRecord> records,
                      const SloConfig& slo, bool* empty = nullptr);

double effective_throughput(std::span<const RequestRecord> records,
                            const SloConfig& slo, int npu_count,
                            double makespan_ms);

// Nearest-rank percentile, p in (0, 100]. Empty input yields 0.
double percentile(std::vector<double> values, double p);
Summary summarize(std::vector<double> values);

// Last completion minus first arrival; 0 when nothing completed.
double makespan(std::span<const RequestRecord> records);

// Fills every aggregate field from `report.records`.
void compute_aggregates(RunReport& report);

enum class ReportFormat { kJson, kCsv };
ReportFormat parse_report_format(std::string_view s);

std::string export_report(const RunReport& report, ReportFormat format);
RunReport report_from_json(std::string_view json);

// Lines after the per-request rows in the CSV export.
inline constexpr int kCsvFooterLines = 13;  // heading plus 12 aggregates

}  // namespace epdsim

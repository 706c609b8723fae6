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

#include "epdsim/scheduler.h"

#include <algorithm>
#include <limits>
#include <string>

#include "epdsim/error.h"

namespace epdsim {

LoadMetric parse_load_metric(std::string_view s) {
  if (s == "queued_requests") return LoadMetric::kQueuedRequests;
  if (s == "queued_tokens") return LoadMetric::kQueuedTokens;
  throw InvalidInput("unknown load metric '" + std::string(s) + "'");
}

std::string_view load_metric_name(LoadMetric m) {
  return m == LoadMetric::kQueuedRequests ? "queued_requests"
                                          : "queued_tokens";
}

LoadMetric SchedulerConfig::metric_for(Stage s) const {
  switch (s) {
    case Stage::kEncode:
      return encode_metric;
    case Stage::kPrefill:
      return prefill_metric;
    case Stage::kDecode:
      return decode_metric;
  }
  return decode_metric;
}

bool InstanceStatus::capable(Stage s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

std::int64_t InstanceStatus::load(LoadMetric m) const {
  return m == LoadMetric::kQueuedRequests
             ? queued_requests + in_service_requests
             : queued_tokens + in_service_tokens;
}

StatusTable::StatusTable(const Deployment& d) {
  for (const auto& inst : d.instances) {
    InstanceStatus row;
    row.instance_id = inst.id;
    row.stages = inst.stages;
    rows_.push_back(row);
  }
}

StatusTable::StatusTable(std::vector<InstanceStatus> rows)
    : rows_(std::move(rows)) {}

InstanceStatus& StatusTable::find(int instance_id) {
  for (auto& row : rows_)
    if (row.instance_id == instance_id) return row;
  throw LookupError("status table has no instance " +
                    std::to_string(instance_id));
}

const InstanceStatus& StatusTable::at(int instance_id) const {
  return const_cast<StatusTable*>(this)->find(instance_id);
}

void StatusTable::update(const StatusEvent& e) {
  InstanceStatus& row = find(e.instance_id);
  switch (e.kind) {
    case StatusEventKind::kEnqueue:
      row.queued_requests += 1;
      row.queued_tokens += e.tokens;
      break;
    case StatusEventKind::kDequeue:
      row.queued_requests -= 1;
      row.queued_tokens -= e.tokens;
      row.in_service_requests += 1;
      row.in_service_tokens += e.tokens;
      break;
    case StatusEventKind::kComplete:
      row.in_service_requests -= 1;
      row.in_service_tokens -= e.tokens;
      break;
  }
  if (row.queued_requests < 0 || row.in_service_requests < 0 ||
      row.queued_tokens < 0 || row.in_service_tokens < 0)
    throw InvalidInput("status counters for instance " +
                       std::to_string(e.instance_id) + " went negative");
  row.active = row.in_service_requests > 0;
  row.last_update = e.time;
}

std::vector<Stage> route(const Request& r) {
  if (r.is_multimodal())
    return {Stage::kEncode, Stage::kPrefill, Stage::kDecode};
  return {Stage::kPrefill, Stage::kDecode};
}

int select_instance(std::span<const InstanceStatus> table, Stage stage,
                    LoadMetric metric) {
  int best_id = -1;
  std::int64_t best_load = std::numeric_limits<std::int64_t>::max();
  for (const auto& row : table) {
    if (!row.capable(stage)) continue;
    const std::int64_t load = row.load(metric);
    if (load < best_load || (load == best_load && row.instance_id < best_id)) {
      best_load = load;
      best_id = row.instance_id;
    }
  }
  if (best_id < 0)
    throw RoutingError(std::string("no instance can run stage ") +
                       std::string(stage_name(stage)));
  return best_id;
}

void update_status(StatusTable& table, const StatusEvent& e) { table.update(e); }

}  // namespace epdsim

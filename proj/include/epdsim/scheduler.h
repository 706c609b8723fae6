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
#include <string_view>
#include <vector>

#include "epdsim/stage.h"
#include "epdsim/topology.h"
#include "epdsim/workload.h"

namespace epdsim {

enum class LoadMetric { kQueuedRequests, kQueuedTokens };

LoadMetric parse_load_metric(std::string_view s);
std::string_view load_metric_name(LoadMetric m);

struct SchedulerConfig {
  LoadMetric encode_metric = LoadMetric::kQueuedTokens;
  LoadMetric prefill_metric = LoadMetric::kQueuedTokens;
  LoadMetric decode_metric = LoadMetric::kQueuedRequests;

  LoadMetric metric_for(Stage s) const;
};

// One row of the global status table. Queued work waits for a batch; in
// service work is inside a running batch. Load counts both.
struct InstanceStatus {
  int instance_id = 0;
  std::vector<Stage> stages;
  std::int64_t queued_requests = 0;
  std::int64_t queued_tokens = 0;
  std::int64_t in_service_requests = 0;
  std::int64_t in_service_tokens = 0;
  bool active = false;
  double last_update = 0.0;

  bool capable(Stage s) const;
  std::int64_t load(LoadMetric m) const;
};

enum class StatusEventKind { kEnqueue, kDequeue, kComplete };

struct StatusEvent {
  StatusEventKind kind = StatusEventKind::kEnqueue;
  int instance_id = 0;
  std::int64_t tokens = 0;
  double time = 0.0;
};

class StatusTable {
 public:
  StatusTable() = default;
  explicit StatusTable(const Deployment& d);
  explicit StatusTable(std::vector<InstanceStatus> rows);

  const InstanceStatus& at(int instance_id) const;
  std::span<const InstanceStatus> rows() const { return rows_; }
  void update(const StatusEvent& e);

 private:
  InstanceStatus& find(int instance_id);
  std::vector<InstanceStatus> rows_;
};

// Stage path for a request: E->P->D when any non-text input is present.
std::vector<Stage> route(const Request& r);

// Least loaded capable instance, ties to the lowest id.
int select_instance(std::span<const InstanceStatus> table, Stage stage,
                    LoadMetric metric);

void update_status(StatusTable& table, const StatusEvent& e);

}  // namespace epdsim

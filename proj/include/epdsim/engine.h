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

#include "epdsim/costmodel.h"
#include "epdsim/metrics.h"
#include "epdsim/scheduler.h"
#include "epdsim/topology.h"
#include "epdsim/workload.h"

namespace epdsim {

struct BatchCaps {
  std::int64_t max_requests = 1;
  std::int64_t max_tokens = 1;
};

struct BatchPolicy {
  BatchCaps encode{8, 8192};     // tokens: visual tokens
  BatchCaps prefill{64, 8192};   // tokens: prompt tokens
  std::int64_t decode_max_requests = 256;

  void validate() const;
};

// Greedy FIFO fill over per-request token counts. Returns how many requests
// from the front form the batch; at least one when the queue is non-empty,
// even if that request alone exceeds the token cap.
std::size_t form_batch(std::span<const std::int64_t> queue_tokens,
                       const BatchCaps& caps);

enum class KvMemoryMode { kOff, kReject, kQueue };
KvMemoryMode parse_kv_memory_mode(std::string_view s);
std::string_view kv_memory_mode_name(KvMemoryMode m);

struct EngineOptions {
  bool ep_prefetch = true;   // start E->P feature transfer at encode completion
  bool pd_grouping = true;   // choose the KV group size instead of layer-wise
  double store_failure_prob = 0.0;
  Poly2 dispatch_latency = measured_dispatch_latency();  // over visual tokens
  KvMemoryMode kv_memory = KvMemoryMode::kOff;
  double device_memory_bytes = 64e9;
  double weight_bytes = 16e9;  // per instance, subtracted from capacity
  bool record_events = false;

  void validate() const;
};

struct SimulationInput {
  Deployment deployment;
  std::vector<Request> trace;  // sorted by arrival
  ModelProfile model;
  LinkProfiles links;
  InterferenceMatrix interference;
  SchedulerConfig scheduler;
  BatchPolicy batch;
  EngineOptions engine;
  SloConfig slo;
  std::uint64_t seed = 0;
};

struct SimulationResult {
  RunReport report;
  // Trace requests with lifecycle timestamps filled in.
  std::vector<Request> requests;
  // Tokens produced per request (prefill token plus decode steps).
  std::vector<std::int64_t> generated_tokens;
  // One JSON object per line when EngineOptions::record_events is set.
  std::string event_log;
};

SimulationResult simulate(const SimulationInput& input);

}  // namespace epdsim

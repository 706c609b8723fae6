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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace epdsim {

// Hash-keyed cache of encoded multimodal features shared by all instances.
class FeatureStore {
 public:
  struct Entry {
    double bytes = 0.0;
    int producer_instance = -1;
    double ready_time = 0.0;  // +inf while the producing encode is in flight
  };
  enum class PutResult { kInserted, kDeduplicated };

  PutResult put(std::uint64_t hash, double bytes, double ready_time,
                int producer_instance = -1);
  // Completes a pending entry. Only the engine calls this.
  void mark_ready(std::uint64_t hash, double ready_time, int producer_instance);

  // Returns the entry, or nullopt on a miss: the hash is absent, or an
  // injected retrieval fault fired with probability `failure_prob`.
  std::optional<Entry> get(std::uint64_t hash, double failure_prob,
                           std::mt19937_64& rng);
  const Entry* find(std::uint64_t hash) const;

  std::size_t size() const { return entries_.size(); }
  std::uint64_t dedup_hits() const { return dedup_hits_; }
  std::uint64_t misses() const { return misses_; }
  std::uint64_t put_attempts() const { return put_attempts_; }

 private:
  std::unordered_map<std::uint64_t, Entry> entries_;
  std::uint64_t dedup_hits_ = 0;
  std::uint64_t misses_ = 0;
  std::uint64_t put_attempts_ = 0;
};

struct PrefetchPlan {
  double transfer_latency = 0.0;
  double overlap_window = 0.0;
  double exposed = 0.0;
  double overlap_ratio = 1.0;
};

PrefetchPlan plan_prefetch(double transfer_latency, double overlap_window);

struct KvGroupSlot {
  int first_layer = 0;  // 0-based, inclusive
  int last_layer = 0;   // 0-based, inclusive
  double ready = 0.0;
  double start = 0.0;
  double end = 0.0;
};

struct KvTransferPlan {
  int layers = 0;
  int group_size = 1;
  double per_layer_compute = 0.0;
  double per_layer_payload = 0.0;
  double handshake = 0.0;
  std::vector<KvGroupSlot> schedule;
};

struct TransferOutcome {
  double total_link_busy = 0.0;
  double exposed = 0.0;
  double overlap_ratio = 1.0;
  double bandwidth_utilization = 0.0;  // bytes per ms of link busy time
};

struct KvTimeline {
  KvTransferPlan plan;
  TransferOutcome outcome;
};

// Times are relative to the start of prefill compute. `link_free_at` delays
// the first group when the link is still carrying an earlier transfer.
struct KvTimelineOptions {
  double bytes_per_layer = 0.0;
  double link_free_at = 0.0;
};

KvTimeline kv_timeline(int layers, int group_size, double per_layer_compute,
                       double per_layer_payload, double handshake,
                       KvTimelineOptions opts = {});

// Heterogeneous layers: per-layer compute and payload vectors of equal size.
KvTimeline kv_timeline(std::span<const double> layer_compute,
                       std::span<const double> layer_payload, int group_size,
                       double handshake, KvTimelineOptions opts = {});

int choose_group_size(int layers, double per_layer_compute,
                      double per_layer_payload, double handshake);

double overlap_metrics(double total_link_busy, double exposed);

// Gantt-style export: header `group,ready_ms,start_ms,end_ms`, one row per
// group.
std::string kv_schedule_csv(const KvTransferPlan& plan);

}  // namespace epdsim

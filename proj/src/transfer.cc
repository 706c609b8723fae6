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

#include "epdsim/transfer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "epdsim/error.h"

namespace epdsim {

namespace {

// Exposed-time differences below this are treated as ties.
constexpr double kTieEps = 1e-9;

void require_non_negative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw InvalidInput(std::string(what) + " must be finite and >= 0");
}

}  // namespace

FeatureStore::PutResult FeatureStore::put(std::uint64_t hash, double bytes,
                                          double ready_time,
                                          int producer_instance) {
  if (!(bytes >= 0.0)) throw InvalidInput("feature bytes must be >= 0");
  ++put_attempts_;
  auto [it, inserted] =
      entries_.try_emplace(hash, Entry{bytes, producer_instance, ready_time});
  if (!inserted) {
    ++dedup_hits_;
    return PutResult::kDeduplicated;
  }
  return PutResult::kInserted;
}

void FeatureStore::mark_ready(std::uint64_t hash, double ready_time,
                              int producer_instance) {
  auto it = entries_.find(hash);
  if (it == entries_.end())
    throw LookupError("feature store has no entry for hash " +
                      std::to_string(hash));
  it->second.ready_time = ready_time;
  it->second.producer_instance = producer_instance;
}

std::optional<FeatureStore::Entry> FeatureStore::get(std::uint64_t hash,
                                                     double failure_prob,
                                                     std::mt19937_64& rng) {
  if (!(failure_prob >= 0.0 && failure_prob <= 1.0))
    throw InvalidInput("failure_prob must be in [0, 1]");
  auto it = entries_.find(hash);
  if (it == entries_.end()) {
    ++misses_;
    return std::nullopt;
  }
  if (failure_prob > 0.0 && std::bernoulli_distribution(failure_prob)(rng)) {
    ++misses_;
    return std::nullopt;
  }
  return it->second;
}

const FeatureStore::Entry* FeatureStore::find(std::uint64_t hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

PrefetchPlan plan_prefetch(double transfer_latency, double overlap_window) {
  require_non_negative(transfer_latency, "transfer latency");
  require_non_negative(overlap_window, "overlap window");
  PrefetchPlan p;
  p.transfer_latency = transfer_latency;
  p.overlap_window = overlap_window;
  p.exposed = std::max(0.0, transfer_latency - overlap_window);
  p.overlap_ratio = transfer_latency > 0.0
                        ? std::min(1.0, overlap_window / transfer_latency)
                        : 1.0;
  return p;
}

KvTimeline kv_timeline(std::span<const double> layer_compute,
                       std::span<const double> layer_payload, int group_size,
                       double handshake, KvTimelineOptions opts) {
  const int layers = static_cast<int>(layer_compute.size());
  if (layers < 1) throw InvalidInput("kv_timeline: layers must be >= 1");
  if (layer_payload.size() != layer_compute.size())
    throw InvalidInput("kv_timeline: compute and payload lengths differ");
  if (group_size < 1 || group_size > layers)
    throw InvalidInput("kv_timeline: group size " + std::to_string(group_size) +
                       " outside [1, " + std::to_string(layers) + "]");
  require_non_negative(handshake, "handshake");
  require_non_negative(opts.bytes_per_layer, "bytes per layer");
  require_non_negative(opts.link_free_at, "link free time");
  for (int i = 0; i < layers; ++i) {
    require_non_negative(layer_compute[i], "per-layer compute");
    require_non_negative(layer_payload[i], "per-layer payload");
  }

  KvTimeline out;
  out.plan.layers = layers;
  out.plan.group_size = group_size;
  out.plan.per_layer_compute = layer_compute[0];
  out.plan.per_layer_payload = layer_payload[0];
  out.plan.handshake = handshake;

  double clock = 0.0;  // compute progress
  double link_free = opts.link_free_at;
  double busy = 0.0;
  for (int first = 0; first < layers; first += group_size) {
    const int last = std::min(layers, first + group_size) - 1;
    double payload = 0.0;
    for (int l = first; l <= last; ++l) {
      clock += layer_compute[l];
      payload += layer_payload[l];
    }
    KvGroupSlot slot;
    slot.first_layer = first;
    slot.last_layer = last;
    slot.ready = clock;
    slot.start = std::max(slot.ready, link_free);
    slot.end = slot.start + handshake + payload;
    link_free = slot.end;
    busy += handshake + payload;
    out.plan.schedule.push_back(slot);
  }

  TransferOutcome& o = out.outcome;
  o.total_link_busy = busy;
  o.exposed = std::max(0.0, out.plan.schedule.back().end - clock);
  o.overlap_ratio =
      busy > 0.0 ? std::clamp(1.0 - o.exposed / busy, 0.0, 1.0) : 1.0;
  o.bandwidth_utilization =
      busy > 0.0 ? opts.bytes_per_layer * layers / busy : 0.0;
  return out;
}

KvTimeline kv_timeline(int layers, int group_size, double per_layer_compute,
                       double per_layer_payload, double handshake,
                       KvTimelineOptions opts) {
  if (layers < 1) throw InvalidInput("kv_timeline: layers must be >= 1");
  const std::vector<double> compute(static_cast<std::size_t>(layers),
                                    per_layer_compute);
  const std::vector<double> payload(static_cast<std::size_t>(layers),
                                    per_layer_payload);
  return kv_timeline(compute, payload, group_size, handshake, opts);
}

int choose_group_size(int layers, double per_layer_compute,
                      double per_layer_payload, double handshake) {
  if (layers < 1) throw InvalidInput("choose_group_size: layers must be >= 1");
  int best_g = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int g = 1; g <= layers; ++g) {
    const double exposed =
        kv_timeline(layers, g, per_layer_compute, per_layer_payload, handshake)
            .outcome.exposed;
    if (exposed < best - kTieEps) {
      best = exposed;
      best_g = g;
    }
  }
  return best_g;
}

double overlap_metrics(double total_link_busy, double exposed) {
  require_non_negative(total_link_busy, "total link busy");
  require_non_negative(exposed, "exposed");
  if (exposed > total_link_busy)
    throw InvalidInput("exposed time exceeds total link busy time");
  if (total_link_busy == 0.0) return 1.0;
  return 1.0 - exposed / total_link_busy;
}

std::string kv_schedule_csv(const KvTransferPlan& plan) {
  std::string out = "group,ready_ms,start_ms,end_ms\n";
  char buf[128];
  for (std::size_t i = 0; i < plan.schedule.size(); ++i) {
    const KvGroupSlot& s = plan.schedule[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f\n", i, s.ready,
                  s.start, s.end);
    out += buf;
  }
  return out;
}

}  // namespace epdsim

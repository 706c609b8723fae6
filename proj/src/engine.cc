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

#include "epdsim/engine.h"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <unordered_map>

#include "epdsim/error.h"
#include "epdsim/transfer.h"

namespace epdsim {

void BatchPolicy::validate() const {
  if (encode.max_requests < 1 || encode.max_tokens < 1 ||
      prefill.max_requests < 1 || prefill.max_tokens < 1 ||
      decode_max_requests < 1)
    throw InvalidInput("batch caps must be >= 1");
}

std::size_t form_batch(std::span<const std::int64_t> queue_tokens,
                       const BatchCaps& caps) {
  if (queue_tokens.empty()) return 0;
  std::size_t n = 1;
  std::int64_t tokens = queue_tokens[0];
  while (n < queue_tokens.size() &&
         static_cast<std::int64_t>(n) < caps.max_requests &&
         tokens + queue_tokens[n] <= caps.max_tokens) {
    tokens += queue_tokens[n];
    ++n;
  }
  return n;
}

KvMemoryMode parse_kv_memory_mode(std::string_view s) {
  if (s == "off") return KvMemoryMode::kOff;
  if (s == "reject") return KvMemoryMode::kReject;
  if (s == "queue") return KvMemoryMode::kQueue;
  throw InvalidInput("unknown kv memory mode '" + std::string(s) + "'");
}

std::string_view kv_memory_mode_name(KvMemoryMode m) {
  switch (m) {
    case KvMemoryMode::kOff:
      return "off";
    case KvMemoryMode::kReject:
      return "reject";
    case KvMemoryMode::kQueue:
      return "queue";
  }
  return "off";
}

void EngineOptions::validate() const {
  if (!(store_failure_prob >= 0.0 && store_failure_prob <= 1.0))
    throw InvalidInput("store failure probability must be in [0, 1]");
  if (dispatch_latency.c0 < 0.0 || dispatch_latency.c1 < 0.0 ||
      dispatch_latency.c2 < 0.0)
    throw InvalidInput("dispatch latency coefficients must be >= 0");
  if (!(device_memory_bytes > 0.0) || !(weight_bytes >= 0.0))
    throw InvalidInput("device memory must be > 0 and weights >= 0");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EvKind { kArrival, kDispatch, kStallEnd, kJobEnd, kKvReady };

struct Event {
  double time;
  std::uint64_t seq;
  EvKind kind;
  int a;  // request index or instance id
  int b;  // instance id
  std::uint64_t gen;
};

struct Later {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    return x.seq > y.seq;
  }
};

struct Job {
  bool busy = false;
  bool computing = false;
  Stage stage = Stage::kEncode;
  std::vector<int> reqs;
  double remaining = 0.0;  // solo-speed work left, ms
  double factor = 1.0;
  double last = 0.0;
  double compute_start = 0.0;
  std::uint64_t gen = 0;
};

struct InstState {
  const Instance* def = nullptr;
  std::deque<int> encode_q;
  std::deque<int> prefill_q;
  std::deque<int> decode_wait;
  std::vector<int> decode_active;
  Job job;
  double kv_used = 0.0;
  double kv_capacity = 0.0;
};

struct ReqState {
  std::uint64_t key = 0;
  std::int64_t visual = 0;
  std::int64_t prompt = 0;
  int d_inst = -1;
  int fetch_src = -1;        // producer instance when the fetch is deferred
  bool needs_fetch = false;  // prefetch off: transfer at batch start
  bool recompute = false;
  bool coupled_ep = false;
  double feature_avail = 0.0;
  double ep_latency = 0.0;
  double ep_start = 0.0;
  bool has_ep_transfer = false;
  std::int64_t steps = 0;
  std::int64_t generated = 0;
  double kv_reserved = 0.0;
  bool finished = false;
  bool rejected = false;
  std::string reject_reason;
  double first_token = -1.0;
  double done = 0.0;
};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t feature_key(const Request& r) {
  std::uint64_t key = 0;
  int n = 0;
  for (const auto& in : r.inputs) {
    if (in.kind == Modality::kText) continue;
    key = n == 0 ? in.content_hash : mix(key ^ in.content_hash);
    ++n;
  }
  return key;
}

class Simulator {
 public:
  explicit Simulator(const SimulationInput& in)
      : in_(in),
        dep_(in.deployment),
        table_(in.deployment),
        rng_(in.seed),
        reqs_(in.trace.size()),
        out_(in.trace) {
    for (const auto& inst : dep_.instances) {
      InstState s;
      s.def = &inst;
      s.kv_capacity =
          in.engine.device_memory_bytes * static_cast<double>(inst.tp_degree) -
          in.engine.weight_bytes;
      insts_.push_back(std::move(s));
    }
  }

  SimulationResult run() {
    for (std::size_t i = 0; i < out_.size(); ++i) {
      const Request& r = out_[i];
      ReqState& s = reqs_[i];
      s.visual = r.visual_tokens();
      s.prompt = r.prompt_tokens();
      s.key = feature_key(r);
      push(r.arrival_ms, EvKind::kArrival, static_cast<int>(i), -1, 0);
    }
    while (!events_.empty()) {
      const Event e = events_.top();
      events_.pop();
      if (e.time < now_) throw Error("simulated clock moved backward");
      now_ = e.time;
      dispatch(e);
    }
    return finish();
  }

 private:
  // ---- event plumbing ----
  void push(double t, EvKind k, int a, int b, std::uint64_t gen) {
    events_.push(Event{t, seq_++, k, a, b, gen});
  }

  void log(std::string_view kind, int req, int inst,
           nlohmann::ordered_json extra = {}) {
    if (!in_.engine.record_events) return;
    nlohmann::ordered_json j;
    j["t"] = now_;
    j["event"] = kind;
    if (req >= 0) j["request"] = out_[static_cast<std::size_t>(req)].id;
    if (inst >= 0) j["instance"] = inst;
    if (extra.is_object())
      for (auto it = extra.begin(); it != extra.end(); ++it)
        j[it.key()] = it.value();
    log_ += j.dump();
    log_ += '\n';
  }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EvKind::kArrival:
        on_arrival(e.a);
        break;
      case EvKind::kDispatch:
        insts_[e.b].prefill_q.push_back(e.a);
        try_start(e.b);
        break;
      case EvKind::kStallEnd: {
        Job& job = insts_[e.a].job;
        if (job.gen != e.gen || job.computing) break;
        begin_compute(e.a, job.remaining);
        break;
      }
      case EvKind::kJobEnd:
        on_job_end(e.a, e.gen);
        break;
      case EvKind::kKvReady:
        out_[e.a].timestamps["kv_ready"] = now_;
        insts_[e.b].decode_wait.push_back(e.a);
        try_start(e.b);
        break;
    }
  }

  void status(StatusEventKind k, int inst, std::int64_t tokens) {
    table_.update(StatusEvent{k, inst, tokens, now_});
  }

  int select(Stage s) {
    return select_instance(table_.rows(), s, in_.scheduler.metric_for(s));
  }

  int device_of(int inst) const { return dep_.instance(inst).device_ids.front(); }

  bool share_device(int a, int b) const {
    const auto& da = dep_.instance(a).device_ids;
    const auto& db = dep_.instance(b).device_ids;
    return std::any_of(da.begin(), da.end(), [&](int d) {
      return std::find(db.begin(), db.end(), d) != db.end();
    });
  }

  double& link_free(int kind, int src_inst, int dst_inst) {
    return link_free_[{kind, device_of(src_inst), device_of(dst_inst)}];
  }

  // ---- interference bookkeeping ----
  void advance(Job& job) {
    if (job.factor > 0.0) job.remaining -= (now_ - job.last) / job.factor;
    job.remaining = std::max(0.0, job.remaining);
    job.last = now_;
  }

  double factor_for(int inst) const {
    std::vector<ResourceProfile> peers;
    for (int d : dep_.instance(inst).device_ids) {
      for (int other : dep_.colocation.at(d)) {
        if (other == inst || !insts_[other].job.computing) continue;
        peers.push_back(stage_resource_profile(insts_[other].job.stage));
      }
    }
    return interference_factor(in_.interference,
                               stage_resource_profile(insts_[inst].job.stage),
                               peers);
  }

  // Re-times every computing job sharing a device with `inst`.
  void refresh(int inst) {
    std::vector<int> touched;
    for (int d : dep_.instance(inst).device_ids)
      for (int other : dep_.colocation.at(d)) touched.push_back(other);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (int j : touched) {
      Job& job = insts_[j].job;
      if (!job.computing) continue;
      advance(job);
      job.factor = factor_for(j);
      job.gen = ++gen_;
      push(now_ + job.remaining * job.factor, EvKind::kJobEnd, j, -1, job.gen);
    }
  }

  void begin_compute(int inst, double work) {
    Job& job = insts_[inst].job;
    job.computing = true;
    job.remaining = work;
    job.last = now_;
    job.factor = 1.0;
    job.compute_start = now_;
    refresh(inst);
  }

  double tp_work(int inst, double base) const {
    return tp_adjust(base, dep_.instance(inst).tp_degree, in_.model.llm_layers,
                     in_.model.tp_sync_per_layer);
  }

  // ---- request flow ----
  void on_arrival(int r) {
    Request& req = out_[r];
    ReqState& s = reqs_[r];
    req.timestamps["arrival"] = now_;
    log("arrival", r, -1);
    if (!req.is_multimodal()) {
      const int p = select(Stage::kPrefill);
      status(StatusEventKind::kEnqueue, p, s.prompt);
      insts_[p].prefill_q.push_back(r);
      try_start(p);
      return;
    }
    const double bytes = feature_bytes(in_.model, s.visual);
    if (store_.put(s.key, bytes, kInf) == FeatureStore::PutResult::kDeduplicated) {
      const FeatureStore::Entry* e = store_.find(s.key);
      if (std::isfinite(e->ready_time)) {
        req.timestamps["encode_done"] = now_;
        handoff(r, e->producer_instance);
      } else {
        waiters_[s.key].push_back(r);
      }
      return;
    }
    const int e = select(Stage::kEncode);
    status(StatusEventKind::kEnqueue, e, s.visual);
    insts_[e].encode_q.push_back(r);
    try_start(e);
  }

  void handoff(int r, int src) {
    ReqState& s = reqs_[r];
    Request& req = out_[r];
    if (dep_.instance(src).has(Stage::kPrefill)) {
      s.coupled_ep = true;
      s.feature_avail = now_;
      req.timestamps["feature_ready"] = now_;
      status(StatusEventKind::kEnqueue, src, s.prompt);
      insts_[src].prefill_q.push_back(r);
      try_start(src);
      return;
    }
    const int p = select(Stage::kPrefill);
    status(StatusEventKind::kEnqueue, p, s.prompt);
    if (in_.engine.ep_prefetch) {
      fetch_feature(r, src, p);
    } else {
      s.needs_fetch = true;
      s.fetch_src = src;
    }
    push(now_ + in_.engine.dispatch_latency(static_cast<double>(s.visual)),
         EvKind::kDispatch, r, p, 0);
  }

  // Retrieves the feature for request `r` from the store and transfers it from
  // `src`'s device to `p`'s device, starting now.
  void fetch_feature(int r, int src, int p) {
    ReqState& s = reqs_[r];
    if (!store_.get(s.key, in_.engine.store_failure_prob, rng_)) {
      s.recompute = true;
      s.feature_avail = now_;
      log("fault", r, p, {{"reason", "feature_store_miss"}});
      return;
    }
    const LinkProfile& link = share_device(src, p) ? in_.links.feature_intra
                                                   : in_.links.feature_inter;
    const double lat =
        transfer_latency(link, feature_bytes(in_.model, s.visual));
    double& free_at = link_free(0, src, p);
    s.ep_start = std::max(now_, free_at);
    s.ep_latency = lat;
    s.feature_avail = s.ep_start + lat;
    s.has_ep_transfer = true;
    free_at = s.feature_avail;
  }

  void try_start(int i) {
    InstState& st = insts_[i];
    if (st.job.busy) return;
    if (st.def->has(Stage::kEncode) && !st.encode_q.empty()) {
      start_encode(i);
    } else if (st.def->has(Stage::kPrefill) && !st.prefill_q.empty()) {
      start_prefill(i);
    } else if (st.def->has(Stage::kDecode) &&
               (!st.decode_wait.empty() || !st.decode_active.empty())) {
      start_decode(i);
    }
  }

  std::vector<int> take(std::deque<int>& q, const BatchCaps& caps,
                        bool visual) {
    std::vector<std::int64_t> tokens;
    tokens.reserve(q.size());
    for (int r : q) tokens.push_back(visual ? reqs_[r].visual : reqs_[r].prompt);
    const std::size_t n = form_batch(tokens, caps);
    std::vector<int> batch(q.begin(), q.begin() + static_cast<long>(n));
    q.erase(q.begin(), q.begin() + static_cast<long>(n));
    return batch;
  }

  void start_encode(int i) {
    InstState& st = insts_[i];
    std::vector<int> batch = take(st.encode_q, in_.batch.encode, true);
    std::int64_t tokens = 0;
    for (int r : batch) {
      status(StatusEventKind::kDequeue, i, reqs_[r].visual);
      tokens += reqs_[r].visual;
      out_[r].timestamps["encode_start"] = now_;
      log("encode_start", r, i);
    }
    stats_.encode_executions += static_cast<std::int64_t>(batch.size());
    st.job = Job{};
    st.job.busy = true;
    st.job.stage = Stage::kEncode;
    st.job.reqs = std::move(batch);
    st.job.gen = ++gen_;
    begin_compute(i, tp_work(i, encode_latency(in_.model, tokens)));
  }

  void start_prefill(int i) {
    InstState& st = insts_[i];
    std::vector<int> batch = take(st.prefill_q, in_.batch.prefill, false);
    std::int64_t tokens = 0;
    double extra = 0.0;
    double ready = now_;
    for (int r : batch) {
      ReqState& s = reqs_[r];
      Request& req = out_[r];
      status(StatusEventKind::kDequeue, i, s.prompt);
      tokens += s.prompt;
      req.timestamps["prefill_start"] = now_;
      log("prefill_start", r, i);
      if (req.output_tokens > 1) {
        s.d_inst = st.def->has(Stage::kDecode) ? i : select(Stage::kDecode);
        status(StatusEventKind::kEnqueue, s.d_inst, req.output_tokens);
      }
      if (s.needs_fetch) fetch_feature(r, s.fetch_src, i);
      if (s.recompute) {
        extra += encode_latency(in_.model, s.visual);
        ++stats_.recomputes;
      }
      if (s.has_ep_transfer) {
        const PrefetchPlan plan =
            plan_prefetch(s.ep_latency, std::max(0.0, now_ - s.ep_start));
        ++stats_.ep_transfers;
        ep_ratio_sum_ += plan.overlap_ratio;
        stats_.ep_exposed_ms += plan.exposed;
      }
      if (req.is_multimodal() && !s.coupled_ep) {
        ready = std::max(ready, s.feature_avail);
        req.timestamps["feature_ready"] = std::max(now_, s.feature_avail);
      }
    }
    st.job = Job{};
    st.job.busy = true;
    st.job.stage = Stage::kPrefill;
    st.job.reqs = std::move(batch);
    st.job.gen = ++gen_;
    const double work = tp_work(i, prefill_latency(in_.model, tokens)) + extra;
    if (ready > now_) {
      st.job.remaining = work;
      push(ready, EvKind::kStallEnd, i, -1, st.job.gen);
    } else {
      begin_compute(i, work);
    }
  }

  void start_decode(int i) {
    InstState& st = insts_[i];
    while (!st.decode_wait.empty() &&
           static_cast<std::int64_t>(st.decode_active.size()) <
               in_.batch.decode_max_requests) {
      const int r = st.decode_wait.front();
      ReqState& s = reqs_[r];
      const std::int64_t out_tokens = out_[r].output_tokens;
      if (in_.engine.kv_memory != KvMemoryMode::kOff) {
        const double need = kv_bytes(in_.model, s.prompt + out_tokens);
        if (need > st.kv_capacity ||
            (st.kv_used + need > st.kv_capacity &&
             in_.engine.kv_memory == KvMemoryMode::kReject)) {
          st.decode_wait.pop_front();
          status(StatusEventKind::kDequeue, i, out_tokens);
          status(StatusEventKind::kComplete, i, out_tokens);
          reject(r, "kv_memory");
          continue;
        }
        if (st.kv_used + need > st.kv_capacity) break;
        st.kv_used += need;
        s.kv_reserved = need;
      }
      st.decode_wait.pop_front();
      status(StatusEventKind::kDequeue, i, out_tokens);
      st.decode_active.push_back(r);
    }
    if (st.decode_active.empty()) return;
    double kv_len = 0.0;
    for (int r : st.decode_active)
      kv_len += static_cast<double>(reqs_[r].prompt + reqs_[r].generated);
    const auto batch = static_cast<std::int64_t>(st.decode_active.size());
    kv_len /= static_cast<double>(batch);
    st.job = Job{};
    st.job.busy = true;
    st.job.stage = Stage::kDecode;
    st.job.reqs = st.decode_active;
    st.job.gen = ++gen_;
    begin_compute(i, tp_work(i, decode_step_latency(in_.model, batch, kv_len)));
  }

  void on_job_end(int i, std::uint64_t gen) {
    InstState& st = insts_[i];
    Job& job = st.job;
    if (!job.computing || job.gen != gen) return;
    job.computing = false;
    refresh(i);
    switch (job.stage) {
      case Stage::kEncode:
        finish_encode(i);
        break;
      case Stage::kPrefill:
        finish_prefill(i);
        break;
      case Stage::kDecode:
        finish_decode(i);
        break;
    }
    st.job.busy = false;
    st.job.reqs.clear();
    try_start(i);
  }

  void finish_encode(int i) {
    const std::vector<int> batch = insts_[i].job.reqs;
    for (int r : batch) status(StatusEventKind::kComplete, i, reqs_[r].visual);
    for (int r : batch) {
      const std::uint64_t key = reqs_[r].key;
      out_[r].timestamps["encode_done"] = now_;
      log("encode_done", r, i);
      store_.mark_ready(key, now_, i);
      handoff(r, i);
      auto it = waiters_.find(key);
      if (it == waiters_.end()) continue;
      const std::vector<int> waiting = std::move(it->second);
      waiters_.erase(it);
      for (int w : waiting) {
        out_[w].timestamps["encode_done"] = now_;
        handoff(w, i);
      }
    }
  }

  void finish_prefill(int i) {
    InstState& st = insts_[i];
    const std::vector<int> batch = st.job.reqs;
    const double compute_start = st.job.compute_start;
    const auto layers = static_cast<int>(in_.model.llm_layers);
    const double per_layer = (now_ - compute_start) / layers;

    // Requests leaving for another instance, grouped by destination.
    std::map<int, std::vector<int>> by_dest;
    for (int r : batch) {
      ReqState& s = reqs_[r];
      Request& req = out_[r];
      status(StatusEventKind::kComplete, i, s.prompt);
      req.timestamps["prefill_done"] = now_;
      s.generated = 1;
      log("prefill_done", r, i);
      if (req.output_tokens == 1) {
        s.first_token = now_;
        complete(r);
      } else if (s.d_inst == i) {
        s.first_token = now_;
        req.timestamps["first_token"] = now_;
        st.decode_wait.push_back(r);
      } else {
        by_dest[s.d_inst].push_back(r);
      }
    }

    for (const auto& [d, group] : by_dest) {
      const LinkProfile& link =
          share_device(i, d) ? in_.links.kv_intra : in_.links.kv_inter;
      std::int64_t tokens = 0;
      for (int r : group) tokens += reqs_[r].prompt;
      const double bytes_per_layer = kv_bytes(in_.model, tokens) / layers;
      const double handshake = link.points.empty() ? link.handshake : 0.0;
      const double payload =
          std::max(0.0, transfer_latency(link, bytes_per_layer) - handshake);
      const int g = in_.engine.pd_grouping
                        ? choose_group_size(layers, per_layer, payload, handshake)
                        : 1;
      double& free_at = link_free(1, i, d);
      KvTimelineOptions opts;
      opts.bytes_per_layer = bytes_per_layer;
      opts.link_free_at = std::max(0.0, free_at - compute_start);
      const KvTimeline tl =
          kv_timeline(layers, g, per_layer, payload, handshake, opts);
      const double ready = now_ + tl.outcome.exposed;
      free_at = ready;
      ++stats_.kv_transfers;
      kv_ratio_sum_ += tl.outcome.overlap_ratio;
      stats_.kv_exposed_ms += tl.outcome.exposed;
      kv_group_sum_ += g;
      if (in_.engine.record_events) {
        for (std::size_t k = 0; k < tl.plan.schedule.size(); ++k) {
          const KvGroupSlot& slot = tl.plan.schedule[k];
          log("kv_group_done", -1, i,
              {{"dest", d},
               {"group", k},
               {"start", compute_start + slot.start},
               {"end", compute_start + slot.end}});
        }
      }
      for (int r : group) push(ready, EvKind::kKvReady, r, d, 0);
    }
  }

  void finish_decode(int i) {
    InstState& st = insts_[i];
    std::vector<int> still;
    for (int r : st.decode_active) {
      ReqState& s = reqs_[r];
      Request& req = out_[r];
      ++s.steps;
      ++s.generated;
      if (s.steps == 1) req.timestamps["decode_step_first"] = now_;
      if (s.first_token < 0.0) {
        s.first_token = now_;
        req.timestamps["first_token"] = now_;
      }
      if (s.steps >= req.output_tokens - 1) {
        req.timestamps["decode_step_last"] = now_;
        status(StatusEventKind::kComplete, i, req.output_tokens);
        st.kv_used = std::max(0.0, st.kv_used - s.kv_reserved);
        s.kv_reserved = 0.0;
        complete(r);
      } else {
        still.push_back(r);
      }
    }
    log("decode_step_done", -1, i,
        {{"batch", st.decode_active.size()}});
    st.decode_active = std::move(still);
  }

  void complete(int r) {
    ReqState& s = reqs_[r];
    Request& req = out_[r];
    s.finished = true;
    s.done = now_;
    req.timestamps["first_token"] = s.first_token;
    req.timestamps["done"] = now_;
    log("request_done", r, -1);
  }

  void reject(int r, std::string reason) {
    ReqState& s = reqs_[r];
    s.finished = true;
    s.rejected = true;
    s.reject_reason = std::move(reason);
    out_[r].timestamps["rejected"] = now_;
    log("request_rejected", r, -1, {{"reason", s.reject_reason}});
  }

  SimulationResult finish() {
    SimulationResult res;
    RunReport& rep = res.report;
    rep.deployment = dep_.notation;
    rep.npu_count = dep_.devices;
    rep.seed = in_.seed;
    rep.slo = in_.slo;
    for (std::size_t i = 0; i < out_.size(); ++i) {
      const ReqState& s = reqs_[i];
      if (!s.finished)
        throw Error("request " + std::to_string(out_[i].id) +
                    " never terminated");
      RequestRecord rec;
      rec.id = out_[i].id;
      rec.arrival = out_[i].arrival_ms;
      rec.output_tokens = out_[i].output_tokens;
      if (s.rejected) {
        rec.status = RequestStatus::kRejected;
        rec.reject_reason = s.reject_reason;
      } else {
        rec.first_token = s.first_token;
        rec.done = s.done;
      }
      rep.records.push_back(std::move(rec));
      res.generated_tokens.push_back(s.generated);
    }
    compute_aggregates(rep);
    stats_.dedup_hits = static_cast<std::int64_t>(store_.dedup_hits());
    stats_.store_misses = static_cast<std::int64_t>(store_.misses());
    stats_.ep_mean_overlap_ratio =
        stats_.ep_transfers ? ep_ratio_sum_ / stats_.ep_transfers : 1.0;
    stats_.kv_mean_overlap_ratio =
        stats_.kv_transfers ? kv_ratio_sum_ / stats_.kv_transfers : 1.0;
    stats_.kv_mean_group_size =
        stats_.kv_transfers ? kv_group_sum_ / stats_.kv_transfers : 0.0;
    rep.transfer = stats_;
    res.requests = std::move(out_);
    res.event_log = std::move(log_);
    return res;
  }

  const SimulationInput& in_;
  const Deployment& dep_;
  StatusTable table_;
  FeatureStore store_;
  std::mt19937_64 rng_;
  std::vector<InstState> insts_;
  std::vector<ReqState> reqs_;
  std::vector<Request> out_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::map<std::tuple<int, int, int>, double> link_free_;
  std::unordered_map<std::uint64_t, std::vector<int>> waiters_;
  TransferStats stats_;
  double ep_ratio_sum_ = 0.0;
  double kv_ratio_sum_ = 0.0;
  double kv_group_sum_ = 0.0;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t gen_ = 0;
  std::string log_;
};

void validate_input(const SimulationInput& in) {
  in.model.validate();
  in.batch.validate();
  in.engine.validate();
  in.slo.validate();
  for (const LinkProfile* l : {&in.links.feature_inter, &in.links.feature_intra,
                               &in.links.kv_inter, &in.links.kv_intra})
    l->validate();
  for (Stage s : kAllStages)
    if (in.deployment.instances_with(s).empty())
      throw ConfigError(std::string("deployment has no instance for stage ") +
                        std::string(stage_name(s)));
  for (std::size_t i = 1; i < in.trace.size(); ++i)
    if (in.trace[i].arrival_ms < in.trace[i - 1].arrival_ms)
      throw InvalidInput("trace must be sorted by arrival");
}

}  // namespace

SimulationResult simulate(const SimulationInput& input) {
  validate_input(input);
  return Simulator(input).run();
}

}  // namespace epdsim

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

#include "epdsim/config.h"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "epdsim/error.h"
#include "epdsim/topology.h"
#include "epdsim/workload.h"

namespace epdsim {

namespace {

using ojson = nlohmann::ordered_json;

// Reads typed fields from one JSON object and records problems instead of
// throwing, so validation can report everything at once.
class Section {
 public:
  Section(const ojson& obj, std::string path, std::vector<std::string>& errs)
      : obj_(obj), path_(std::move(path)), errs_(errs) {}

  bool valid_object() const {
    if (obj_.is_object()) return true;
    errs_.push_back(path_ + ": expected an object");
    return false;
  }

  bool has(const char* key) const { return obj_.contains(key); }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!known.count(it.key()))
        errs_.push_back(field(it.key()) + ": unknown field");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void error(const char* key, const std::string& msg) const {
    errs_.push_back(field(key) + ": " + msg);
  }

  template <typename T>
  void number(const char* key, T& out, double min = -INFINITY) const {
    if (!obj_.contains(key)) return;
    const ojson& v = obj_.at(key);
    if (!v.is_number()) return error(key, "expected a number");
    const double d = v.get<double>();
    if (std::is_integral_v<T> && !(v.is_number_integer() || v.is_number_unsigned()))
      return error(key, "expected an integer");
    if (!(d >= min)) return error(key, "must be >= " + fmt(min));
    out = v.get<T>();
  }

  template <typename T>
  void number(const char* key, std::optional<T>& out,
              double min = -INFINITY) const {
    if (!obj_.contains(key)) return;
    T tmp{};
    const std::size_t before = errs_.size();
    number(key, tmp, min);
    if (errs_.size() == before) out = tmp;
  }

  void boolean(const char* key, bool& out) const {
    if (!obj_.contains(key)) return;
    const ojson& v = obj_.at(key);
    if (v.is_boolean()) {
      out = v.get<bool>();
    } else if (v.is_string() && (v == "on" || v == "off")) {
      out = v == "on";
    } else {
      error(key, "expected true/false or \"on\"/\"off\"");
    }
  }

  void string(const char* key, std::string& out) const {
    if (!obj_.contains(key)) return;
    const ojson& v = obj_.at(key);
    if (!v.is_string()) return error(key, "expected a string");
    out = v.get<std::string>();
  }

  void poly(const char* key, Poly2& out) const {
    if (!obj_.contains(key)) return;
    const ojson& v = obj_.at(key);
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const ojson& x) { return x.is_number(); }))
      return error(key, "expected [c0, c1, c2]");
    const Poly2 p{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    if (p.c0 < 0 || p.c1 < 0 || p.c2 < 0)
      return error(key, "coefficients must be >= 0");
    out = p;
  }

  // [[bytes, ms], ...]
  bool points(const char* key,
              std::vector<std::pair<double, double>>& out) const {
    const ojson& v = obj_.at(key);
    if (!v.is_array()) {
      error(key, "expected [[bytes, ms], ...]");
      return false;
    }
    for (const ojson& p : v) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
          !p[1].is_number()) {
        error(key, "expected [[bytes, ms], ...]");
        return false;
      }
      out.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return true;
  }

  Section child(const char* key) const {
    static const ojson kEmpty = ojson::object();
    return Section(obj_.contains(key) ? obj_.at(key) : kEmpty, field(key),
                   errs_);
  }

 private:
  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  const ojson& obj_;
  std::string path_;
  std::vector<std::string>& errs_;
};

void read_link(const Section& s, LinkProfile& link) {
  if (!s.valid_object()) return;
  s.allow({"preset", "bandwidth_bytes_per_ms", "handshake_ms", "points"});
  if (s.has("preset")) {
    std::string preset;
    s.string("preset", preset);
    if (preset == "measured_feature") {
      link = measured_feature_link();
    } else if (preset == "layer_kv") {
      link = layer_kv_link();
    } else if (!preset.empty()) {
      s.error("preset", "unknown link preset '" + preset + "'");
    }
    return;
  }
  LinkProfile l = link;
  if (s.has("bandwidth_bytes_per_ms") || s.has("handshake_ms")) l.points.clear();
  s.number("bandwidth_bytes_per_ms", l.bandwidth, 0.0);
  s.number("handshake_ms", l.handshake, 0.0);
  if (!(l.bandwidth > 0.0)) s.error("bandwidth_bytes_per_ms", "must be > 0");
  if (s.has("points")) {
    std::vector<std::pair<double, double>> pts;
    if (!s.points("points", pts)) return;
    l.points = std::move(pts);
    try {
      l.validate();
    } catch (const InvalidInput& e) {
      return s.error("points", e.what());
    }
  }
  link = l;
}

void read_workload(const Section& s, WorkloadConfig& w) {
  if (!s.valid_object()) return;
  s.allow({"profile", "trace", "rate_per_npu", "requests", "duration_s",
           "output_tokens", "multimodal_fraction", "image_pool"});
  if (s.has("profile") && s.has("trace"))
    s.error("trace", "set exactly one of workload.profile and workload.trace");
  if (s.has("trace")) {
    w.profile.clear();
    s.string("trace", w.trace_path);
  }
  s.string("profile", w.profile);
  s.number("rate_per_npu", w.rate_per_npu, 0.0);
  if (w.rate_per_npu && !(*w.rate_per_npu > 0.0))
    s.error("rate_per_npu", "must be > 0");
  if (s.has("duration_s")) w.requests.reset();
  s.number("requests", w.requests, 1);
  s.number("duration_s", w.duration_s, 0.0);
  s.number("output_tokens", w.output_tokens, 1);
  s.number("multimodal_fraction", w.multimodal_fraction, 0.0);
  if (w.multimodal_fraction && *w.multimodal_fraction > 1.0)
    s.error("multimodal_fraction", "must be <= 1");
  s.number("image_pool", w.image_pool, 0);
}

void read_model(const Section& s, RunConfig& cfg) {
  if (!s.valid_object()) return;
  s.allow({"profile", "feature_dim", "bytes_per_element", "llm_layers",
           "kv_bytes_per_token_per_layer", "encode", "prefill", "decode",
           "tp_sync_per_layer"});
  if (!s.has("profile")) {
    s.error("profile", "missing model profile");
    return;
  }
  s.string("profile", cfg.model_name);
  try {
    cfg.model = model_profile(cfg.model_name);
  } catch (const LookupError& e) {
    s.error("profile", e.what());
    return;
  }
  ModelProfile& m = cfg.model;
  s.number("feature_dim", m.feature_dim, 1);
  s.number("bytes_per_element", m.bytes_per_element, 1);
  s.number("llm_layers", m.llm_layers, 1);
  s.number("kv_bytes_per_token_per_layer", m.kv_bytes_per_token_per_layer, 0);
  s.poly("encode", m.encode);
  s.poly("prefill", m.prefill);
  s.poly("decode", m.decode);
  s.number("tp_sync_per_layer", m.tp_sync_per_layer, 0.0);
}

void read_scheduler(const Section& s, SchedulerConfig& sc) {
  if (!s.valid_object()) return;
  s.allow({"encode_metric", "prefill_metric", "decode_metric"});
  const std::pair<const char*, LoadMetric*> fields[] = {
      {"encode_metric", &sc.encode_metric},
      {"prefill_metric", &sc.prefill_metric},
      {"decode_metric", &sc.decode_metric}};
  for (auto [key, out] : fields) {
    std::string v;
    s.string(key, v);
    if (v.empty()) continue;
    try {
      *out = parse_load_metric(v);
    } catch (const InvalidInput& e) {
      s.error(key, e.what());
    }
  }
}

void read_batch(const Section& s, BatchPolicy& b) {
  if (!s.valid_object()) return;
  s.allow({"encode_max_requests", "encode_max_tokens", "prefill_max_requests",
           "prefill_max_tokens", "decode_max_requests"});
  s.number("encode_max_requests", b.encode.max_requests, 1);
  s.number("encode_max_tokens", b.encode.max_tokens, 1);
  s.number("prefill_max_requests", b.prefill.max_requests, 1);
  s.number("prefill_max_tokens", b.prefill.max_tokens, 1);
  s.number("decode_max_requests", b.decode_max_requests, 1);
}

void read_transfer(const Section& s, EngineOptions& e) {
  if (!s.valid_object()) return;
  s.allow({"ep_prefetch", "pd_grouping", "store_failure_prob",
           "dispatch_latency"});
  s.boolean("ep_prefetch", e.ep_prefetch);
  s.boolean("pd_grouping", e.pd_grouping);
  s.number("store_failure_prob", e.store_failure_prob, 0.0);
  if (e.store_failure_prob > 1.0) s.error("store_failure_prob", "must be <= 1");
  s.poly("dispatch_latency", e.dispatch_latency);
}

void read_engine(const Section& s, EngineOptions& e) {
  if (!s.valid_object()) return;
  s.allow({"kv_memory", "device_memory_bytes", "weight_bytes"});
  std::string mode;
  s.string("kv_memory", mode);
  if (!mode.empty()) {
    try {
      e.kv_memory = parse_kv_memory_mode(mode);
    } catch (const InvalidInput& ex) {
      s.error("kv_memory", ex.what());
    }
  }
  s.number("device_memory_bytes", e.device_memory_bytes, 1.0);
  s.number("weight_bytes", e.weight_bytes, 0.0);
}

void read_interference(const Section& s, InterferenceMatrix& m) {
  if (!s.valid_object()) return;
  s.allow({"same_class", "cross_class"});
  double same = m.gamma(ResourceClass::kCompute, ResourceClass::kCompute);
  double cross = m.gamma(ResourceClass::kCompute, ResourceClass::kMemory);
  s.number("same_class", same, 0.0);
  s.number("cross_class", cross, 0.0);
  m = InterferenceMatrix(same, cross);
}

void read_slo(const Section& s, SloConfig& slo) {
  if (!s.valid_object()) return;
  s.allow({"ttft_max_ms", "tpot_max_ms"});
  s.number("ttft_max_ms", slo.ttft_max, 0.0);
  s.number("tpot_max_ms", slo.tpot_max, 0.0);
  if (!(slo.ttft_max > 0.0)) s.error("ttft_max_ms", "must be > 0");
  if (!(slo.tpot_max > 0.0)) s.error("tpot_max_ms", "must be > 0");
}

}  // namespace

ConfigLoad parse_config(std::string_view text) {
  ConfigLoad out;
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    out.errors.push_back(std::string("config: invalid JSON: ") + e.what());
    return out;
  }
  const Section root(doc, "", out.errors);
  if (!root.valid_object()) return out;
  root.allow({"deployment", "seed", "workload", "model", "links",
              "interference", "scheduler", "batch", "transfer", "engine",
              "slo"});
  RunConfig& cfg = out.config;
  if (!root.has("deployment")) root.error("deployment", "missing");
  root.string("deployment", cfg.deployment);
  root.number("seed", cfg.seed, 0);
  if (!root.has("workload")) root.error("workload", "missing");
  else read_workload(root.child("workload"), cfg.workload);
  if (!root.has("model")) root.error("model", "missing model profile");
  else read_model(root.child("model"), cfg);
  if (root.has("links")) {
    const Section links = root.child("links");
    if (links.valid_object()) {
      links.allow({"feature_inter", "feature_intra", "kv_inter", "kv_intra"});
      if (links.has("feature_inter"))
        read_link(links.child("feature_inter"), cfg.links.feature_inter);
      if (links.has("feature_intra"))
        read_link(links.child("feature_intra"), cfg.links.feature_intra);
      if (links.has("kv_inter"))
        read_link(links.child("kv_inter"), cfg.links.kv_inter);
      if (links.has("kv_intra"))
        read_link(links.child("kv_intra"), cfg.links.kv_intra);
    }
  }
  if (root.has("interference"))
    read_interference(root.child("interference"), cfg.interference);
  if (root.has("scheduler")) read_scheduler(root.child("scheduler"), cfg.scheduler);
  if (root.has("batch")) read_batch(root.child("batch"), cfg.batch);
  if (root.has("transfer")) read_transfer(root.child("transfer"), cfg.engine);
  if (root.has("engine")) read_engine(root.child("engine"), cfg.engine);
  if (root.has("slo")) read_slo(root.child("slo"), cfg.slo);
  return out;
}

ConfigLoad load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigLoad out;
    out.errors.push_back("config: cannot open '" + path + "'");
    return out;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  ConfigLoad out = parse_config(ss.str());
  // Relative trace paths resolve against the config file's directory.
  std::string& trace = out.config.workload.trace_path;
  if (!trace.empty() && std::filesystem::path(trace).is_relative())
    trace = (std::filesystem::path(path).parent_path() / trace).string();
  return out;
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.deployment) cfg.deployment = *o.deployment;
  if (o.rate_per_npu) cfg.workload.rate_per_npu = *o.rate_per_npu;
  if (o.seed) cfg.seed = *o.seed;
  if (o.ep_prefetch) cfg.engine.ep_prefetch = *o.ep_prefetch;
  if (o.pd_grouping) cfg.engine.pd_grouping = *o.pd_grouping;
}

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> errs;
  try {
    parse_deployment(cfg.deployment);
  } catch (const ParseError& e) {
    errs.push_back(e.what());
  }
  const WorkloadConfig& w = cfg.workload;
  if (w.profile.empty() == w.trace_path.empty()) {
    errs.push_back("workload: set exactly one of profile and trace");
  } else if (!w.profile.empty()) {
    try {
      WorkloadProfile p = workload_profile(w.profile);
      if (w.rate_per_npu) p.per_npu_rate = *w.rate_per_npu;
      p.validate();
    } catch (const Error& e) {
      errs.push_back(std::string("workload.profile: ") + e.what());
    }
    if (!w.requests && !w.duration_s)
      errs.push_back("workload: set requests or duration_s");
    if (w.duration_s && !(*w.duration_s > 0.0))
      errs.push_back("workload.duration_s: must be > 0");
  } else if (!std::filesystem::exists(w.trace_path)) {
    errs.push_back("workload.trace: file '" + w.trace_path + "' not found");
  }
  auto check = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errs.push_back(std::string(what) + ": " + e.what());
    }
  };
  check("model", [&] { cfg.model.validate(); });
  check("links.feature_inter", [&] { cfg.links.feature_inter.validate(); });
  check("links.feature_intra", [&] { cfg.links.feature_intra.validate(); });
  check("links.kv_inter", [&] { cfg.links.kv_inter.validate(); });
  check("links.kv_intra", [&] { cfg.links.kv_intra.validate(); });
  check("batch", [&] { cfg.batch.validate(); });
  check("engine", [&] { cfg.engine.validate(); });
  check("slo", [&] { cfg.slo.validate(); });
  return errs;
}

SimulationInput build_input(const RunConfig& cfg) {
  const std::vector<std::string> errs = validate_config(cfg);
  if (!errs.empty()) throw ConfigError(errs.front());
  SimulationInput in;
  in.deployment = parse_deployment(cfg.deployment);
  in.model = cfg.model;
  in.links = cfg.links;
  in.interference = cfg.interference;
  in.scheduler = cfg.scheduler;
  in.batch = cfg.batch;
  in.engine = cfg.engine;
  in.slo = cfg.slo;
  in.seed = cfg.seed;
  const WorkloadConfig& w = cfg.workload;
  if (!w.trace_path.empty()) {
    in.trace = load_trace(w.trace_path).requests;
    return in;
  }
  WorkloadProfile p = workload_profile(w.profile);
  if (w.rate_per_npu) p.per_npu_rate = *w.rate_per_npu;
  if (w.output_tokens) p.output_tokens = *w.output_tokens;
  if (w.multimodal_fraction) p.multimodal_fraction = *w.multimodal_fraction;
  if (w.image_pool) p.image_pool = *w.image_pool;
  const double duration = w.duration_s ? *w.duration_s : INFINITY;
  std::optional<std::size_t> cap;
  if (w.requests) cap = static_cast<std::size_t>(*w.requests);
  in.trace = generate_trace(p, in.deployment.devices, duration, cfg.seed, cap);
  return in;
}

}  // namespace epdsim

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
#include <string>
#include <string_view>
#include <vector>

#include "epdsim/costmodel.h"
#include "epdsim/engine.h"
#include "epdsim/metrics.h"
#include "epdsim/scheduler.h"

namespace epdsim {

struct WorkloadConfig {
  std::string profile = "sharegpt4o-like";  // empty when a trace is used
  std::string trace_path;
  std::optional<double> rate_per_npu;  // overrides the profile rate
  std::optional<std::int64_t> requests = 512;
  std::optional<double> duration_s;
  std::optional<std::int64_t> output_tokens;
  std::optional<double> multimodal_fraction;
  std::optional<int> image_pool;
};

struct RunConfig {
  std::string deployment = "E-P-D";
  std::uint64_t seed = 1;
  WorkloadConfig workload;
  std::string model_name = "pangu7bvl-like";
  ModelProfile model = model_profile("pangu7bvl-like");
  LinkProfiles links = default_links();
  InterferenceMatrix interference;
  SchedulerConfig scheduler;
  BatchPolicy batch;
  EngineOptions engine;
  SloConfig slo;
};

struct ConfigLoad {
  RunConfig config;
  std::vector<std::string> errors;  // every problem found, in document order

  bool ok() const { return errors.empty(); }
};

// Parses a JSON config document. Missing optional fields keep defaults.
ConfigLoad parse_config(std::string_view json_text);
ConfigLoad load_config(const std::string& path);

// Command-line values; each set field wins over the config file.
struct Overrides {
  std::optional<std::string> deployment;
  std::optional<double> rate_per_npu;
  std::optional<std::uint64_t> seed;
  std::optional<bool> ep_prefetch;
  std::optional<bool> pd_grouping;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

// Semantic checks that need resolution (deployment grammar, profiles, trace).
std::vector<std::string> validate_config(const RunConfig& cfg);

// Resolves the deployment and the trace. Throws on invalid configuration.
SimulationInput build_input(const RunConfig& cfg);

}  // namespace epdsim

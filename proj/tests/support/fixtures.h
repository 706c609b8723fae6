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
#include <string>
#include <vector>

#include "epdsim/engine.h"
#include "epdsim/workload.h"

namespace epdsim::fixture {

inline Request text_request(std::int64_t id, double arrival,
                            std::int64_t text, std::int64_t out) {
  Request r;
  r.id = id;
  r.arrival_ms = arrival;
  r.text_tokens = text;
  r.output_tokens = out;
  return r;
}

inline Request image_request(std::int64_t id, double arrival, int w, int h,
                             std::uint64_t hash, std::int64_t text,
                             std::int64_t out) {
  Request r = text_request(id, arrival, text, out);
  ModalInput img;
  img.width = w;
  img.height = h;
  img.visual_tokens = visual_token_count(w, h);
  img.content_hash = hash;
  r.inputs.push_back(img);
  return r;
}

// Default-calibrated input for `notation` over `trace`.
inline SimulationInput input(const std::string& notation,
                             std::vector<Request> trace,
                             std::uint64_t seed = 1) {
  SimulationInput in;
  in.deployment = parse_deployment(notation);
  in.trace = std::move(trace);
  in.model = model_profile("pangu7bvl-like");
  in.links = default_links();
  in.seed = seed;
  return in;
}

// Shipped profile trace sized for `notation` at `rate` requests/s/NPU.
inline std::vector<Request> profile_trace(const std::string& profile,
                                          const std::string& notation,
                                          double rate, std::size_t n,
                                          std::uint64_t seed) {
  WorkloadProfile p = workload_profile(profile);
  p.per_npu_rate = rate;
  return generate_trace(p, parse_deployment(notation).devices, INFINITY, seed,
                        n);
}

}  // namespace epdsim::fixture

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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epdsim {

enum class Modality { kImage, kAudio, kVideo, kText };

std::string_view modality_name(Modality m);

struct ModalInput {
  Modality kind = Modality::kImage;
  int width = 0;   // pixels, images only
  int height = 0;  // pixels, images only
  std::uint64_t content_hash = 0;
  std::int64_t visual_tokens = 0;
};

struct Request {
  std::int64_t id = 0;
  double arrival_ms = 0.0;
  std::vector<ModalInput> inputs;
  std::int64_t text_tokens = 0;
  std::int64_t output_tokens = 1;
  // Lifecycle event name -> ms. Filled by the engine.
  std::map<std::string, double> timestamps;

  bool is_multimodal() const;
  std::int64_t visual_tokens() const;
  std::int64_t prompt_tokens() const { return text_tokens + visual_tokens(); }
};

struct ImageDims {
  int width = 0;
  int height = 0;
};

struct WorkloadProfile {
  std::string name;
  double multimodal_fraction = 1.0;
  // Images are drawn around `image_dims`: both axes are scaled by a common
  // factor uniform in [1 - dim_jitter, 1 + dim_jitter].
  ImageDims image_dims{802, 652};
  double dim_jitter = 0.0;
  double mean_text_tokens = 10.0;
  std::int64_t output_tokens = 64;
  double per_npu_rate = 1.0;  // requests / s / NPU
  int patch = 28;
  // 0: every image has distinct content. k > 0: contents drawn from a pool of
  // k distinct images, which exercises feature deduplication.
  int image_pool = 0;

  void validate() const;
};

// Built-in profiles: "sharegpt4o-like", "visualweb-like".
WorkloadProfile workload_profile(std::string_view name);
std::vector<std::string> workload_profile_names();

std::int64_t visual_token_count(int width, int height, int patch = 28);

// Stable 64-bit hash used as the default image content key.
std::uint64_t content_hash_of(std::int64_t width, std::int64_t height,
                              std::int64_t salt);

// Homogeneous Poisson arrivals at per_npu_rate * npu_count over `duration_s`
// seconds. When `max_requests` is set, generation also stops after that many
// requests (the duration may then be set to infinity).
std::vector<Request> generate_trace(
    const WorkloadProfile& profile, int npu_count, double duration_s,
    std::uint64_t seed, std::optional<std::size_t> max_requests = std::nullopt);

struct LoadedTrace {
  std::vector<Request> requests;
  bool reordered = false;  // input arrivals were not sorted
};

LoadedTrace parse_trace(std::string_view text, int patch = 28);
LoadedTrace load_trace(const std::string& path, int patch = 28);

std::string format_trace_line(const Request& r);

}  // namespace epdsim

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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epdsim/stage.h"

namespace epdsim {

// c0 + c1 * x + c2 * x^2
struct Poly2 {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double x) const { return c0 + c1 * x + c2 * x * x; }
};

struct ModelProfile {
  std::string name;
  std::int64_t feature_dim = 3584;
  std::int64_t bytes_per_element = 2;
  std::int64_t llm_layers = 28;
  std::int64_t kv_bytes_per_token_per_layer = 2048;
  Poly2 encode;   // ms over visual tokens in the batch
  Poly2 prefill;  // ms over total batched prompt tokens
  // Decode step: c0 + c1 * batch + c2 * batch * mean_kv_len.
  Poly2 decode;
  double tp_sync_per_layer = 0.5;  // ms

  void validate() const;
};

// Built-in profiles: "pangu7bvl-like" (serving default) and
// "pangu7bvl-layerkv" (fitted to the layer-wise KV profiling anchors).
ModelProfile model_profile(std::string_view name);
std::vector<std::string> model_profile_names();

struct LinkProfile {
  double bandwidth = 1.0;  // bytes per ms
  double handshake = 0.0;  // ms per transfer
  // When non-empty, latency is interpolated piecewise-linearly through these
  // (bytes, ms) points instead of using the affine model.
  std::vector<std::pair<double, double>> points;

  void validate() const;
};

struct LinkProfiles {
  LinkProfile feature_inter;  // E -> P across devices
  LinkProfile feature_intra;  // E -> P on one device
  LinkProfile kv_inter;       // P -> D across devices
  LinkProfile kv_intra;       // P -> D on one device
};

LinkProfiles default_links();
// Piecewise feature link through the measured image-feature transfers.
LinkProfile measured_feature_link();
// Affine KV link fitted to the layer-wise KV profiling rows.
LinkProfile layer_kv_link();

// Affine fit of the measured E->P scheduling delay over visual tokens: the
// time from encode completion until the request is queued at Prefill.
Poly2 measured_dispatch_latency();

struct ResourceProfile {
  double ai_core = 0.0;
  double ai_vector = 0.0;
  double memory_bw = 0.0;

  void validate() const;
};

enum class ResourceClass { kCompute = 0, kMemory = 1 };

ResourceClass resource_class(const ResourceProfile& p);
ResourceProfile stage_resource_profile(Stage s);
std::string_view resource_class_name(ResourceClass c);

class InterferenceMatrix {
 public:
  // Same-class and cross-class slowdown coefficients.
  explicit InterferenceMatrix(double same = 0.30, double cross = 0.05);

  double gamma(ResourceClass a, ResourceClass b) const {
    return g_[static_cast<int>(a)][static_cast<int>(b)];
  }
  void set(ResourceClass a, ResourceClass b, double value);

  static InterferenceMatrix zero() { return InterferenceMatrix(0.0, 0.0); }

 private:
  std::array<std::array<double, 2>, 2> g_{};
};

double encode_latency(const ModelProfile& m, std::int64_t visual_tokens);
double prefill_latency(const ModelProfile& m, std::int64_t total_tokens);
double decode_step_latency(const ModelProfile& m, std::int64_t batch_size,
                           double mean_kv_len);

double feature_bytes(const ModelProfile& m, std::int64_t visual_tokens);
double kv_bytes(const ModelProfile& m, std::int64_t tokens);

double transfer_latency(const LinkProfile& link, double bytes);

double interference_factor(const InterferenceMatrix& matrix,
                           const ResourceProfile& me,
                           std::span<const ResourceProfile> active_peers);

double tp_adjust(double base_latency, int tp_degree, std::int64_t layers,
                 double sync_per_layer);

enum class CalibrationForm { kAffine, kQuadratic };

struct CalibrationResult {
  std::vector<double> coeffs;     // c0, c1[, c2]
  std::vector<double> residuals;  // observed - fitted, per point
  double max_abs_residual = 0.0;

  Poly2 poly() const;
};

// Non-negative least squares over the chosen polynomial form.
CalibrationResult calibrate(std::span<const std::pair<double, double>> points,
                            CalibrationForm form);

// CSV with columns x, observed_ms (an optional header row is skipped).
std::vector<std::pair<double, double>> load_calibration_csv(
    const std::string& path);

}  // namespace epdsim

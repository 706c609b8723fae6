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

#include "epdsim/costmodel.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "epdsim/error.h"

namespace epdsim {

namespace {

bool non_negative(const Poly2& p) {
  return p.c0 >= 0.0 && p.c1 >= 0.0 && p.c2 >= 0.0;
}

// Image-feature transfers measured at six resolutions: (visual tokens, ms).
constexpr std::array<std::pair<double, double>, 6> kFeatureTransfers = {{
    {100, 8.145},
    {400, 15.819},
    {529, 17.019},
    {1196, 38.776},
    {2691, 80.771},
    {16206, 729.724},
}};

// E->P scheduling delay at the same six resolutions: (visual tokens, ms).
constexpr std::array<std::pair<double, double>, 6> kDispatchDelays = {{
    {100, 30.803},
    {400, 42.406},
    {529, 49.549},
    {1196, 81.028},
    {2691, 151.77},
    {16206, 728.109},
}};

// Layer-wise KV transfer of 16 concurrent sequences: (tokens, total ms).
constexpr std::array<std::pair<double, double>, 2> kLayerwiseKv = {{
    {1024.0 * 16, 1127.45},
    {2048.0 * 16, 1688.40},
}};

// Prefill of 16 concurrent sequences with grouped KV transfer.
constexpr std::array<std::pair<double, double>, 2> kPrefillAnchors = {{
    {1024.0 * 16, 6610.57},
    {2048.0 * 16, 14261.21},
}};

// Bytes moved per token per layer, from the measured bandwidth-latency
// product of the layer-wise KV rows (7.98 GB/s over 1127.45 ms).
constexpr std::int64_t kLayerKvBytesPerTokenLayer = 19612;

ModelProfile serving_profile() {
  ModelProfile m;
  m.name = "pangu7bvl-like";
  m.feature_dim = 3584;
  m.bytes_per_element = 2;
  m.llm_layers = 28;
  m.kv_bytes_per_token_per_layer = 2048;  // 4 KV heads x 128 dim x K,V x fp16
  m.encode = {1.0, 0.044, 5e-7};
  m.prefill = {2.0, 0.044, 1e-7};
  m.decode = {18.0, 0.1, 2e-4};
  m.tp_sync_per_layer = 0.5;
  return m;
}

}  // namespace

void ModelProfile::validate() const {
  if (feature_dim < 1) throw InvalidInput("model '" + name + "': feature_dim < 1");
  if (llm_layers < 1) throw InvalidInput("model '" + name + "': llm_layers < 1");
  if (bytes_per_element < 1)
    throw InvalidInput("model '" + name + "': bytes_per_element < 1");
  if (kv_bytes_per_token_per_layer < 0)
    throw InvalidInput("model '" + name + "': kv bytes must be >= 0");
  if (!non_negative(encode) || !non_negative(prefill) || !non_negative(decode) ||
      tp_sync_per_layer < 0.0)
    throw InvalidInput("model '" + name + "': coefficients must be >= 0");
}

ModelProfile model_profile(std::string_view name) {
  if (name == "pangu7bvl-like") return serving_profile();
  if (name == "pangu7bvl-layerkv") {
    ModelProfile m = serving_profile();
    m.name = "pangu7bvl-layerkv";
    m.kv_bytes_per_token_per_layer = kLayerKvBytesPerTokenLayer;
    std::vector<std::pair<double, double>> pts = {{0.0, 0.0}};
    pts.insert(pts.end(), kPrefillAnchors.begin(), kPrefillAnchors.end());
    m.prefill = calibrate(pts, CalibrationForm::kQuadratic).poly();
    return m;
  }
  throw LookupError("unknown model profile '" + std::string(name) + "'");
}

std::vector<std::string> model_profile_names() {
  return {"pangu7bvl-like", "pangu7bvl-layerkv"};
}

void LinkProfile::validate() const {
  if (points.empty()) {
    if (!(bandwidth > 0.0)) throw InvalidInput("link bandwidth must be > 0");
    if (!(handshake >= 0.0)) throw InvalidInput("link handshake must be >= 0");
    return;
  }
  if (points.size() < 2)
    throw InvalidInput("piecewise link needs at least two points");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].first > points[i - 1].first))
      throw InvalidInput("piecewise link points must have increasing bytes");
  }
}

LinkProfile measured_feature_link() {
  LinkProfile link;
  const double bytes_per_token = 3584.0 * 2.0;
  for (auto [tokens, ms] : kFeatureTransfers)
    link.points.emplace_back(tokens * bytes_per_token, ms);
  // Affine fields describe the last segment, for reporting only.
  const auto& a = link.points[link.points.size() - 2];
  const auto& b = link.points.back();
  link.bandwidth = (b.first - a.first) / (b.second - a.second);
  link.handshake = 0.0;
  return link;
}

LinkProfile layer_kv_link() {
  // Per-layer transfer time as a function of per-layer bytes.
  std::vector<std::pair<double, double>> pts;
  for (auto [tokens, total_ms] : kLayerwiseKv)
    pts.emplace_back(tokens * kLayerKvBytesPerTokenLayer, total_ms / 28.0);
  const CalibrationResult fit = calibrate(pts, CalibrationForm::kAffine);
  LinkProfile link;
  link.handshake = fit.coeffs[0];
  link.bandwidth = 1.0 / fit.coeffs[1];
  return link;
}

Poly2 measured_dispatch_latency() {
  return calibrate(kDispatchDelays, CalibrationForm::kAffine).poly();
}

LinkProfiles default_links() {
  LinkProfiles l;
  l.feature_inter = measured_feature_link();
  l.feature_intra = {1.0e8, 0.05, {}};  // 100 GB/s on-device copy
  l.kv_inter = {1.6e7, 2.0, {}};        // 16 GB/s, 2 ms metadata handshake
  l.kv_intra = {1.0e8, 0.05, {}};
  return l;
}

void ResourceProfile::validate() const {
  for (double v : {ai_core, ai_vector, memory_bw}) {
    if (!(v >= 0.0 && v <= 1.0))
      throw InvalidInput("resource profile components must lie in [0, 1]");
  }
}

ResourceClass resource_class(const ResourceProfile& p) {
  return std::max(p.ai_core, p.ai_vector) >= p.memory_bw
             ? ResourceClass::kCompute
             : ResourceClass::kMemory;
}

ResourceProfile stage_resource_profile(Stage s) {
  switch (s) {
    case Stage::kEncode:
      return {0.8, 0.4, 0.3};
    case Stage::kPrefill:
      return {0.9, 0.3, 0.4};
    case Stage::kDecode:
      return {0.2, 0.3, 0.9};
  }
  return {};
}

std::string_view resource_class_name(ResourceClass c) {
  return c == ResourceClass::kCompute ? "compute" : "memory";
}

InterferenceMatrix::InterferenceMatrix(double same, double cross) {
  if (same < 0.0 || cross < 0.0)
    throw InvalidInput("interference coefficients must be >= 0");
  g_[0][0] = g_[1][1] = same;
  g_[0][1] = g_[1][0] = cross;
}

void InterferenceMatrix::set(ResourceClass a, ResourceClass b, double value) {
  if (value < 0.0) throw InvalidInput("interference coefficients must be >= 0");
  g_[static_cast<int>(a)][static_cast<int>(b)] = value;
  g_[static_cast<int>(b)][static_cast<int>(a)] = value;
}

double encode_latency(const ModelProfile& m, std::int64_t visual_tokens) {
  if (visual_tokens < 0) throw InvalidInput("encode_latency: tokens < 0");
  if (visual_tokens == 0) return 0.0;
  return m.encode(static_cast<double>(visual_tokens));
}

double prefill_latency(const ModelProfile& m, std::int64_t total_tokens) {
  if (total_tokens < 0) throw InvalidInput("prefill_latency: tokens < 0");
  return m.prefill(static_cast<double>(total_tokens));
}

double decode_step_latency(const ModelProfile& m, std::int64_t batch_size,
                           double mean_kv_len) {
  if (batch_size < 0 || mean_kv_len < 0.0)
    throw InvalidInput("decode_step_latency: negative argument");
  const double b = static_cast<double>(batch_size);
  return m.decode.c0 + m.decode.c1 * b + m.decode.c2 * b * mean_kv_len;
}

double feature_bytes(const ModelProfile& m, std::int64_t visual_tokens) {
  if (visual_tokens < 0) throw InvalidInput("feature_bytes: tokens < 0");
  return static_cast<double>(visual_tokens) * m.feature_dim *
         m.bytes_per_element;
}

double kv_bytes(const ModelProfile& m, std::int64_t tokens) {
  if (tokens < 0) throw InvalidInput("kv_bytes: tokens < 0");
  return static_cast<double>(tokens) * m.llm_layers *
         m.kv_bytes_per_token_per_layer;
}

double transfer_latency(const LinkProfile& link, double bytes) {
  if (bytes < 0.0) throw InvalidInput("transfer_latency: bytes < 0");
  if (link.points.empty()) return link.handshake + bytes / link.bandwidth;

  const auto& pts = link.points;
  std::size_t hi = 1;
  while (hi + 1 < pts.size() && bytes > pts[hi].first) ++hi;
  const auto& a = pts[hi - 1];
  const auto& b = pts[hi];
  const double t = (bytes - a.first) / (b.first - a.first);
  return std::max(0.0, a.second + t * (b.second - a.second));
}

double interference_factor(const InterferenceMatrix& matrix,
                           const ResourceProfile& me,
                           std::span<const ResourceProfile> active_peers) {
  double factor = 1.0;
  const ResourceClass mine = resource_class(me);
  for (const auto& peer : active_peers)
    factor += matrix.gamma(mine, resource_class(peer));
  return factor;
}

double tp_adjust(double base_latency, int tp_degree, std::int64_t layers,
                 double sync_per_layer) {
  if (tp_degree < 1) throw InvalidInput("tp_adjust: tp_degree must be >= 1");
  if (tp_degree == 1) return base_latency;
  return base_latency / tp_degree +
         static_cast<double>(layers) * sync_per_layer;
}

Poly2 CalibrationResult::poly() const {
  Poly2 p;
  p.c0 = coeffs.size() > 0 ? coeffs[0] : 0.0;
  p.c1 = coeffs.size() > 1 ? coeffs[1] : 0.0;
  p.c2 = coeffs.size() > 2 ? coeffs[2] : 0.0;
  return p;
}

CalibrationResult calibrate(std::span<const std::pair<double, double>> points,
                            CalibrationForm form) {
  const int k = form == CalibrationForm::kAffine ? 2 : 3;
  std::set<double> distinct;
  for (const auto& [x, y] : points) {
    if (!std::isfinite(x) || !std::isfinite(y))
      throw CalibrationError("calibrate: non-finite calibration point");
    distinct.insert(x);
  }
  if (static_cast<int>(distinct.size()) < k)
    throw CalibrationError("calibrate: need at least " + std::to_string(k) +
                           " distinct x values, got " +
                           std::to_string(distinct.size()));

  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = points[i].first;
    a(i, 0) = 1.0;
    a(i, 1) = x;
    if (k == 3) a(i, 2) = x * x;
    y(i) = points[i].second;
  }
  Eigen::VectorXd scale(k);
  for (int j = 0; j < k; ++j) {
    const double norm = a.col(j).norm();
    scale(j) = norm > 0.0 ? norm : 1.0;
    a.col(j) /= scale(j);
  }

  // Exact NNLS by enumerating the passive set: with at most three
  // coefficients the optimum is the best feasible unconstrained fit over some
  // subset of free columns.
  Eigen::VectorXd best = Eigen::VectorXd::Zero(k);
  double best_sse = y.squaredNorm();
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < k; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(c) = a.col(cols[c]);
    const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(y);
    if ((sol.array() < -1e-12).any()) continue;
    Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
    for (std::size_t c = 0; c < cols.size(); ++c)
      full(cols[c]) = std::max(0.0, sol(c));
    const double sse = (a * full - y).squaredNorm();
    if (sse < best_sse - 1e-12 * std::max(1.0, best_sse)) {
      best_sse = sse;
      best = full;
    }
  }

  CalibrationResult out;
  for (int j = 0; j < k; ++j) out.coeffs.push_back(best(j) / scale(j));
  const Poly2 p = out.poly();
  for (const auto& [x, obs] : points) {
    const double r = obs - p(x);
    out.residuals.push_back(r);
    out.max_abs_residual = std::max(out.max_abs_residual, std::abs(r));
  }
  return out;
}

std::vector<std::pair<double, double>> load_calibration_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("cannot open calibration file '" + path + "'");
  std::vector<std::pair<double, double>> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string xs, ys;
    if (!std::getline(row, xs, ',') || !std::getline(row, ys, ','))
      throw CalibrationError("line " + std::to_string(lineno) +
                             ": expected 'x,observed_ms'");
    try {
      std::size_t used_x = 0, used_y = 0;
      const double x = std::stod(xs, &used_x);
      const double y = std::stod(ys, &used_y);
      pts.emplace_back(x, y);
    } catch (const std::exception&) {
      if (lineno == 1) continue;  // header
      throw CalibrationError("line " + std::to_string(lineno) +
                             ": non-numeric value");
    }
  }
  return pts;
}

}  // namespace epdsim

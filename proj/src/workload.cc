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

#include "epdsim/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "epdsim/error.h"
#include "json.hpp"

namespace epdsim {

namespace {

std::int64_t round_half_up_div(std::int64_t num, std::int64_t den) {
  return (2 * num + den) / (2 * den);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::int64_t draw_text_tokens(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean >= 1.0) {
    std::geometric_distribution<std::int64_t> geo(1.0 / mean);
    return 1 + geo(rng);
  }
  std::geometric_distribution<std::int64_t> geo(1.0 / (1.0 + mean));
  return geo(rng);
}

ImageDims scaled(const ImageDims& base, double factor) {
  return {std::max(1, static_cast<int>(std::lround(base.width * factor))),
          std::max(1, static_cast<int>(std::lround(base.height * factor)))};
}

}  // namespace

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kImage:
      return "image";
    case Modality::kAudio:
      return "audio";
    case Modality::kVideo:
      return "video";
    case Modality::kText:
      return "text";
  }
  return "unknown";
}

bool Request::is_multimodal() const {
  return std::any_of(inputs.begin(), inputs.end(), [](const ModalInput& in) {
    return in.kind != Modality::kText;
  });
}

std::int64_t Request::visual_tokens() const {
  std::int64_t total = 0;
  for (const auto& in : inputs) {
    if (in.kind != Modality::kText) total += in.visual_tokens;
  }
  return total;
}

void WorkloadProfile::validate() const {
  if (!(multimodal_fraction >= 0.0 && multimodal_fraction <= 1.0))
    throw InvalidInput("workload '" + name +
                       "': multimodal_fraction must lie in [0, 1]");
  if (!(per_npu_rate > 0.0))
    throw InvalidInput("workload '" + name + "': per_npu_rate must be > 0");
  if (output_tokens < 1)
    throw InvalidInput("workload '" + name + "': output_tokens must be >= 1");
  if (image_dims.width <= 0 || image_dims.height <= 0)
    throw InvalidInput("workload '" + name + "': image dims must be positive");
  if (!(dim_jitter >= 0.0 && dim_jitter < 1.0))
    throw InvalidInput("workload '" + name + "': dim_jitter must lie in [0, 1)");
  if (patch <= 0) throw InvalidInput("workload '" + name + "': patch must be > 0");
  if (mean_text_tokens < 0.0)
    throw InvalidInput("workload '" + name + "': mean_text_tokens must be >= 0");
  if (image_pool < 0)
    throw InvalidInput("workload '" + name + "': image_pool must be >= 0");
}

WorkloadProfile workload_profile(std::string_view name) {
  WorkloadProfile p;
  if (name == "sharegpt4o-like") {
    p.name = "sharegpt4o-like";
    p.multimodal_fraction = 1.0;
    p.image_dims = {802, 652};
    p.dim_jitter = 0.2;
    p.mean_text_tokens = 9.6;
    p.output_tokens = 64;
    p.per_npu_rate = 2.0;
    return p;
  }
  if (name == "visualweb-like") {
    p.name = "visualweb-like";
    p.multimodal_fraction = 0.5;
    p.image_dims = {1280, 720};
    p.dim_jitter = 0.0;
    p.mean_text_tokens = 63.1;
    p.output_tokens = 64;
    p.per_npu_rate = 2.0;
    return p;
  }
  throw LookupError("unknown workload profile '" + std::string(name) + "'");
}

std::vector<std::string> workload_profile_names() {
  return {"sharegpt4o-like", "visualweb-like"};
}

std::int64_t visual_token_count(int width, int height, int patch) {
  if (width <= 0 || height <= 0 || patch <= 0)
    throw InvalidInput("visual_token_count: dimensions and patch must be > 0");
  const std::int64_t rows = round_half_up_div(height, patch);
  const std::int64_t cols = round_half_up_div(width, patch);
  return std::max<std::int64_t>(1, rows * cols);
}

std::uint64_t content_hash_of(std::int64_t width, std::int64_t height,
                              std::int64_t salt) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(width));
  h = splitmix64(h ^ static_cast<std::uint64_t>(height));
  return splitmix64(h ^ static_cast<std::uint64_t>(salt));
}

std::vector<Request> generate_trace(const WorkloadProfile& profile,
                                    int npu_count, double duration_s,
                                    std::uint64_t seed,
                                    std::optional<std::size_t> max_requests) {
  profile.validate();
  if (npu_count < 1) throw InvalidInput("generate_trace: npu_count must be >= 1");
  if (!(duration_s > 0.0))
    throw InvalidInput("generate_trace: duration must be > 0");
  if (std::isinf(duration_s) && !max_requests)
    throw InvalidInput("generate_trace: unbounded duration needs max_requests");

  std::mt19937_64 rng(seed);
  const double rate_per_ms = profile.per_npu_rate * npu_count / 1000.0;
  std::exponential_distribution<double> gap(rate_per_ms);
  std::bernoulli_distribution multimodal(profile.multimodal_fraction);
  std::uniform_real_distribution<double> jitter(1.0 - profile.dim_jitter,
                                                1.0 + profile.dim_jitter);

  std::vector<ImageDims> pool;
  for (int i = 0; i < profile.image_pool; ++i)
    pool.push_back(scaled(profile.image_dims, jitter(rng)));
  std::uniform_int_distribution<int> pick(0, std::max(0, profile.image_pool - 1));

  const double horizon_ms = duration_s * 1000.0;
  std::vector<Request> trace;
  double t = 0.0;
  for (std::int64_t id = 0;; ++id) {
    if (max_requests && trace.size() >= *max_requests) break;
    t += gap(rng);
    if (t > horizon_ms) break;
    Request r;
    r.id = id;
    r.arrival_ms = t;
    r.output_tokens = profile.output_tokens;
    r.text_tokens = draw_text_tokens(rng, profile.mean_text_tokens);
    if (multimodal(rng)) {
      ModalInput img;
      img.kind = Modality::kImage;
      if (pool.empty()) {
        const ImageDims d = scaled(profile.image_dims, jitter(rng));
        img.width = d.width;
        img.height = d.height;
        img.content_hash = content_hash_of(d.width, d.height, id);
      } else {
        const int idx = pick(rng);
        img.width = pool[idx].width;
        img.height = pool[idx].height;
        img.content_hash = content_hash_of(img.width, img.height, -(idx + 1));
      }
      img.visual_tokens = visual_token_count(img.width, img.height, profile.patch);
      r.inputs.push_back(img);
    }
    trace.push_back(std::move(r));
  }
  return trace;
}

namespace {

using nlohmann::json;

std::int64_t require_int(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError("line " + std::to_string(line) + ": missing field '" +
                         key + "'",
                     line, key);
  if (!it->is_number_integer())
    throw ParseError("line " + std::to_string(line) + ": field '" + key +
                         "' must be an integer",
                     line, key);
  return it->get<std::int64_t>();
}

ModalInput image_from(const json& wh, std::int64_t id, std::size_t index,
                      std::size_t line, int patch) {
  if (!wh.is_array() || wh.size() != 2 || !wh[0].is_number_integer() ||
      !wh[1].is_number_integer())
    throw ParseError("line " + std::to_string(line) +
                         ": 'image' entries must be [width, height]",
                     line, "image");
  ModalInput img;
  img.kind = Modality::kImage;
  img.width = wh[0].get<int>();
  img.height = wh[1].get<int>();
  if (img.width <= 0 || img.height <= 0)
    throw ParseError("line " + std::to_string(line) +
                         ": image dimensions must be positive",
                     line, "image");
  img.visual_tokens = visual_token_count(img.width, img.height, patch);
  const std::int64_t salt =
      index == 0 ? id : id ^ static_cast<std::int64_t>(splitmix64(index));
  img.content_hash = content_hash_of(img.width, img.height, salt);
  return img;
}

Request parse_line(const std::string& text, std::size_t line, int patch) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(line) + ": " + e.what(), line);
  }
  if (!obj.is_object())
    throw ParseError("line " + std::to_string(line) + ": expected an object",
                     line);

  Request r;
  r.id = require_int(obj, "id", line);
  auto arrival = obj.find("arrival_ms");
  if (arrival == obj.end() || !arrival->is_number())
    throw ParseError("line " + std::to_string(line) +
                         ": missing numeric field 'arrival_ms'",
                     line, "arrival_ms");
  r.arrival_ms = arrival->get<double>();
  if (!(r.arrival_ms >= 0.0) || !std::isfinite(r.arrival_ms))
    throw ParseError("line " + std::to_string(line) +
                         ": arrival_ms must be finite and >= 0",
                     line, "arrival_ms");
  r.text_tokens = require_int(obj, "text_tokens", line);
  r.output_tokens = require_int(obj, "output_tokens", line);
  if (r.text_tokens < 0)
    throw ParseError("line " + std::to_string(line) + ": text_tokens < 0", line,
                     "text_tokens");
  if (r.output_tokens < 1)
    throw ParseError("line " + std::to_string(line) + ": output_tokens < 1",
                     line, "output_tokens");

  if (auto img = obj.find("image"); img != obj.end() && !img->is_null()) {
    if (img->is_array() && !img->empty() && img->at(0).is_array()) {
      for (std::size_t i = 0; i < img->size(); ++i)
        r.inputs.push_back(image_from(img->at(i), r.id, i, line, patch));
    } else {
      r.inputs.push_back(image_from(*img, r.id, 0, line, patch));
    }
  }
  if (auto h = obj.find("content_hash"); h != obj.end()) {
    if (!h->is_number_integer())
      throw ParseError("line " + std::to_string(line) +
                           ": content_hash must be an integer",
                       line, "content_hash");
    const auto value = h->is_number_unsigned()
                           ? h->get<std::uint64_t>()
                           : static_cast<std::uint64_t>(h->get<std::int64_t>());
    for (std::size_t i = 0; i < r.inputs.size(); ++i)
      r.inputs[i].content_hash = i == 0 ? value : splitmix64(value ^ i);
  }
  if (auto vt = obj.find("visual_tokens"); vt != obj.end()) {
    if (!vt->is_number_integer() || vt->get<std::int64_t>() < 1)
      throw ParseError("line " + std::to_string(line) +
                           ": visual_tokens must be an integer >= 1",
                       line, "visual_tokens");
    if (r.inputs.size() == 1) r.inputs[0].visual_tokens = vt->get<std::int64_t>();
  }
  for (auto [key, kind] : {std::pair{"audio_tokens", Modality::kAudio},
                           std::pair{"video_tokens", Modality::kVideo}}) {
    auto it = obj.find(key);
    if (it == obj.end()) continue;
    if (!it->is_number_integer() || it->get<std::int64_t>() < 1)
      throw ParseError("line " + std::to_string(line) + ": " + key +
                           " must be an integer >= 1",
                       line, key);
    ModalInput in;
    in.kind = kind;
    in.visual_tokens = it->get<std::int64_t>();
    in.content_hash = content_hash_of(static_cast<std::int64_t>(kind),
                                      in.visual_tokens, r.id);
    r.inputs.push_back(in);
  }
  return r;
}

}  // namespace

LoadedTrace parse_trace(std::string_view text, int patch) {
  LoadedTrace out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.requests.push_back(parse_line(line, lineno, patch));
  }
  auto by_arrival = [](const Request& a, const Request& b) {
    return a.arrival_ms < b.arrival_ms;
  };
  if (!std::is_sorted(out.requests.begin(), out.requests.end(), by_arrival)) {
    std::stable_sort(out.requests.begin(), out.requests.end(), by_arrival);
    out.reordered = true;
  }
  return out;
}

LoadedTrace load_trace(const std::string& path, int patch) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str(), patch);
}

std::string format_trace_line(const Request& r) {
  nlohmann::ordered_json obj;
  obj["id"] = r.id;
  obj["arrival_ms"] = r.arrival_ms;
  nlohmann::ordered_json images = nlohmann::ordered_json::array();
  for (const auto& in : r.inputs) {
    if (in.kind == Modality::kImage) images.push_back({in.width, in.height});
  }
  if (images.size() == 1) {
    obj["image"] = images[0];
    obj["content_hash"] = r.inputs.front().content_hash;
  } else if (images.size() > 1) {
    obj["image"] = images;
  }
  obj["text_tokens"] = r.text_tokens;
  obj["output_tokens"] = r.output_tokens;
  return obj.dump();
}

}  // namespace epdsim

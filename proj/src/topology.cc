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

#include "epdsim/topology.h"

#include <algorithm>
#include <cctype>

#include "epdsim/error.h"

namespace epdsim {

namespace {

constexpr std::string_view kTimes = "\xC3\x97";  // U+00D7

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(const std::string& msg, std::string_view token) {
  throw ParseError("deployment: " + msg, 0, std::string(token));
}

int parse_count(std::string_view digits, std::string_view token,
                const char* what) {
  if (digits.empty() ||
      !std::all_of(digits.begin(), digits.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    fail(std::string("malformed ") + what + " in '" + std::string(token) + "'",
         token);
  if (digits.size() > 6) fail(std::string(what) + " too large", token);
  const int v = std::stoi(std::string(digits));
  if (v < 1)
    fail(std::string(what) + " must be >= 1 in '" + std::string(token) + "'",
         token);
  return v;
}

// Splits "<body><marker><m>" into body and replica count.
std::pair<std::string_view, int> split_replicas(std::string_view group) {
  std::size_t pos = std::string_view::npos;
  std::size_t marker_len = 0;
  const std::size_t search_from =
      group.starts_with('(') ? std::min(group.rfind(')'), group.size()) : 0;
  for (std::size_t i = search_from; i < group.size(); ++i) {
    if (group.substr(i).starts_with(kTimes)) {
      pos = i;
      marker_len = kTimes.size();
      break;
    }
    if (group[i] == 'x' || group[i] == 'X' || group[i] == '*') {
      pos = i;
      marker_len = 1;
      break;
    }
  }
  if (pos == std::string_view::npos) return {group, 1};
  return {trim(group.substr(0, pos)),
          parse_count(trim(group.substr(pos + marker_len)), group,
                      "replica count")};
}

std::vector<Stage> parse_stage_token(std::string_view token,
                                     std::vector<bool>& seen_in_group) {
  if (token.empty()) fail("empty stage token", token);
  std::vector<Stage> stages;
  for (char c : token) {
    Stage s;
    switch (c) {
      case 'E':
        s = Stage::kEncode;
        break;
      case 'P':
        s = Stage::kPrefill;
        break;
      case 'D':
        s = Stage::kDecode;
        break;
      default: {
        const std::string letter(1, c);
        fail("unknown stage letter '" + letter + "' in token '" +
                 std::string(token) + "'",
             letter);
      }
    }
    const auto idx = static_cast<std::size_t>(s);
    if (seen_in_group[idx])
      fail("stage '" + std::string(1, c) + "' repeated within group '" +
               std::string(token) + "'",
           std::string(1, c));
    seen_in_group[idx] = true;
    stages.push_back(s);
  }
  std::sort(stages.begin(), stages.end());
  return stages;
}

DeviceGroup parse_group(std::string_view raw) {
  const std::string_view text = trim(raw);
  if (text.empty()) fail("empty device group", raw);
  auto [body, replicas] = split_replicas(text);

  DeviceGroup g;
  g.replicas = replicas;
  std::vector<bool> seen(3, false);

  if (body.starts_with('(')) {
    if (!body.ends_with(')')) fail("unbalanced parentheses in '" + std::string(text) + "'", text);
    const std::string_view inner = trim(body.substr(1, body.size() - 2));
    if (inner.empty()) fail("empty parentheses", "()");
    if (inner.find_first_of("()") != std::string_view::npos)
      fail("nested parentheses in '" + std::string(text) + "'", text);
    g.kind = DeviceGroup::Kind::kColocated;
    std::size_t start = 0;
    while (true) {
      const std::size_t dash = inner.find('-', start);
      const std::string_view part =
          trim(inner.substr(start, dash == std::string_view::npos
                                       ? std::string_view::npos
                                       : dash - start));
      if (part.empty()) fail("empty member in '" + std::string(text) + "'", text);
      if (part.starts_with("TP"))
        fail("tensor-parallel group inside parentheses: '" + std::string(part) + "'",
             part);
      g.members.push_back(parse_stage_token(part, seen));
      if (dash == std::string_view::npos) break;
      start = dash + 1;
    }
    return g;
  }
  if (body.find_first_of("()") != std::string_view::npos)
    fail("unbalanced parentheses in '" + std::string(text) + "'", text);
  if (body.starts_with("TP")) {
    g.kind = DeviceGroup::Kind::kTensorParallel;
    g.tp_degree = parse_count(body.substr(2), body, "tensor-parallel degree");
    g.members.push_back({Stage::kEncode, Stage::kPrefill, Stage::kDecode});
    return g;
  }
  g.kind = DeviceGroup::Kind::kBare;
  g.members.push_back(parse_stage_token(body, seen));
  return g;
}

ResourceProfile blended_profile(const std::vector<Stage>& stages) {
  ResourceProfile p;
  for (Stage s : stages) {
    const ResourceProfile sp = stage_resource_profile(s);
    p.ai_core = std::max(p.ai_core, sp.ai_core);
    p.ai_vector = std::max(p.ai_vector, sp.ai_vector);
    p.memory_bw = std::max(p.memory_bw, sp.memory_bw);
  }
  return p;
}

std::string format_stages(const std::vector<Stage>& stages) {
  std::string s;
  for (Stage st : stages) s.push_back(stage_letter(st));
  return s;
}

std::string format_group(const DeviceGroup& g) {
  std::string s;
  switch (g.kind) {
    case DeviceGroup::Kind::kTensorParallel:
      s = "TP" + std::to_string(g.tp_degree);
      break;
    case DeviceGroup::Kind::kBare:
      s = format_stages(g.members.front());
      break;
    case DeviceGroup::Kind::kColocated:
      s = "(";
      for (std::size_t i = 0; i < g.members.size(); ++i) {
        if (i) s += "-";
        s += format_stages(g.members[i]);
      }
      s += ")";
      break;
  }
  if (g.replicas > 1) s += std::string(kTimes) + std::to_string(g.replicas);
  return s;
}

}  // namespace

bool Instance::has(Stage s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

const Instance& Deployment::instance(int id) const {
  if (id < 0 || id >= static_cast<int>(instances.size()))
    throw LookupError("unknown instance id " + std::to_string(id));
  return instances[static_cast<std::size_t>(id)];
}

std::vector<int> Deployment::instances_with(Stage s) const {
  std::vector<int> out;
  for (const auto& inst : instances)
    if (inst.has(s)) out.push_back(inst.id);
  return out;
}

Deployment parse_deployment(std::string_view notation) {
  const std::string_view text = trim(notation);
  if (text.empty()) throw ParseError("deployment: empty notation");

  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') {
      if (++depth > 1) fail("nested parentheses", text);
    } else if (text[i] == ')') {
      if (--depth < 0) fail("unbalanced ')'", ")");
    } else if (text[i] == '-' && depth == 0) {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  if (depth != 0) fail("unbalanced '('", "(");
  parts.push_back(text.substr(start));

  Deployment d;
  for (auto part : parts) d.groups.push_back(parse_group(part));

  for (const auto& g : d.groups) {
    for (int rep = 0; rep < g.replicas; ++rep) {
      if (g.kind == DeviceGroup::Kind::kTensorParallel) {
        Instance inst;
        inst.id = static_cast<int>(d.instances.size());
        inst.stages = g.members.front();
        inst.tp_degree = g.tp_degree;
        for (int k = 0; k < g.tp_degree; ++k) inst.device_ids.push_back(d.devices++);
        inst.resource_profile = blended_profile(inst.stages);
        d.instances.push_back(inst);
        continue;
      }
      const int device = d.devices++;
      for (const auto& members : g.members) {
        Instance inst;
        inst.id = static_cast<int>(d.instances.size());
        inst.stages = members;
        inst.device_ids = {device};
        inst.resource_profile = blended_profile(inst.stages);
        d.instances.push_back(inst);
      }
    }
  }
  for (const auto& inst : d.instances)
    for (int dev : inst.device_ids) d.colocation[dev].insert(inst.id);

  for (Stage s : kAllStages) {
    if (d.instances_with(s).empty())
      throw ParseError("deployment: no instance runs stage '" +
                           std::string(1, stage_letter(s)) + "' in '" +
                           std::string(text) + "'",
                       0, std::string(1, stage_letter(s)));
  }
  d.notation = format_deployment(d);
  return d;
}

std::string format_deployment(const Deployment& d) {
  std::string s;
  for (std::size_t i = 0; i < d.groups.size(); ++i) {
    if (i) s += "-";
    s += format_group(d.groups[i]);
  }
  return s;
}

std::set<int> colocated_peers(const Deployment& d, int instance_id) {
  const Instance& inst = d.instance(instance_id);
  std::set<int> peers;
  for (int dev : inst.device_ids) {
    auto it = d.colocation.find(dev);
    if (it == d.colocation.end()) continue;
    for (int other : it->second)
      if (other != instance_id) peers.insert(other);
  }
  return peers;
}

}  // namespace epdsim

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

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "epdsim/costmodel.h"
#include "epdsim/stage.h"

namespace epdsim {

struct Instance {
  int id = 0;
  std::vector<Stage> stages;  // E -> P -> D order, non-empty
  std::vector<int> device_ids;
  int tp_degree = 1;
  ResourceProfile resource_profile;

  bool has(Stage s) const;
  bool coupled() const { return stages.size() > 1; }

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.id == b.id && a.stages == b.stages &&
           a.device_ids == b.device_ids && a.tp_degree == b.tp_degree;
  }
};

// One top-level group of the notation, kept so the deployment can be printed
// back in canonical form.
struct DeviceGroup {
  enum class Kind { kBare, kColocated, kTensorParallel };
  Kind kind = Kind::kBare;
  std::vector<std::vector<Stage>> members;  // one entry per instance
  int tp_degree = 1;
  int replicas = 1;

  friend bool operator==(const DeviceGroup&, const DeviceGroup&) = default;
};

struct Deployment {
  std::string notation;  // canonical
  int devices = 0;
  std::vector<Instance> instances;
  std::map<int, std::set<int>> colocation;  // device -> instance ids
  std::vector<DeviceGroup> groups;

  const Instance& instance(int id) const;
  std::vector<int> instances_with(Stage s) const;
  // Structural equality: same devices, instances, and groups.
  friend bool operator==(const Deployment& a, const Deployment& b) {
    return a.devices == b.devices && a.instances == b.instances &&
           a.groups == b.groups;
  }
};

Deployment parse_deployment(std::string_view notation);
std::string format_deployment(const Deployment& d);
std::set<int> colocated_peers(const Deployment& d, int instance_id);

}  // namespace epdsim

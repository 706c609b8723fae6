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
#include <string_view>

namespace epdsim {

enum class Stage { kEncode = 0, kPrefill = 1, kDecode = 2 };

inline constexpr std::array<Stage, 3> kAllStages = {
    Stage::kEncode, Stage::kPrefill, Stage::kDecode};

constexpr char stage_letter(Stage s) {
  switch (s) {
    case Stage::kEncode:
      return 'E';
    case Stage::kPrefill:
      return 'P';
    case Stage::kDecode:
      return 'D';
  }
  return '?';
}

constexpr std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kEncode:
      return "encode";
    case Stage::kPrefill:
      return "prefill";
    case Stage::kDecode:
      return "decode";
  }
  return "unknown";
}

}  // namespace epdsim

// Copyright 2026 The kpirl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KPIRL_APPCLI_FORMATS_H_
#define KPIRL_APPCLI_FORMATS_H_

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kpirl/planarworld/world.h"

namespace kpirl {

// 17 significant digits: exact double round-trip.
std::string FormatDouble(double v);

// Fails with an I/O error when `path` exists and overwriting is off.
void CheckOutput(const std::string& path, bool overwrite);
// Writes to path.partial, then renames.
void WriteFileAtomic(const std::string& path, const std::string& contents);

// Demos JSONL: a header record, then one record per frame.
//   {"demo", "frame", "scenario", "seed", "keypoints": [[x, y, m] x 4],
//    "q", "q_dot", "gripper_closed", "cube", "target", "attached",
//    "time_index", "action" (absent on the last frame)}
std::string DemosJsonl(const std::vector<Demonstration>& demos,
                       const nlohmann::json& header);
std::vector<Demonstration> ReadDemosJsonl(const std::string& path);

// Transitions JSONL: header, then {"s", "a", "s_next", "expert"} per line.
std::string TransitionsJsonl(const std::vector<Transition>& data,
                             const nlohmann::json& header);
std::vector<Transition> ReadTransitionsJsonl(const std::string& path);

// Header record of a JSONL dataset.
nlohmann::json ReadJsonlHeader(const std::string& path);

struct Curve {
  std::vector<std::string> columns;  // first is "iteration"
  std::vector<std::vector<double>> rows;
};

// "# provenance" comment line, header row, one row per iteration.
std::string CurveCsv(const Curve& curve, const std::string& provenance);
// Format error naming the line for malformed rows or non-increasing
// iterations.
Curve ReadCurveCsv(const std::string& path);

// Label column first; all inputs must share the same columns.
std::string MergeCurvesCsv(const std::vector<std::pair<std::string, Curve>>& runs,
                           const std::string& provenance);

}  // namespace kpirl

#endif  // KPIRL_APPCLI_FORMATS_H_

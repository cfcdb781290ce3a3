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

// Checkpoint files: one line of compact JSON manifest, then for every tensor
// in manifest order a little-endian uint64 element count followed by that
// many little-endian float64 values (column-major).

#ifndef KPIRL_DYNMODEL_CHECKPOINT_H_
#define KPIRL_DYNMODEL_CHECKPOINT_H_

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kpirl/diffcore/tape.h"
#include "kpirl/dynmodel/mlp.h"

namespace kpirl {

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& Get(const std::string& name) const;
  bool Has(const std::string& name) const;
};

// Writes to a temporary file and renames it into place.
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
// Format error on truncation or a malformed manifest; nothing partial is
// returned.
Checkpoint LoadCheckpoint(const std::string& path);

// Stores `params` under `prefix` (tensors "<prefix>.layer<i>.weight" and so
// on, sizes and activation under meta["mlps"][prefix]).
void PutMlp(Checkpoint& checkpoint, const std::string& prefix,
            const MlpParams& params);
// Shape error naming the layer when the manifest and payload disagree.
MlpParams GetMlp(const Checkpoint& checkpoint, const std::string& prefix);

}  // namespace kpirl

#endif  // KPIRL_DYNMODEL_CHECKPOINT_H_

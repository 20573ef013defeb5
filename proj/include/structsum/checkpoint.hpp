// Copyright 2026 The structsum Authors. All Rights Reserved.
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

#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "structsum/model.hpp"
#include "structsum/tensor.hpp"
#include "structsum/vocab.hpp"

namespace structsum {

struct Checkpoint {
  ModelConfig model;
  nlohmann::json meta;  // everything in the header's "meta" object
  std::vector<NamedArray> arrays;

  const Matrix* find(const std::string& name) const;
};

// Parameters are stored as "param/<name>"; extra arrays (optimiser state)
// keep their given names. meta must be a JSON object; the model config is
// stored under meta["model"].
void save_checkpoint(const std::string& path, const ScriptModel& model, nlohmann::json meta,
                     const std::vector<NamedArray>& extra = {});
Checkpoint load_checkpoint(const std::string& path);

// Copies stored parameters into model. Throws MismatchError when a name is
// missing or a shape differs.
void restore_parameters(ScriptModel& model, const Checkpoint& ckpt);

// Builds the model recorded in ckpt. When vocabularies are given, their
// sizes and digests must match the ones recorded at training time
// (MismatchError otherwise).
ScriptModel model_from_checkpoint(const Checkpoint& ckpt, const Vocabulary* src = nullptr,
                                  const Vocabulary* tgt = nullptr);

}  // namespace structsum

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

#include "structsum/checkpoint.hpp"

#include "structsum/errors.hpp"

namespace structsum {

namespace {
const std::string kParamPrefix = "param/";
}

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a.value;
  return nullptr;
}

void save_checkpoint(const std::string& path, const ScriptModel& model, nlohmann::json meta,
                     const std::vector<NamedArray>& extra) {
  if (!meta.is_object()) throw ValueError("checkpoint meta must be an object");
  meta["model"] = model.config().to_json();
  meta["src_vocab_size"] = model.src_vocab();
  meta["tgt_vocab_size"] = model.tgt_vocab();
  std::vector<NamedArray> arrays;
  arrays.reserve(model.parameters().size() + extra.size());
  for (const auto& [name, t] : model.parameters()) arrays.push_back({kParamPrefix + name, t.value()});
  arrays.insert(arrays.end(), extra.begin(), extra.end());
  save_arrays(path, arrays, meta.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  ArrayFile file = load_arrays(path);
  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(file.meta_json);
    if (!ckpt.meta.contains("model")) throw FormatError(path + ": checkpoint has no model config");
    ckpt.model = ModelConfig::from_json(ckpt.meta["model"]);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }
  ckpt.arrays = std::move(file.arrays);
  return ckpt;
}

void restore_parameters(ScriptModel& model, const Checkpoint& ckpt) {
  for (const auto& [name, t] : model.parameters()) {
    const Matrix* stored = ckpt.find(kParamPrefix + name);
    if (stored == nullptr) throw MismatchError("checkpoint lacks parameter " + name);
    if (!stored->same_shape(t.value()))
      throw MismatchError("parameter " + name + " has shape " + std::to_string(stored->rows()) + "x" +
                          std::to_string(stored->cols()) + " in the checkpoint, model expects " +
                          std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    Tensor handle = t;
    handle.mutable_value() = *stored;
  }
}

ScriptModel model_from_checkpoint(const Checkpoint& ckpt, const Vocabulary* src, const Vocabulary* tgt) {
  const auto sv = ckpt.meta.value("src_vocab_size", std::size_t{0});
  const auto tv = ckpt.meta.value("tgt_vocab_size", std::size_t{0});
  auto check = [&](const Vocabulary* v, std::size_t size, const char* key, const char* what) {
    if (v == nullptr) return;
    if (v->size() != size)
      throw MismatchError(std::string(what) + " vocabulary has " + std::to_string(v->size()) +
                          " entries, checkpoint expects " + std::to_string(size));
    if (ckpt.meta.contains(key) && ckpt.meta[key].get<std::string>() != v->digest())
      throw MismatchError(std::string(what) + " vocabulary digest differs from the checkpoint");
  };
  check(src, sv, "src_vocab_digest", "source");
  check(tgt, tv, "tgt_vocab_digest", "target");
  ScriptModel model(ckpt.model, sv, tv, 0);
  restore_parameters(model, ckpt);
  return model;
}

}  // namespace structsum

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
#include "structsum/dataset.hpp"
#include "structsum/model.hpp"
#include "structsum/train.hpp"

namespace structsum {

// Everything a run needs, addressable by flat key names that mirror the
// ModelConfig / TrainConfig fields (see configs/toy.cfg).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t min_freq = 1;
  std::size_t max_vocab = 0;
  std::size_t max_source_len = 400;
  std::size_t max_target_len = 50;
  MultiViewWeights weights;
  std::size_t beam_size = 5;
  double length_penalty = 1.0;

  // Throws ConfigError on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply(const std::string& assignment);
  void validate() const;

  DatasetOptions dataset_options() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static std::vector<std::string> keys();
};

// '#' starts a comment; blank lines are ignored.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

// The ablation switches: "no-rdw" turns RDW positions into PLAIN layers,
// "no-srpei" does the same for SRPEi positions.
void apply_ablation(ModelConfig& cfg, const std::string& ablation);

}  // namespace structsum

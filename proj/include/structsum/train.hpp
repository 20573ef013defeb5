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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "structsum/dataset.hpp"
#include "structsum/model.hpp"

namespace structsum {

enum class StopMetric { ValidLoss, ValidBleu };

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double warmup_ratio = 0.06;
  double weight_decay = 0.01;  // L2 term added to every gradient
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 200;
  std::size_t max_steps = 0;  // 0 = max_epochs * batches per epoch
  std::size_t early_stop_patience = 20;
  StopMetric stop_metric = StopMetric::ValidLoss;
  // Greedy-decode the validation split every epoch for valid_bleu. Always on
  // when stop_metric is ValidBleu.
  bool track_bleu = true;
  std::size_t decode_max_len = 50;
  bool sort_by_length = false;
  std::uint64_t seed = 1;
  // Writes wall_seconds as 0 so that history files compare bit-for-bit.
  bool deterministic = false;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

std::string to_string(StopMetric m);
StopMetric parse_stop_metric(const std::string& s);

// Linear warmup over ceil(warmup_ratio * total) steps, then linear decay to
// zero at total. step counts from 1.
double scheduled_lr(double base_lr, std::size_t step, std::size_t total, double warmup_ratio);

// Adam over a fixed parameter list with L2 weight decay folded into the
// gradient.
class Adam {
 public:
  Adam(const ParamList& params, double beta1, double beta2, double eps, double weight_decay);

  void step(double lr);
  std::size_t steps() const { return t_; }

  std::vector<NamedArray> state() const;  // "adam.m/<name>", "adam.v/<name>"
  void load_state(const std::vector<NamedArray>& arrays, std::size_t t);

 private:
  ParamList params_;
  std::vector<Matrix> m_, v_;
  double b1_, b2_, eps_, wd_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_bleu = 0.0;
  double lr = 0.0;  // at the last step of the epoch
  double wall_seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

std::string history_csv(const std::vector<EpochRecord>& history);
void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

struct TrainHooks {
  std::function<void(std::size_t step, double loss)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainOutput {
  std::string out_dir;      // empty: nothing is written
  std::string resume_from;  // last.ckpt of an earlier run, or empty
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  bool stopped_early = false;
};

// Mean cross entropy per target token of one batch, on the current tape.
Tensor batch_loss(const ScriptModel& model, const Batch& batch, const ForwardOptions& opt);

// Evaluation-mode mean token loss and next-token accuracy (teacher forcing).
struct TokenStats {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t tokens = 0;
};
TokenStats evaluate_tokens(const ScriptModel& model, const std::vector<Example>& split, const Vocabularies& vocab,
                           std::size_t batch_size = 32);

// Greedy summaries (target-vocabulary tokens) for every example.
std::vector<std::vector<std::string>> greedy_summaries(const ScriptModel& model, const std::vector<Example>& split,
                                                       const Vocabulary& src, const Vocabulary& tgt,
                                                       std::size_t max_len);

// Mean sentence BLEU-4 of greedy summaries against the references.
double corpus_bleu(const ScriptModel& model, const std::vector<Example>& split, const Vocabularies& vocab,
                   std::size_t max_len);

// Writes best.ckpt, last.ckpt and history.csv into out.out_dir when set.
// Throws NumericsError on a non-finite training loss.
TrainResult train(ScriptModel& model, const std::vector<Example>& train_split, const std::vector<Example>& valid_split,
                  const Vocabularies& vocab, const TrainConfig& cfg, const TrainOutput& out = {},
                  const TrainHooks& hooks = {});

}  // namespace structsum

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

#include <functional>
#include <span>
#include <vector>

namespace structsum {

// Log-probabilities of the next token given the decoded prefix, which starts
// with BOS.
using StepFn = std::function<std::vector<double>(std::span<const int> prefix)>;

struct BeamOptions {
  std::size_t beam_size = 5;
  std::size_t max_len = 50;  // generated tokens, EOS included
  double length_penalty = 1.0;
  int bos = 1;
  int eos = 2;
};

struct Hypothesis {
  std::vector<int> tokens;  // without BOS; ends in EOS unless cut at max_len
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / len^length_penalty

  bool ended(int eos) const { return !tokens.empty() && tokens.back() == eos; }
};

double normalized_score(double log_prob, std::size_t length, double length_penalty);

// Length-normalised beam search. Each step keeps the best
// (beam_size - finished) expansions by raw log-probability; expansions ending
// in EOS retire into the finished pool. Ties break towards the
// lexicographically smaller token sequence.
Hypothesis beam_search(const StepFn& step, const BeamOptions& opt);

// Argmax decoding (ties to the smaller token id).
Hypothesis greedy_decode(const StepFn& step, const BeamOptions& opt);

// Strips a trailing EOS.
std::vector<int> strip_eos(const Hypothesis& h, int eos);

}  // namespace structsum

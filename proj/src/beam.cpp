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

#include "structsum/beam.hpp"

#include <algorithm>
#include <cmath>

#include "structsum/errors.hpp"

namespace structsum {

double normalized_score(double log_prob, std::size_t length, double length_penalty) {
  if (length_penalty == 0.0 || length == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), length_penalty);
}

namespace {

std::vector<int> with_bos(int bos, const std::vector<int>& tokens) {
  std::vector<int> prefix;
  prefix.reserve(tokens.size() + 1);
  prefix.push_back(bos);
  prefix.insert(prefix.end(), tokens.begin(), tokens.end());
  return prefix;
}

bool better_raw(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

bool better_final(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis beam_search(const StepFn& step, const BeamOptions& opt) {
  if (opt.beam_size == 0) throw ConfigError("beam_size must be >= 1");
  if (opt.max_len == 0) return {};
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (std::size_t t = 1; t <= opt.max_len && !live.empty(); ++t) {
    std::vector<Hypothesis> cands;
    for (const auto& hyp : live) {
      const auto prefix = with_bos(opt.bos, hyp.tokens);
      const std::vector<double> logp = step(prefix);
      for (std::size_t v = 0; v < logp.size(); ++v) {
        Hypothesis next{hyp.tokens, hyp.log_prob + logp[v], 0.0};
        next.tokens.push_back(static_cast<int>(v));
        cands.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(cands.size(), opt.beam_size - finished.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better_raw);
    cands.resize(keep);

    live.clear();
    for (auto& c : cands) {
      c.score = normalized_score(c.log_prob, c.tokens.size(), opt.length_penalty);
      if (c.ended(opt.eos) || t == opt.max_len)
        finished.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
  }
  return *std::min_element(finished.begin(), finished.end(), better_final);
}

Hypothesis greedy_decode(const StepFn& step, const BeamOptions& opt) {
  Hypothesis hyp;
  for (std::size_t t = 1; t <= opt.max_len; ++t) {
    const std::vector<double> logp = step(with_bos(opt.bos, hyp.tokens));
    // max_element returns the first maximum, i.e. the smallest id on ties.
    const auto best = std::max_element(logp.begin(), logp.end());
    hyp.tokens.push_back(static_cast<int>(best - logp.begin()));
    hyp.log_prob += *best;
    if (hyp.tokens.back() == opt.eos) break;
  }
  hyp.score = normalized_score(hyp.log_prob, hyp.tokens.size(), opt.length_penalty);
  return hyp;
}

std::vector<int> strip_eos(const Hypothesis& h, int eos) {
  std::vector<int> out = h.tokens;
  if (!out.empty() && out.back() == eos) out.pop_back();
  return out;
}

}  // namespace structsum

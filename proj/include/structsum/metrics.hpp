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

namespace structsum {

using Tokens = std::vector<std::string>;

struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;  // at least one
};

// Lowercased, whitespace-split.
Tokens normalize_text(const std::string& text);

// Sentence-level BLEU-4. Clipped n-gram precisions, add-one smoothing for
// n >= 2, brevity penalty exp(1 - r/c) when c < r. Multi-reference scores
// take the best reference.
double bleu4(const EvalPair& pair);
double bleu4(const Tokens& candidate, const Tokens& reference);

std::size_t lcs_length(const Tokens& a, const Tokens& b);
// LCS-based F1 against the best reference.
double rouge_l(const EvalPair& pair);
double rouge_l(const Tokens& candidate, const Tokens& reference);

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_mean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// Exact-match METEOR: alignment maximising matches, then minimising chunks.
// F_mean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3.
MeteorStats meteor_stats(const Tokens& candidate, const Tokens& reference);
double meteor(const EvalPair& pair);
double meteor(const Tokens& candidate, const Tokens& reference);

struct PairScores {
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
};

PairScores score_pair(const EvalPair& pair);

enum class BucketKey { CodeLength, SummaryLength };

// Edges e1 < e2 < ... < ek (e1 > 0) define buckets [0, e1), [e1, e2), ...,
// [ek, inf). An empty edge list means no bucketing.
struct BucketSpec {
  BucketKey key = BucketKey::CodeLength;
  std::vector<std::size_t> edges;
};

struct BucketReport {
  std::size_t lo = 0;
  std::size_t hi = 0;  // exclusive; 0 = unbounded
  std::size_t count = 0;
  PairScores mean;
};

struct CorpusReport {
  std::vector<PairScores> per_pair;
  PairScores overall;
  std::vector<BucketReport> buckets;
};

// lengths[i] is the code or summary length of pair i, per spec.key.
// Throws BucketError on a malformed spec.
CorpusReport corpus_report(const std::vector<EvalPair>& pairs, const std::vector<std::size_t>& lengths,
                           const BucketSpec& spec);

nlohmann::json report_to_json(const CorpusReport& report, const BucketSpec& spec);

}  // namespace structsum

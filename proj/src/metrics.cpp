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

#include "structsum/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "structsum/errors.hpp"

namespace structsum {

Tokens normalize_text(const std::string& text) {
  Tokens out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

namespace {

using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts counts;
  if (t.size() < n) return counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[Tokens(t.begin() + i, t.begin() + i + n)];
  return counts;
}

template <typename F>
double best_over_refs(const EvalPair& pair, F&& f) {
  double best = 0.0;
  for (const auto& ref : pair.references) best = std::max(best, f(pair.candidate, ref));
  return best;
}

}  // namespace

double bleu4(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts c = ngrams(cand, n);
    const NgramCounts r = ngrams(ref, n);
    std::size_t matched = 0;
    std::size_t total = 0;
    for (const auto& [g, cnt] : c) {
      total += cnt;
      auto it = r.find(g);
      if (it != r.end()) matched += std::min(cnt, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / 4.0);
}

double bleu4(const EvalPair& pair) {
  return best_over_refs(pair, [](const Tokens& c, const Tokens& r) { return bleu4(c, r); });
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(const EvalPair& pair) {
  return best_over_refs(pair, [](const Tokens& c, const Tokens& r) { return rouge_l(c, r); });
}

namespace {

// Depth-first search over candidate positions for the exact-match alignment
// with the maximum number of matches and, among those, the fewest chunks.
class ChunkSearch {
 public:
  static constexpr std::size_t kNodeBudget = 2'000'000;

  ChunkSearch(const Tokens& cand, const Tokens& ref) : cand_(cand), ref_(ref), used_(ref.size(), false) {
    std::map<std::string, std::size_t> cc, rc;
    for (const auto& t : cand) ++cc[t];
    for (const auto& t : ref) ++rc[t];
    for (const auto& [t, n] : cc) {
      auto it = rc.find(t);
      const std::size_t m = it == rc.end() ? 0 : std::min(n, it->second);
      need_[t] = m;
      target_ += m;
    }
    remaining_ = cc;
  }

  std::size_t matches() const { return target_; }

  std::size_t min_chunks() {
    if (target_ == 0) return 0;
    best_ = target_ + 1;
    dfs(0, kNone, 0);
    return best_;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  void dfs(std::size_t i, std::size_t prev_j, std::size_t chunks) {
    if (chunks >= best_ || ++nodes_ > kNodeBudget) return;
    if (i == cand_.size()) {
      best_ = chunks;
      return;
    }
    const std::string& tok = cand_[i];
    std::size_t& need = need_[tok];
    std::size_t& rem = remaining_[tok];
    --rem;
    if (need > 0) {
      --need;
      // Continuing the current chunk first finds good bounds early.
      if (prev_j != kNone && prev_j + 1 < ref_.size() && !used_[prev_j + 1] && ref_[prev_j + 1] == tok) {
        used_[prev_j + 1] = true;
        dfs(i + 1, prev_j + 1, chunks);
        used_[prev_j + 1] = false;
      }
      for (std::size_t j = 0; j < ref_.size(); ++j) {
        if (used_[j] || ref_[j] != tok || (prev_j != kNone && j == prev_j + 1)) continue;
        used_[j] = true;
        dfs(i + 1, j, chunks + 1);
        used_[j] = false;
      }
      ++need;
    }
    // Skipping is only allowed if later occurrences can still supply the
    // required matches for this token.
    if (rem >= need) dfs(i + 1, kNone, chunks);
    ++rem;
  }

  const Tokens& cand_;
  const Tokens& ref_;
  std::vector<bool> used_;
  std::map<std::string, std::size_t> need_;
  std::map<std::string, std::size_t> remaining_;
  std::size_t target_ = 0;
  std::size_t best_ = 0;
  std::size_t nodes_ = 0;
};

}  // namespace

MeteorStats meteor_stats(const Tokens& cand, const Tokens& ref) {
  MeteorStats s;
  if (cand.empty() || ref.empty()) return s;
  ChunkSearch search(cand, ref);
  s.matches = search.matches();
  if (s.matches == 0) return s;
  s.chunks = search.min_chunks();
  const double m = static_cast<double>(s.matches);
  s.precision = m / static_cast<double>(cand.size());
  s.recall = m / static_cast<double>(ref.size());
  s.f_mean = 10.0 * s.precision * s.recall / (s.recall + 9.0 * s.precision);
  s.penalty = 0.5 * std::pow(static_cast<double>(s.chunks) / m, 3.0);
  s.score = s.f_mean * (1.0 - s.penalty);
  return s;
}

double meteor(const Tokens& cand, const Tokens& ref) { return meteor_stats(cand, ref).score; }

double meteor(const EvalPair& pair) {
  return best_over_refs(pair, [](const Tokens& c, const Tokens& r) { return meteor(c, r); });
}

PairScores score_pair(const EvalPair& pair) {
  if (pair.references.empty()) throw ValueError("evaluation pair without references");
  return {bleu4(pair), rouge_l(pair), meteor(pair)};
}

namespace {

void accumulate(PairScores& acc, const PairScores& s) {
  acc.bleu4 += s.bleu4;
  acc.rouge_l += s.rouge_l;
  acc.meteor += s.meteor;
}

PairScores divide(PairScores s, std::size_t n) {
  if (n == 0) return {};
  const double d = static_cast<double>(n);
  return {s.bleu4 / d, s.rouge_l / d, s.meteor / d};
}

}  // namespace

CorpusReport corpus_report(const std::vector<EvalPair>& pairs, const std::vector<std::size_t>& lengths,
                           const BucketSpec& spec) {
  for (std::size_t i = 0; i < spec.edges.size(); ++i) {
    if (spec.edges[i] == 0) throw BucketError("bucket edges must be positive");
    if (i > 0 && spec.edges[i] <= spec.edges[i - 1]) throw BucketError("bucket edges must be strictly increasing");
  }
  if (!spec.edges.empty() && lengths.size() != pairs.size()) {
    throw BucketError("bucketing needs one length per pair");
  }

  CorpusReport report;
  report.per_pair.reserve(pairs.size());
  PairScores total;
  for (const auto& p : pairs) {
    report.per_pair.push_back(score_pair(p));
    accumulate(total, report.per_pair.back());
  }
  report.overall = divide(total, pairs.size());

  if (spec.edges.empty()) return report;
  const std::size_t nb = spec.edges.size() + 1;
  std::vector<PairScores> sums(nb);
  report.buckets.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    report.buckets[b].lo = b == 0 ? 0 : spec.edges[b - 1];
    report.buckets[b].hi = b < spec.edges.size() ? spec.edges[b] : 0;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t b =
        static_cast<std::size_t>(std::upper_bound(spec.edges.begin(), spec.edges.end(), lengths[i]) - spec.edges.begin());
    ++report.buckets[b].count;
    accumulate(sums[b], report.per_pair[i]);
  }
  for (std::size_t b = 0; b < nb; ++b) report.buckets[b].mean = divide(sums[b], report.buckets[b].count);
  return report;
}

nlohmann::json report_to_json(const CorpusReport& report, const BucketSpec& spec) {
  auto scores = [](const PairScores& s) {
    return nlohmann::json{{"bleu4", s.bleu4}, {"rouge_l", s.rouge_l}, {"meteor", s.meteor}};
  };
  nlohmann::json j;
  j["overall"] = scores(report.overall);
  j["count"] = report.per_pair.size();
  j["bucket_key"] = spec.key == BucketKey::CodeLength ? "code_length" : "summary_length";
  j["buckets"] = nlohmann::json::array();
  for (const auto& b : report.buckets) {
    nlohmann::json e = scores(b.mean);
    e["lo"] = b.lo;
    e["hi"] = b.hi == 0 ? nlohmann::json(nullptr) : nlohmann::json(b.hi);
    e["count"] = b.count;
    j["buckets"].push_back(std::move(e));
  }
  return j;
}

}  // namespace structsum

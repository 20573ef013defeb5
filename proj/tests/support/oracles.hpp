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

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the code under test except to build
// inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "structsum/ast.hpp"
#include "structsum/beam.hpp"

namespace structsum::testing {

// Uniform random recursive tree on n nodes; leaves are Identifiers drawn
// from a small name pool so that repeated names occur.
inline Ast random_tree(std::mt19937_64& rng, std::size_t n, std::size_t name_pool = 4) {
  std::vector<AstNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i].id = static_cast<NodeId>(i);
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    nodes[pick(rng)].children.push_back(static_cast<NodeId>(i));
  }
  std::uniform_int_distribution<std::size_t> name(0, name_pool - 1);
  for (auto& node : nodes) {
    if (node.children.empty()) {
      node.type = "Identifier";
      node.value = "v" + std::to_string(name(rng));
    } else {
      node.type = "Node";
    }
  }
  return Ast::from_nodes(std::move(nodes));
}

// Breadth-first hop counts from every node over the undirected tree.
inline std::vector<std::vector<int>> bfs_all_pairs(const Ast& ast) {
  const std::size_t n = ast.size();
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& node : ast.nodes())
    for (NodeId c : node.children) {
      adj[static_cast<std::size_t>(node.id)].push_back(c);
      adj[static_cast<std::size_t>(c)].push_back(node.id);
    }
  std::vector<std::vector<int>> d(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> q;
    q.push(s);
    d[s][s] = 0;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (NodeId v : adj[u]) {
        const auto vi = static_cast<std::size_t>(v);
        if (d[s][vi] < 0) {
          d[s][vi] = d[s][u] + 1;
          q.push(vi);
        }
      }
    }
  }
  return d;
}

// Lowest common ancestor by walking parent pointers.
inline NodeId naive_lca(const Ast& ast, NodeId a, NodeId b) {
  std::vector<bool> on_path(ast.size(), false);
  for (NodeId x = a; x >= 0; x = ast.parents()[static_cast<std::size_t>(x)]) on_path[static_cast<std::size_t>(x)] = true;
  for (NodeId x = b; x >= 0; x = ast.parents()[static_cast<std::size_t>(x)])
    if (on_path[static_cast<std::size_t>(x)]) return x;
  return 0;
}

// Longest common subsequence by enumerating every subsequence of a.
inline std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const std::size_t bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = bits;
  }
  return best;
}

// Exhaustive search over every output sequence: sequences end at the first
// EOS or at max_len. Ties resolve towards the lexicographically smaller
// sequence.
inline Hypothesis exhaustive_decode(const StepFn& step, const BeamOptions& opt, std::size_t vocab) {
  Hypothesis best;
  bool have = false;
  std::function<void(std::vector<int>&, double)> rec = [&](std::vector<int>& seq, double lp) {
    const bool ended = !seq.empty() && (seq.back() == opt.eos || seq.size() == opt.max_len);
    if (ended) {
      const double score = normalized_score(lp, seq.size(), opt.length_penalty);
      if (!have || score > best.score || (score == best.score && seq < best.tokens)) {
        best = {seq, lp, score};
        have = true;
      }
      return;
    }
    std::vector<int> prefix{opt.bos};
    prefix.insert(prefix.end(), seq.begin(), seq.end());
    const std::vector<double> logp = step(prefix);
    for (std::size_t v = 0; v < vocab; ++v) {
      seq.push_back(static_cast<int>(v));
      rec(seq, lp + logp[v]);
      seq.pop_back();
    }
  };
  std::vector<int> seq;
  rec(seq, 0.0);
  return best;
}

// Deterministic pseudo-random next-token distribution keyed on the prefix.
inline StepFn random_step_fn(std::uint64_t seed, std::size_t vocab) {
  return [seed, vocab](std::span<const int> prefix) {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ULL + 1;
    for (int t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 7)) * 0x100000001B3ULL;
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> p(vocab);
    double total = 0.0;
    for (auto& x : p) total += x = u(rng);
    for (auto& x : p) x = std::log(x / total);
    return p;
  };
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = std::filesystem::temp_directory_path() / ("structsum-" + tag + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace structsum::testing

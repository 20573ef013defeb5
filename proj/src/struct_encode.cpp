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

#include "structsum/struct_encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "structsum/errors.hpp"

namespace structsum {

DistanceMatrix floyd_apsp(const Ast& ast) {
  const std::size_t n = ast.size();
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  DistanceMatrix d(n, kInf);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = 0;
  for (const auto& [p, c] : ast.edges()) {
    d(p, c) = 1;
    d(c, p) = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const int dik = d(i, k);
      if (dik == kInf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const int via = dik + d(k, j);
        if (via < d(i, j)) d(i, j) = via;
      }
    }
  }
  return d;
}

DistanceMatrix token_distance_matrix(const DistanceMatrix& node_d, const TokenAlignment& align) {
  const std::size_t n = align.size();
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(align.token_to_node[i]);
    for (std::size_t j = 0; j < n; ++j) m(i, j) = node_d(a, static_cast<std::size_t>(align.token_to_node[j]));
  }
  return m;
}

NormalizedPositionMatrix normalize(const DistanceMatrix& m) {
  const std::size_t n = m.n();
  NormalizedPositionMatrix out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (m(i, j) != 0) total += 1.0 / m(i, j);
    if (total == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (m(i, j) != 0) out(i, j) = (1.0 / m(i, j)) / total;
  }
  return out;
}

BucketMatrix bucketize(const DistanceMatrix& m, int clip) {
  if (clip < 1) throw ConfigError("structural clip threshold must be >= 1, got " + std::to_string(clip));
  BucketMatrix out{clip, IntMatrix(m.n())};
  std::transform(m.data().begin(), m.data().end(), out.b.data().begin(),
                 [clip](int d) { return std::min(d, clip); });
  return out;
}

IntMatrix sequential_relpos(std::size_t n, int k) {
  if (k < 1) throw ConfigError("sequential clip k must be >= 1");
  IntMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = std::clamp(static_cast<int>(j) - static_cast<int>(i), -k, k);
  return out;
}

namespace {

bool in(const std::string& s, std::initializer_list<const char*> set) {
  for (const char* x : set)
    if (s == x) return true;
  return false;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_branch(const std::string& t) { return in(t, {"IfStatement", "If"}); }
bool is_loop(const std::string& t) {
  return in(t, {"WhileStatement", "While", "ForStatement", "For", "DoStatement", "ForEachStatement"});
}
bool is_statement(const std::string& t) {
  return in(t, {"Assign", "FunctionDecl", "VarDecl", "ExprStatement"}) || ends_with(t, "Statement") ||
         ends_with(t, "Declaration");
}
bool is_identifier(const std::string& t) { return in(t, {"Identifier", "Name", "MemberReference"}); }

class FlowGraph {
 public:
  explicit FlowGraph(const Ast& ast) : ast_(ast) {
    for (const auto& node : ast.nodes()) visit(node);
  }
  const std::set<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

 private:
  bool controls(NodeId id) const {
    const auto& t = ast_.node(id).type;
    return (is_branch(t) || is_loop(t)) && !ast_.node(id).children.empty();
  }
  // First flow unit executed when entering statement s.
  NodeId entry(NodeId s) const { return controls(s) ? ast_.node(s).children.front() : s; }

  // Statement children of a container, or the node itself if it is one.
  std::vector<NodeId> statements_of(NodeId id) const {
    if (is_statement(ast_.node(id).type)) return {id};
    std::vector<NodeId> out;
    for (NodeId c : ast_.node(id).children)
      if (is_statement(ast_.node(c).type)) out.push_back(c);
    return out;
  }

  void link(NodeId a, NodeId b) {
    edges_.emplace(a, b);
    edges_.emplace(b, a);
  }

  void visit(const AstNode& node) {
    // Consecutive statements under one parent.
    NodeId prev = -1;
    for (NodeId c : node.children) {
      if (!is_statement(ast_.node(c).type)) continue;
      if (prev != -1) link(entry(prev), entry(c));
      prev = c;
    }
    if (controls(node.id)) {
      const NodeId cond = node.children.front();
      for (std::size_t i = 1; i < node.children.size(); ++i) {
        const auto body = statements_of(node.children[i]);
        if (body.empty()) continue;
        link(cond, entry(body.front()));
        if (is_loop(node.type)) link(entry(body.back()), cond);
      }
    }
    if (node.type == "FunctionDecl") {
      const auto body = statements_of(node.children.back());
      if (!body.empty()) link(node.id, entry(body.front()));
    }
  }

  const Ast& ast_;
  std::set<std::pair<NodeId, NodeId>> edges_;
};

void check_weights(const MultiViewWeights& w) {
  if (w.alpha < 0 || w.beta < 0 || w.gamma < 0) throw ConfigError("multi-view weights must be non-negative");
  if (w.alpha + w.beta + w.gamma <= 0) throw ConfigError("multi-view weights must not all be zero");
}

}  // namespace

std::vector<NodeId> flow_units(const Ast& ast) {
  std::vector<NodeId> unit(ast.size(), 0);
  const auto& parent = ast.parents();
  for (NodeId leaf : ast.leaf_order()) {
    NodeId cur = leaf;
    NodeId found = 0;
    while (cur != -1) {
      const NodeId p = parent[cur];
      if (p != -1) {
        const auto& pt = ast.node(p).type;
        if ((is_branch(pt) || is_loop(pt)) && ast.node(p).children.front() == cur) {
          found = cur;
          break;
        }
      }
      if (is_statement(ast.node(cur).type)) {
        found = cur;
        break;
      }
      cur = p;
    }
    unit[leaf] = found;
  }
  return unit;
}

MultiViewMatrix multiview(const Ast& ast, const TokenAlignment& align, const MultiViewWeights& weights) {
  check_weights(weights);
  const std::size_t n = align.size();
  const auto node_d = floyd_apsp(ast);
  const auto units = flow_units(ast);
  const FlowGraph flow(ast);

  MultiViewMatrix mv{IntMatrix(n), IntMatrix(n), IntMatrix(n), weights, RealMatrix(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId li = align.token_to_node[i];
    const AstNode& ni = ast.node(li);
    for (std::size_t j = 0; j < n; ++j) {
      const NodeId lj = align.token_to_node[j];
      const AstNode& nj = ast.node(lj);
      mv.a_ast(i, j) = (i == j || node_d(li, lj) <= 2) ? 1 : 0;
      const NodeId ui = units[li], uj = units[lj];
      mv.a_fl(i, j) = (i == j || ui == uj || flow.edges().count({ui, uj})) ? 1 : 0;
      mv.a_dp(i, j) = (i == j || (is_identifier(ni.type) && is_identifier(nj.type) && *ni.value == *nj.value)) ? 1 : 0;
      mv.a_mv(i, j) = weights.alpha * mv.a_ast(i, j) + weights.beta * mv.a_fl(i, j) + weights.gamma * mv.a_dp(i, j);
    }
  }
  return mv;
}

StructuralEncoding encode_structure(const Ast& ast, const TokenAlignment& align, const EncodeOptions& opts) {
  validate_alignment(ast, align);
  check_weights(opts.weights);
  TokenAlignment kept = align;
  if (opts.max_tokens && kept.size() > opts.max_tokens) kept.token_to_node.resize(opts.max_tokens);

  StructuralEncoding enc;
  enc.m = token_distance_matrix(floyd_apsp(ast), kept);
  enc.m_bar = normalize(enc.m);
  enc.buckets = bucketize(enc.m, opts.clip);
  enc.views = multiview(ast, kept, opts.weights);
  return enc;
}

namespace {

template <typename T>
nlohmann::json rows(const SquareMatrix<T>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < m.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.n(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

template <typename T>
SquareMatrix<T> from_rows(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) throw FormatError(std::string("bundle lacks \"") + key + "\"");
  const auto& a = j[key];
  SquareMatrix<T> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array() || a[i].size() != a.size()) throw FormatError(std::string("\"") + key + "\" is not square");
    for (std::size_t c = 0; c < a.size(); ++c) m(i, c) = a[i][c].get<T>();
  }
  return m;
}

}  // namespace

nlohmann::json bundle_to_json(const StructuralEncoding& enc) {
  return nlohmann::json{{"m", rows(enc.m)},
                        {"m_bar", rows(enc.m_bar)},
                        {"buckets", rows(enc.buckets.b)},
                        {"a_mv", rows(enc.views.a_mv)},
                        {"l", enc.buckets.clip}};
}

StructuralEncoding bundle_from_json(const nlohmann::json& doc) {
  StructuralEncoding enc;
  enc.m = from_rows<int>(doc, "m");
  enc.m_bar = from_rows<double>(doc, "m_bar");
  enc.buckets.b = from_rows<int>(doc, "buckets");
  enc.views.a_mv = from_rows<double>(doc, "a_mv");
  int clip = 1;
  for (int v : enc.buckets.b.data()) clip = std::max(clip, v);
  enc.buckets.clip = doc.value("l", clip);
  const std::size_t n = enc.m.n();
  if (enc.m_bar.n() != n || enc.buckets.b.n() != n || enc.views.a_mv.n() != n)
    throw FormatError("bundle matrices disagree in size");
  return enc;
}

double mean_row_entropy(const NormalizedPositionMatrix& m_bar) {
  double total = 0.0;
  std::size_t rows_counted = 0;
  for (std::size_t i = 0; i < m_bar.n(); ++i) {
    double h = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < m_bar.n(); ++j) {
      const double p = m_bar(i, j);
      if (p > 0) {
        h -= p * std::log(p);
        any = true;
      }
    }
    if (any) {
      total += h;
      ++rows_counted;
    }
  }
  return rows_counted ? total / static_cast<double>(rows_counted) : 0.0;
}

}  // namespace structsum

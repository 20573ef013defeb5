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

#include "structsum/ast.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "structsum/errors.hpp"

namespace structsum {

Ast Ast::from_nodes(std::vector<AstNode> nodes) {
  const std::size_t n = nodes.size();
  if (n == 0) throw TreeError("AST has no nodes");

  // Locate each node by its declared id; ids must be dense.
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id = nodes[i].id;
    if (id < 0 || static_cast<std::size_t>(id) >= n)
      throw FormatError("node id " + std::to_string(id) + " out of range 0.." + std::to_string(n - 1));
    if (slot[id] != -1) throw FormatError("duplicate node id " + std::to_string(id));
    slot[id] = static_cast<int>(i);
  }

  std::vector<NodeId> parent(n, -1);
  for (std::size_t id = 0; id < n; ++id) {
    const AstNode& node = nodes[slot[id]];
    for (NodeId c : node.children) {
      if (c < 0 || static_cast<std::size_t>(c) >= n)
        throw TreeError("node " + std::to_string(id) + " has unknown child " + std::to_string(c));
      if (static_cast<std::size_t>(c) == id)
        throw TreeError("node " + std::to_string(id) + " lists itself as a child");
      if (parent[c] != -1)
        throw TreeError("node " + std::to_string(c) + " has more than one parent");
      parent[c] = static_cast<NodeId>(id);
    }
    if (node.children.empty() && !node.value)
      throw ValueError("leaf node " + std::to_string(id) + " has no value");
    if (!node.children.empty() && node.value)
      throw ValueError("interior node " + std::to_string(id) + " carries a value");
  }

  NodeId root = -1;
  for (std::size_t id = 0; id < n; ++id) {
    if (parent[id] != -1) continue;
    if (root != -1) throw TreeError("more than one root (orphan node " + std::to_string(id) + ")");
    root = static_cast<NodeId>(id);
  }
  if (root == -1) throw TreeError("child relation contains a cycle");

  // Preorder renumbering; any node not reached sits on a cycle detached from
  // the root.
  std::vector<NodeId> order;
  order.reserve(n);
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    order.push_back(cur);
    const auto& ch = nodes[slot[cur]].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  if (order.size() != n) throw TreeError("child relation contains a cycle");

  std::vector<NodeId> renumber(n);
  for (std::size_t i = 0; i < n; ++i) renumber[order[i]] = static_cast<NodeId>(i);

  Ast ast;
  ast.nodes_.resize(n);
  ast.parents_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    AstNode& src = nodes[slot[order[i]]];
    AstNode& dst = ast.nodes_[i];
    dst.id = static_cast<NodeId>(i);
    dst.type = std::move(src.type);
    dst.value = std::move(src.value);
    dst.children.reserve(src.children.size());
    for (NodeId c : src.children) {
      dst.children.push_back(renumber[c]);
      ast.parents_[renumber[c]] = static_cast<NodeId>(i);
    }
    if (dst.children.empty()) ast.leaf_order_.push_back(static_cast<NodeId>(i));
  }
  return ast;
}

std::vector<int> Ast::depths() const {
  std::vector<int> depth(nodes_.size(), 0);
  // Preorder numbering puts every parent before its children.
  for (std::size_t i = 1; i < nodes_.size(); ++i) depth[i] = depth[parents_[i]] + 1;
  return depth;
}

std::vector<std::pair<NodeId, NodeId>> Ast::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(nodes_.empty() ? 0 : nodes_.size() - 1);
  for (const auto& node : nodes_)
    for (NodeId c : node.children) out.emplace_back(node.id, c);
  return out;
}

nlohmann::json ast_to_json(const Ast& ast) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : ast.nodes()) {
    nlohmann::json j;
    j["id"] = node.id;
    j["type"] = node.type;
    if (node.value) j["value"] = *node.value;
    j["children"] = node.children;
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"nodes", std::move(nodes)}};
}

Ast ast_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
    throw FormatError("AST document must be an object with a \"nodes\" array");
  std::vector<AstNode> nodes;
  nodes.reserve(doc["nodes"].size());
  for (const auto& j : doc["nodes"]) {
    if (!j.is_object()) throw FormatError("AST node must be an object");
    if (!j.contains("id") || !j["id"].is_number_integer()) throw FormatError("AST node needs an integer \"id\"");
    if (!j.contains("type") || !j["type"].is_string()) throw FormatError("AST node needs a string \"type\"");
    AstNode node;
    node.id = j["id"].get<NodeId>();
    node.type = j["type"].get<std::string>();
    if (j.contains("value") && !j["value"].is_null()) {
      if (!j["value"].is_string()) throw FormatError("AST node \"value\" must be a string");
      node.value = j["value"].get<std::string>();
    }
    if (j.contains("children")) {
      if (!j["children"].is_array()) throw FormatError("AST node \"children\" must be an array");
      for (const auto& c : j["children"]) {
        if (!c.is_number_integer()) throw FormatError("child ids must be integers");
        node.children.push_back(c.get<NodeId>());
      }
    }
    nodes.push_back(std::move(node));
  }
  // Empty documents and dangling child ids break the interchange schema itself.
  if (nodes.empty()) throw FormatError("AST document has no nodes");
  const auto n = static_cast<NodeId>(nodes.size());
  for (const auto& node : nodes)
    for (NodeId c : node.children)
      if (c < 0 || c >= n)
        throw FormatError("node " + std::to_string(node.id) + " has unknown child " + std::to_string(c));
  return Ast::from_nodes(std::move(nodes));
}

Ast load_ast_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ast_from_json(doc);
}

void save_ast_json(const Ast& ast, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << ast_to_json(ast).dump() << '\n';
}

namespace {

const std::string& label(const AstNode& node) { return node.value ? *node.value : node.type; }

}  // namespace

std::vector<std::string> sbt_sequence(const Ast& ast) {
  std::vector<std::string> out;
  if (ast.empty()) return out;
  out.reserve(4 * ast.size());
  // Explicit stack: (node, closing?) so deep trees do not recurse.
  std::vector<std::pair<NodeId, bool>> stack{{0, false}};
  while (!stack.empty()) {
    auto [id, closing] = stack.back();
    stack.pop_back();
    const AstNode& node = ast.node(id);
    if (closing) {
      out.emplace_back(")");
      out.push_back(label(node));
      continue;
    }
    out.emplace_back("(");
    out.push_back(label(node));
    stack.emplace_back(id, true);
    for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.emplace_back(*it, false);
  }
  return out;
}

std::vector<std::string> split_identifier(std::string_view text, const SubtokenRule& rule) {
  std::vector<std::string> pieces;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) pieces.push_back(std::move(cur));
    cur.clear();
  };
  auto is_upper = [](char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; };
  auto is_lower = [](char c) { return std::islower(static_cast<unsigned char>(c)) != 0; };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c)) || (rule.split_snake && c == '_')) {
      flush();
      continue;
    }
    if (rule.split_camel && !cur.empty() && is_upper(c)) {
      const char prev = text[i - 1];
      const bool lower_to_upper = is_lower(prev) || std::isdigit(static_cast<unsigned char>(prev));
      // "HTTPServer" -> HTTP | Server
      const bool acronym_end = is_upper(prev) && i + 1 < text.size() && is_lower(text[i + 1]);
      if (lower_to_upper || acronym_end) flush();
    }
    cur.push_back(c);
  }
  flush();
  if (rule.lowercase)
    for (auto& p : pieces)
      std::transform(p.begin(), p.end(), p.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return pieces;
}

LeafTokens leaf_tokens(const Ast& ast, const SubtokenRule& rule) {
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  LeafTokens out;
  for (NodeId leaf : ast.leaf_order()) {
    const AstNode& node = ast.node(leaf);
    std::vector<std::string> pieces;
    if (contains(rule.string_types, node.type)) {
      pieces.push_back(rule.string_sentinel);
    } else if (contains(rule.number_types, node.type)) {
      pieces.push_back(rule.number_sentinel);
    } else {
      pieces = split_identifier(*node.value, rule);
      // Every leaf must yield at least one token ("_" or "" would not).
      if (pieces.empty()) pieces.push_back(node.value->empty() ? std::string("<empty>") : *node.value);
    }
    for (auto& p : pieces) {
      out.tokens.push_back(std::move(p));
      out.alignment.token_to_node.push_back(leaf);
    }
  }
  return out;
}

void validate_alignment(const Ast& ast, const TokenAlignment& align) {
  const auto& leaves = ast.leaf_order();
  std::vector<int> rank(ast.size(), -1);
  for (std::size_t i = 0; i < leaves.size(); ++i) rank[leaves[i]] = static_cast<int>(i);
  std::vector<bool> hit(leaves.size(), false);
  int last = -1;
  for (NodeId id : align.token_to_node) {
    if (id < 0 || static_cast<std::size_t>(id) >= ast.size() || rank[id] < 0)
      throw FormatError("token aligned to non-leaf node " + std::to_string(id));
    if (rank[id] < last) throw FormatError("token alignment is not monotone in leaf order");
    last = rank[id];
    hit[rank[id]] = true;
  }
  if (std::find(hit.begin(), hit.end(), false) != hit.end())
    throw FormatError("token alignment does not cover every leaf");
}

}  // namespace structsum

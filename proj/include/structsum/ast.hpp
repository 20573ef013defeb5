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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace structsum {

using NodeId = int;

struct AstNode {
  NodeId id = 0;
  std::string type;
  // Present exactly on leaves.
  std::optional<std::string> value;
  std::vector<NodeId> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const AstNode&) const = default;
};

// Immutable syntax tree whose node ids are dense, preorder (SBT first-visit)
// numbered, with node 0 as the root.
class Ast {
 public:
  Ast() = default;

  // Validates the child relation and leaf values, then renumbers the nodes
  // into preorder. Input ids must be dense 0..n-1 but need not be preorder.
  // Throws TreeError / ValueError / FormatError.
  static Ast from_nodes(std::vector<AstNode> nodes);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<AstNode>& nodes() const { return nodes_; }
  const AstNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<NodeId>& leaf_order() const { return leaf_order_; }
  // parent()[0] == -1.
  const std::vector<NodeId>& parents() const { return parents_; }
  std::vector<int> depths() const;
  // Undirected parent/child edges, parent first.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  bool operator==(const Ast& other) const { return nodes_ == other.nodes_; }

 private:
  std::vector<AstNode> nodes_;
  std::vector<NodeId> leaf_order_;
  std::vector<NodeId> parents_;
};

// Interchange format: {"nodes":[{"id":int,"type":str,"value":str?,"children":[int]}]}
nlohmann::json ast_to_json(const Ast& ast);
Ast ast_from_json(const nlohmann::json& doc);
Ast load_ast_json(const std::string& path);
void save_ast_json(const Ast& ast, const std::string& path);

// Structure-based traversal: "(" label sbt(children) ")" label, where label is
// the value of a leaf and the node type otherwise.
std::vector<std::string> sbt_sequence(const Ast& ast);

// Maps each model-input token back to the AST leaf it was produced from.
struct TokenAlignment {
  std::vector<NodeId> token_to_node;

  std::size_t size() const { return token_to_node.size(); }
  bool operator==(const TokenAlignment&) const = default;
};

struct SubtokenRule {
  bool split_camel = true;
  bool split_snake = true;
  bool lowercase = true;
  std::vector<std::string> string_types{"StringLiteral", "String", "Str"};
  std::vector<std::string> number_types{"NumberLiteral", "Number", "Num"};
  std::string string_sentinel = "STR";
  std::string number_sentinel = "NUM";
};

std::vector<std::string> split_identifier(std::string_view text, const SubtokenRule& rule);

struct LeafTokens {
  std::vector<std::string> tokens;
  TokenAlignment alignment;
};

LeafTokens leaf_tokens(const Ast& ast, const SubtokenRule& rule = {});

// Throws FormatError when the alignment is not valid for ast.
void validate_alignment(const Ast& ast, const TokenAlignment& align);

}  // namespace structsum

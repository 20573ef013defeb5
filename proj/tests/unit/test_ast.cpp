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

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "structsum/ast.hpp"
#include "structsum/errors.hpp"

using namespace structsum;

namespace {

AstNode node(NodeId id, std::string type, std::vector<NodeId> children, std::optional<std::string> value = {}) {
  return AstNode{id, std::move(type), std::move(value), std::move(children)};
}

Ast parse_json(const std::string& text) { return ast_from_json(nlohmann::json::parse(text)); }

}  // namespace

TEST_CASE("interchange: two-node document") {
  const Ast ast = parse_json(R"({"nodes":[{"id":0,"type":"Root","children":[1]},
                                          {"id":1,"type":"Id","value":"x","children":[]}]})");
  CHECK(ast.size() == 2);
  CHECK(ast.leaf_order() == std::vector<NodeId>{1});
  CHECK(ast.node(1).value == "x");
}

TEST_CASE("interchange: rejects cycles, shared children, orphans, values on interior nodes") {
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"type":"A","children":[1]},
                                          {"id":1,"type":"B","children":[0]}]})"),
                  TreeError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"type":"A","children":[1,2]},
                                          {"id":1,"type":"B","children":[2]},
                                          {"id":2,"type":"C","value":"c","children":[]}]})"),
                  TreeError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"type":"A","value":"a","children":[]},
                                          {"id":1,"type":"B","value":"b","children":[]}]})"),
                  TreeError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"type":"A","value":"v","children":[1]},
                                          {"id":1,"type":"B","value":"b","children":[]}]})"),
                  ValueError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"type":"A","children":[]}]})"), ValueError);
}

TEST_CASE("interchange: schema violations are FormatError") {
  CHECK_THROWS_AS(parse_json(R"({"nodez":[]})"), FormatError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[]})"), FormatError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"children":[]}]})"), FormatError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":5,"type":"A","value":"a","children":[]}]})"), FormatError);
  CHECK_THROWS_AS(parse_json(R"({"nodes":[{"id":0,"type":"A","children":[7]}]})"), FormatError);
}

TEST_CASE("from_nodes renumbers into preorder") {
  // 0 -> [2, 1], 2 -> [3]; preorder visits 0, 2, 3, 1.
  const Ast ast = Ast::from_nodes({node(0, "R", {2, 1}), node(1, "B", {}, "b"), node(2, "A", {3}),
                                   node(3, "C", {}, "c")});
  CHECK(ast.node(1).type == "A");
  CHECK(ast.node(2).type == "C");
  CHECK(ast.node(3).type == "B");
  CHECK(ast.leaf_order() == std::vector<NodeId>{2, 3});
  CHECK(ast.parents() == std::vector<NodeId>{-1, 0, 1, 0});
}

TEST_CASE("json round trip through a file") {
  std::mt19937_64 rng(3);
  const Ast ast = testing::random_tree(rng, 25);
  const auto dir = testing::scratch_dir("ast");
  const std::string path = (dir / "t.json").string();
  save_ast_json(ast, path);
  CHECK(load_ast_json(path) == ast);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sbt: base cases") {
  const Ast leaf = Ast::from_nodes({node(0, "Id", {}, "a")});
  CHECK(sbt_sequence(leaf) == std::vector<std::string>{"(", "a", ")", "a"});
  const Ast one = Ast::from_nodes({node(0, "R", {1}), node(1, "Id", {}, "a")});
  CHECK(sbt_sequence(one) == std::vector<std::string>{"(", "R", "(", "a", ")", "a", ")", "R"});
  const Ast two = Ast::from_nodes({node(0, "R", {1, 2}), node(1, "Id", {}, "a"), node(2, "Id", {}, "b")});
  CHECK(sbt_sequence(two) ==
        std::vector<std::string>{"(", "R", "(", "a", ")", "a", "(", "b", ")", "b", ")", "R"});
}

TEST_CASE("sbt length is four per node and first visits follow id order") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Ast ast = testing::random_tree(rng, 1 + rng() % 40);
    const auto seq = sbt_sequence(ast);
    CHECK(seq.size() == 4 * ast.size());
    // The label after every "(" is the next node in id order.
    std::size_t next = 0;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      if (seq[i] != "(") continue;
      const AstNode& n = ast.node(static_cast<NodeId>(next++));
      CHECK(seq[i + 1] == (n.is_leaf() ? *n.value : n.type));
    }
    CHECK(next == ast.size());
  }
}

TEST_CASE("edges: n - 1 and connected") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Ast ast = testing::random_tree(rng, 1 + rng() % 40);
    const auto edges = ast.edges();
    CHECK(edges.size() == ast.size() - 1);
    const auto d = testing::bfs_all_pairs(ast);
    for (int x : d[0]) CHECK(x >= 0);
  }
}

TEST_CASE("split_identifier") {
  SubtokenRule rule;
  CHECK(split_identifier("getFoo", rule) == std::vector<std::string>{"get", "foo"});
  CHECK(split_identifier("my_var_name", rule) == std::vector<std::string>{"my", "var", "name"});
  CHECK(split_identifier("parseHTTPResponse", rule) == std::vector<std::string>{"parse", "http", "response"});
  CHECK(split_identifier("x", rule) == std::vector<std::string>{"x"});
  SubtokenRule keep;
  keep.split_camel = false;
  keep.lowercase = false;
  CHECK(split_identifier("getFoo", keep) == std::vector<std::string>{"getFoo"});
}

TEST_CASE("leaf_tokens: subtokens share their leaf; literals become sentinels") {
  const Ast ast = Ast::from_nodes({node(0, "R", {1, 2, 3, 4}), node(1, "Identifier", {}, "getFoo"),
                                   node(2, "Identifier", {}, "x"), node(3, "NumberLiteral", {}, "42"),
                                   node(4, "StringLiteral", {}, "hi there")});
  const LeafTokens lt = leaf_tokens(ast);
  CHECK(lt.tokens == std::vector<std::string>{"get", "foo", "x", "NUM", "STR"});
  CHECK(lt.alignment.token_to_node == std::vector<NodeId>{1, 1, 2, 3, 4});
  validate_alignment(ast, lt.alignment);

  const Ast snake = Ast::from_nodes({node(0, "R", {1}), node(1, "Identifier", {}, "my_var_name")});
  const LeafTokens st = leaf_tokens(snake);
  CHECK(st.tokens == std::vector<std::string>{"my", "var", "name"});
  CHECK(st.alignment.token_to_node == std::vector<NodeId>{1, 1, 1});
}

TEST_CASE("validate_alignment rejects non-leaves, gaps and reordering") {
  const Ast ast = Ast::from_nodes({node(0, "R", {1, 2}), node(1, "Id", {}, "a"), node(2, "Id", {}, "b")});
  validate_alignment(ast, TokenAlignment{{1, 1, 2}});
  CHECK_THROWS_AS(validate_alignment(ast, TokenAlignment{{0, 1, 2}}), FormatError);
  CHECK_THROWS_AS(validate_alignment(ast, TokenAlignment{{1}}), FormatError);
  CHECK_THROWS_AS(validate_alignment(ast, TokenAlignment{{2, 1}}), FormatError);
}

TEST_CASE("leaf_tokens alignment is monotone and surjective on random trees") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Ast ast = testing::random_tree(rng, 1 + rng() % 50);
    const LeafTokens lt = leaf_tokens(ast);
    validate_alignment(ast, lt.alignment);
    CHECK(std::is_sorted(lt.alignment.token_to_node.begin(), lt.alignment.token_to_node.end()));
  }
}

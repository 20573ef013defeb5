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
#include <string_view>

#include "structsum/ast.hpp"

namespace structsum {

// Recursive-descent parser for MiniLang (grammar in docs/minilang.ebnf).
// Keywords are implied by node types; operators become "Operator" leaves.
// Throws SyntaxError carrying the 1-based line/column of the offending token.
Ast parse_minilang(std::string_view source);

// Prints an AST produced by parse_minilang back to MiniLang source. Every
// compound expression is parenthesised, so reparsing yields the same tree.
std::string to_minilang(const Ast& ast);

}  // namespace structsum

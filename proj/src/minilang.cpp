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

#include "structsum/minilang.hpp"

#include <cctype>
#include <memory>
#include <sstream>
#include <vector>

#include "structsum/errors.hpp"

namespace structsum {
namespace {

enum class Tok { Ident, Number, String, Keyword, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t line = 1;
  std::size_t col = 1;
};

bool is_keyword(std::string_view w) {
  static constexpr std::string_view kKeywords[] = {"func", "var", "if", "else", "while", "return",
                                                   "break", "continue", "true", "false"};
  for (auto k : kKeywords)
    if (k == w) return true;
  return false;
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t count = 1) {
    for (std::size_t c = 0; c < count; ++c) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance();
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance();
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = is_keyword(t.text) ? Tok::Keyword : Tok::Ident;
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      t.kind = Tok::Number;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (c == '"') {
      t.kind = Tok::String;
      advance();
      bool closed = false;
      while (i < src.size()) {
        const char d = src[i];
        if (d == '"') {
          advance();
          closed = true;
          break;
        }
        if (d == '\n') break;
        if (d == '\\' && i + 1 < src.size()) {
          const char e = src[i + 1];
          t.text.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
          advance(2);
          continue;
        }
        t.text.push_back(d);
        advance();
      }
      if (!closed) throw SyntaxError("unterminated string literal", t.line, t.col);
    } else {
      static constexpr std::string_view kTwo[] = {"==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/="};
      t.kind = Tok::Punct;
      for (auto two : kTwo) {
        if (src.substr(i, 2) == two) {
          t.text = std::string(two);
          break;
        }
      }
      if (t.text.empty()) {
        static constexpr std::string_view kOne = "(){};,=+-*/%<>!";
        if (kOne.find(c) == std::string_view::npos)
          throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
        t.text = std::string(1, c);
      }
      advance(t.text.size());
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

struct PNode {
  std::string type;
  std::optional<std::string> value;
  std::vector<PNode> children;
};

PNode leaf(std::string type, std::string value) { return PNode{std::move(type), std::move(value), {}}; }

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  PNode program() {
    PNode root{"Program", std::nullopt, {}};
    while (peek().kind != Tok::End) {
      if (is_kw("func"))
        root.children.push_back(function());
      else
        root.children.push_back(statement());
    }
    if (root.children.empty()) throw SyntaxError("empty program", peek().line, peek().col);
    return root;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  bool is_kw(std::string_view kw) const { return peek().kind == Tok::Keyword && peek().text == kw; }
  bool is_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    // Running off the end inside a bracket is reported at the opener.
    if (t.kind == Tok::End && !open_.empty()) {
      const Token& o = open_.back();
      throw SyntaxError("unclosed '" + o.text + "'", o.line, o.col);
    }
    const std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw SyntaxError(what + ", found " + found, t.line, t.col);
  }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "'");
    take();
  }
  void open(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "'");
    open_.push_back(take());
  }
  void close(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "'");
    take();
    open_.pop_back();
  }
  std::string expect_ident() {
    if (peek().kind != Tok::Ident) fail("expected identifier");
    return take().text;
  }

  PNode function() {
    take();  // func
    PNode fn{"FunctionDecl", std::nullopt, {}};
    fn.children.push_back(leaf("Identifier", expect_ident()));
    open("(");
    PNode params{"ParamList", std::nullopt, {}};
    if (!is_punct(")")) {
      params.children.push_back(leaf("Identifier", expect_ident()));
      while (is_punct(",")) {
        take();
        params.children.push_back(leaf("Identifier", expect_ident()));
      }
    }
    close(")");
    if (!params.children.empty()) fn.children.push_back(std::move(params));
    fn.children.push_back(block());
    return fn;
  }

  PNode block() {
    open("{");
    PNode b{"Block", std::nullopt, {}};
    while (!is_punct("}")) {
      if (peek().kind == Tok::End) fail("expected '}'");
      b.children.push_back(statement());
    }
    close("}");
    if (b.children.empty()) return leaf("Block", "{}");
    return b;
  }

  PNode paren_condition() {
    open("(");
    PNode cond = expr();
    close(")");
    return cond;
  }

  PNode if_statement() {
    take();  // if
    PNode s{"IfStatement", std::nullopt, {}};
    s.children.push_back(paren_condition());
    s.children.push_back(block());
    if (is_kw("else")) {
      take();
      s.children.push_back(is_kw("if") ? if_statement() : block());
    }
    return s;
  }

  PNode statement() {
    if (is_kw("var")) {
      take();
      PNode s{"VarDecl", std::nullopt, {}};
      s.children.push_back(leaf("Identifier", expect_ident()));
      if (is_punct("=")) {
        take();
        s.children.push_back(expr());
      }
      expect_punct(";");
      return s;
    }
    if (is_kw("if")) return if_statement();
    if (is_kw("while")) {
      take();
      PNode s{"WhileStatement", std::nullopt, {}};
      s.children.push_back(paren_condition());
      s.children.push_back(block());
      return s;
    }
    if (is_kw("return")) {
      take();
      if (is_punct(";")) {
        take();
        return leaf("ReturnStatement", "return");
      }
      PNode s{"ReturnStatement", std::nullopt, {}};
      s.children.push_back(expr());
      expect_punct(";");
      return s;
    }
    if (is_kw("break") || is_kw("continue")) {
      const std::string kw = take().text;
      expect_punct(";");
      return leaf(kw == "break" ? "BreakStatement" : "ContinueStatement", kw);
    }
    if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct) {
      const std::string& op = peek(1).text;
      if (op == "=" || op == "+=" || op == "-=" || op == "*=" || op == "/=") {
        PNode s{"Assign", std::nullopt, {}};
        s.children.push_back(leaf("Identifier", take().text));
        s.children.push_back(leaf("Operator", take().text));
        s.children.push_back(expr());
        expect_punct(";");
        return s;
      }
    }
    if (peek().kind == Tok::End) fail("expected statement");
    PNode s{"ExprStatement", std::nullopt, {}};
    s.children.push_back(expr());
    expect_punct(";");
    return s;
  }

  PNode expr() { return binary(0); }

  // Precedence levels, loosest first.
  static const std::vector<std::vector<std::string_view>>& levels() {
    static const std::vector<std::vector<std::string_view>> kLevels{
        {"||"}, {"&&"}, {"==", "!="}, {"<", "<=", ">", ">="}, {"+", "-"}, {"*", "/", "%"}};
    return kLevels;
  }

  PNode binary(std::size_t level) {
    if (level == levels().size()) return unary();
    PNode lhs = binary(level + 1);
    for (;;) {
      bool matched = false;
      if (peek().kind == Tok::Punct)
        for (auto op : levels()[level])
          if (peek().text == op) matched = true;
      if (!matched) return lhs;
      PNode node{"BinaryOp", std::nullopt, {}};
      node.children.push_back(std::move(lhs));
      node.children.push_back(leaf("Operator", take().text));
      node.children.push_back(binary(level + 1));
      lhs = std::move(node);
    }
  }

  PNode unary() {
    if (is_punct("-") || is_punct("!")) {
      PNode node{"UnaryOp", std::nullopt, {}};
      node.children.push_back(leaf("Operator", take().text));
      node.children.push_back(unary());
      return node;
    }
    return primary();
  }

  PNode primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number:
        return leaf("NumberLiteral", take().text);
      case Tok::String:
        return leaf("StringLiteral", take().text);
      case Tok::Keyword:
        if (t.text == "true" || t.text == "false") return leaf("BoolLiteral", take().text);
        break;
      case Tok::Ident: {
        std::string name = take().text;
        if (!is_punct("(")) return leaf("Identifier", std::move(name));
        PNode call{"Call", std::nullopt, {}};
        call.children.push_back(leaf("Identifier", std::move(name)));
        open("(");
        if (!is_punct(")")) {
          call.children.push_back(expr());
          while (is_punct(",")) {
            take();
            call.children.push_back(expr());
          }
        }
        close(")");
        return call;
      }
      case Tok::Punct:
        if (t.text == "(") {
          open("(");
          PNode inner = expr();
          close(")");
          return inner;
        }
        break;
      default:
        break;
    }
    fail("expected expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Token> open_;
};

void flatten(PNode& p, std::vector<AstNode>& out) {
  const auto id = static_cast<NodeId>(out.size());
  out.push_back(AstNode{id, std::move(p.type), std::move(p.value), {}});
  std::vector<NodeId> kids;
  for (auto& c : p.children) {
    kids.push_back(static_cast<NodeId>(out.size()));
    flatten(c, out);
  }
  out[id].children = std::move(kids);
}

// ---- printer ---------------------------------------------------------------

class Printer {
 public:
  explicit Printer(const Ast& ast) : ast_(ast) {}

  std::string run() {
    const AstNode& root = ast_.node(0);
    if (root.type != "Program") throw FormatError("not a MiniLang program (root is " + root.type + ")");
    for (NodeId c : root.children) top(c);
    return out_.str();
  }

 private:
  const AstNode& n(NodeId id) const { return ast_.node(id); }

  void indent() {
    for (int i = 0; i < depth_; ++i) out_ << "  ";
  }

  void top(NodeId id) {
    if (n(id).type == "FunctionDecl")
      function(id);
    else
      statement(id);
  }

  void function(NodeId id) {
    const auto& ch = n(id).children;
    indent();
    out_ << "func " << *n(ch.front()).value << "(";
    if (ch.size() == 3) {
      const auto& params = n(ch[1]).children;
      for (std::size_t i = 0; i < params.size(); ++i) out_ << (i ? ", " : "") << *n(params[i]).value;
    }
    out_ << ") ";
    block(ch.back());
    out_ << "\n";
  }

  void block(NodeId id) {
    const AstNode& b = n(id);
    if (b.is_leaf()) {
      out_ << "{}";
      return;
    }
    out_ << "{\n";
    ++depth_;
    for (NodeId c : b.children) statement(c);
    --depth_;
    indent();
    out_ << "}";
  }

  void if_tail(NodeId id) {
    const auto& ch = n(id).children;
    out_ << "if (" << expr(ch[0]) << ") ";
    block(ch[1]);
    if (ch.size() == 3) {
      out_ << " else ";
      if (n(ch[2]).type == "IfStatement")
        if_tail(ch[2]);
      else
        block(ch[2]);
    }
  }

  void statement(NodeId id) {
    const AstNode& s = n(id);
    const auto& ch = s.children;
    indent();
    if (s.type == "VarDecl") {
      out_ << "var " << *n(ch[0]).value;
      if (ch.size() == 2) out_ << " = " << expr(ch[1]);
      out_ << ";";
    } else if (s.type == "Assign") {
      out_ << *n(ch[0]).value << " " << *n(ch[1]).value << " " << expr(ch[2]) << ";";
    } else if (s.type == "ExprStatement") {
      out_ << expr(ch[0]) << ";";
    } else if (s.type == "ReturnStatement") {
      out_ << (s.is_leaf() ? std::string("return;") : "return " + expr(ch[0]) + ";");
    } else if (s.type == "BreakStatement" || s.type == "ContinueStatement") {
      out_ << *s.value << ";";
    } else if (s.type == "IfStatement") {
      if_tail(id);
    } else if (s.type == "WhileStatement") {
      out_ << "while (" << expr(ch[0]) << ") ";
      block(ch[1]);
    } else {
      throw FormatError("unknown MiniLang statement type " + s.type);
    }
    out_ << "\n";
  }

  static std::string quote(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') q.push_back('\\');
      if (c == '\n') {
        q += "\\n";
        continue;
      }
      if (c == '\t') {
        q += "\\t";
        continue;
      }
      q.push_back(c);
    }
    return q + "\"";
  }

  std::string expr(NodeId id) const {
    const AstNode& e = n(id);
    const auto& ch = e.children;
    if (e.type == "Identifier" || e.type == "NumberLiteral" || e.type == "BoolLiteral") return *e.value;
    if (e.type == "StringLiteral") return quote(*e.value);
    if (e.type == "BinaryOp") return "(" + expr(ch[0]) + " " + *n(ch[1]).value + " " + expr(ch[2]) + ")";
    if (e.type == "UnaryOp") return "(" + *n(ch[0]).value + expr(ch[1]) + ")";
    if (e.type == "Call") {
      std::string s = *n(ch[0]).value + "(";
      for (std::size_t i = 1; i < ch.size(); ++i) s += (i > 1 ? ", " : "") + expr(ch[i]);
      return s + ")";
    }
    throw FormatError("unknown MiniLang expression type " + e.type);
  }

  const Ast& ast_;
  std::ostringstream out_;
  int depth_ = 0;
};

}  // namespace

Ast parse_minilang(std::string_view source) {
  Parser parser(lex(source));
  PNode root = parser.program();
  std::vector<AstNode> nodes;
  flatten(root, nodes);
  return Ast::from_nodes(std::move(nodes));
}

std::string to_minilang(const Ast& ast) { return Printer(ast).run(); }

}  // namespace structsum

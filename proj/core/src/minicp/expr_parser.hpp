#pragma once

#include <cstddef>
#include <vector>

#include "lexer.hpp"
#include "streamforge/minicp/ast.hpp"

namespace streamforge::minicp::detail {

/// Recursive-descent parser over a token stream. The model reader shares it
/// for constraint bodies, param value expressions, and set bounds.
class ExprParser {
 public:
  ExprParser(const std::vector<Token>& tokens, std::size_t pos = 0)
      : tokens_(tokens), pos_(pos) {}

  ExprPtr parse_expression();          // full precedence chain
  ExprPtr parse_additive();            // used for range bounds
  SetRef parse_set_ref();              // `lo..hi` or named set
  std::vector<Generator> parse_generators();

  const Token& peek() const { return tokens_[pos_]; }
  std::size_t position() const { return pos_; }
  void skip() { ++pos_; }
  void expect(Tok kind, const char* what);
  [[noreturn]] void fail(const std::string& message) const;

 private:
  ExprPtr parse_implies();
  ExprPtr parse_or();
  ExprPtr parse_and();
  ExprPtr parse_comparison();
  ExprPtr parse_multiplicative();
  ExprPtr parse_unary();
  ExprPtr parse_primary();
  ExprPtr parse_ident_expr();
  ExprPtr parse_bracket_expr();
  Generator parse_generator();
  std::vector<ExprPtr> parse_call_args();

  const Token& next() { return tokens_[pos_++]; }
  bool accept(Tok kind) {
    if (tokens_[pos_].kind == kind) {
      ++pos_;
      return true;
    }
    return false;
  }

  const std::vector<Token>& tokens_;
  std::size_t pos_;
};

}  // namespace streamforge::minicp::detail

#include "streamforge/minicp/parse.hpp"

#include "expr_parser.hpp"
#include "lexer.hpp"

namespace streamforge::minicp {

ExprPtr parse_expression(const std::string& text) {
  const std::vector<detail::Token> tokens = detail::lex(text);
  detail::ExprParser parser(tokens);
  ExprPtr expr = parser.parse_expression();
  if (parser.peek().kind != detail::Tok::End) {
    parser.fail("unexpected " + detail::token_name(parser.peek()) + " after expression");
  }
  return expr;
}

}  // namespace streamforge::minicp

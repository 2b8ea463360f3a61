#pragma once

#include <string>
#include <vector>

#include "streamforge/minicp/errors.hpp"

namespace streamforge::minicp::detail {

enum class Tok {
  End, Int, Ident,
  LParen, RParen, LBracket, RBracket, Comma, Semi, Pipe,
  Plus, Minus, Star, DotDot,
  Eq, Ne, Lt, Le, Gt, Ge,
  And, Or, Implies,
  // Word tokens that are part of the grammar rather than identifiers.
  KwForall, KwExists, KwSum, KwIn, KwWhere, KwDiv, KwMod, KwNot,
  KwParam, KwSet, KwVar, KwConstraint, KwBool, KwTrue, KwFalse,
};

struct Token {
  Tok kind = Tok::End;
  long long int_val = 0;
  std::string text;  // identifier spelling
  int line = 1;
  int column = 1;
};

/// Tokenizes mini-language text. `%` starts a comment running to end of line.
/// Throws ParseError on unknown characters or malformed numbers.
std::vector<Token> lex(const std::string& text);

/// Human-readable token name for error messages.
std::string token_name(const Token& t);

}  // namespace streamforge::minicp::detail

#include "lexer.hpp"

#include <cctype>
#include <unordered_map>

namespace streamforge::minicp::detail {

namespace {

const std::unordered_map<std::string, Tok>& keyword_table() {
  static const std::unordered_map<std::string, Tok> table = {
      {"forall", Tok::KwForall}, {"exists", Tok::KwExists}, {"sum", Tok::KwSum},
      {"in", Tok::KwIn},         {"where", Tok::KwWhere},   {"div", Tok::KwDiv},
      {"mod", Tok::KwMod},       {"not", Tok::KwNot},       {"param", Tok::KwParam},
      {"set", Tok::KwSet},       {"var", Tok::KwVar},       {"constraint", Tok::KwConstraint},
      {"bool", Tok::KwBool},     {"true", Tok::KwTrue},     {"false", Tok::KwFalse},
  };
  return table;
}

}  // namespace

std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto advance = [&](std::size_t count) {
    for (std::size_t k = 0; k < count && i < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
  };

  auto push = [&](Tok kind, int tok_line, int tok_column) {
    Token t;
    t.kind = kind;
    t.line = tok_line;
    t.column = tok_column;
    out.push_back(std::move(t));
  };

  while (i < n) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '%') {
      while (i < n && text[i] != '\n') advance(1);
      continue;
    }

    const int tl = line;
    const int tc = column;

    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      Token t;
      t.kind = Tok::Int;
      t.line = tl;
      t.column = tc;
      try {
        t.int_val = std::stoll(text.substr(i, j - i));
      } catch (const std::out_of_range&) {
        throw ParseError("integer literal out of range", tl, tc);
      }
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      std::string word = text.substr(i, j - i);
      advance(j - i);
      auto it = keyword_table().find(word);
      if (it != keyword_table().end()) {
        push(it->second, tl, tc);
      } else {
        Token t;
        t.kind = Tok::Ident;
        t.text = std::move(word);
        t.line = tl;
        t.column = tc;
        out.push_back(std::move(t));
      }
      continue;
    }

    auto two = [&](char a, char b) { return c == a && i + 1 < n && text[i + 1] == b; };

    if (two('.', '.')) { advance(2); push(Tok::DotDot, tl, tc); continue; }
    if (two('=', '=')) { advance(2); push(Tok::Eq, tl, tc); continue; }
    if (two('!', '=')) { advance(2); push(Tok::Ne, tl, tc); continue; }
    if (two('<', '=')) { advance(2); push(Tok::Le, tl, tc); continue; }
    if (two('>', '=')) { advance(2); push(Tok::Ge, tl, tc); continue; }
    if (two('-', '>')) { advance(2); push(Tok::Implies, tl, tc); continue; }
    if (two('/', '\\')) { advance(2); push(Tok::And, tl, tc); continue; }
    if (two('\\', '/')) { advance(2); push(Tok::Or, tl, tc); continue; }

    switch (c) {
      case '(': advance(1); push(Tok::LParen, tl, tc); continue;
      case ')': advance(1); push(Tok::RParen, tl, tc); continue;
      case '[': advance(1); push(Tok::LBracket, tl, tc); continue;
      case ']': advance(1); push(Tok::RBracket, tl, tc); continue;
      case ',': advance(1); push(Tok::Comma, tl, tc); continue;
      case ';': advance(1); push(Tok::Semi, tl, tc); continue;
      case '|': advance(1); push(Tok::Pipe, tl, tc); continue;
      case '+': advance(1); push(Tok::Plus, tl, tc); continue;
      case '-': advance(1); push(Tok::Minus, tl, tc); continue;
      case '*': advance(1); push(Tok::Star, tl, tc); continue;
      case '=': advance(1); push(Tok::Eq, tl, tc); continue;
      case '<': advance(1); push(Tok::Lt, tl, tc); continue;
      case '>': advance(1); push(Tok::Gt, tl, tc); continue;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", tl, tc);
    }
  }

  Token end;
  end.kind = Tok::End;
  end.line = line;
  end.column = column;
  out.push_back(end);
  return out;
}

std::string token_name(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::Int: return "integer " + std::to_string(t.int_val);
    case Tok::Ident: return "identifier '" + t.text + "'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Semi: return "';'";
    case Tok::Pipe: return "'|'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::DotDot: return "'..'";
    case Tok::Eq: return "'='";
    case Tok::Ne: return "'!='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::And: return "'/\\'";
    case Tok::Or: return "'\\/'";
    case Tok::Implies: return "'->'";
    case Tok::KwForall: return "'forall'";
    case Tok::KwExists: return "'exists'";
    case Tok::KwSum: return "'sum'";
    case Tok::KwIn: return "'in'";
    case Tok::KwWhere: return "'where'";
    case Tok::KwDiv: return "'div'";
    case Tok::KwMod: return "'mod'";
    case Tok::KwNot: return "'not'";
    case Tok::KwParam: return "'param'";
    case Tok::KwSet: return "'set'";
    case Tok::KwVar: return "'var'";
    case Tok::KwConstraint: return "'constraint'";
    case Tok::KwBool: return "'bool'";
    case Tok::KwTrue: return "'true'";
    case Tok::KwFalse: return "'false'";
  }
  return "unknown token";
}

}  // namespace streamforge::minicp::detail

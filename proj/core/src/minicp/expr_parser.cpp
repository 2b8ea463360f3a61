#include "expr_parser.hpp"

#include <unordered_map>

namespace streamforge::minicp::detail {

namespace {

bool is_comparison(Tok k) {
  return k == Tok::Eq || k == Tok::Ne || k == Tok::Lt || k == Tok::Le ||
         k == Tok::Gt || k == Tok::Ge;
}

BinOp comparison_op(Tok k) {
  switch (k) {
    case Tok::Eq: return BinOp::Eq;
    case Tok::Ne: return BinOp::Ne;
    case Tok::Lt: return BinOp::Lt;
    case Tok::Le: return BinOp::Le;
    case Tok::Gt: return BinOp::Gt;
    default: return BinOp::Ge;
  }
}

struct BuiltinSig {
  Builtin builtin;
  int arity;
};

const std::unordered_map<std::string, BuiltinSig>& builtin_table() {
  static const std::unordered_map<std::string, BuiltinSig> table = {
      {"abs", {Builtin::Abs, 1}},
      {"min", {Builtin::Min, 2}},
      {"max", {Builtin::Max, 2}},
      {"bool2int", {Builtin::Bool2Int, 1}},
      {"alldifferent", {Builtin::AllDifferent, 1}},
      {"lex_lesseq", {Builtin::LexLesseq, 2}},
  };
  return table;
}

}  // namespace

void ExprParser::expect(Tok kind, const char* what) {
  if (!accept(kind)) {
    fail(std::string("expected ") + what + ", found " + token_name(peek()));
  }
}

void ExprParser::fail(const std::string& message) const {
  const Token& t = peek();
  throw ParseError(message, t.line, t.column);
}

ExprPtr ExprParser::parse_expression() { return parse_implies(); }

ExprPtr ExprParser::parse_implies() {
  ExprPtr lhs = parse_or();
  while (accept(Tok::Implies)) {
    lhs = make_bin(BinOp::Implies, lhs, parse_or());
  }
  return lhs;
}

ExprPtr ExprParser::parse_or() {
  ExprPtr lhs = parse_and();
  while (accept(Tok::Or)) {
    lhs = make_bin(BinOp::Or, lhs, parse_and());
  }
  return lhs;
}

ExprPtr ExprParser::parse_and() {
  ExprPtr lhs = parse_comparison();
  while (accept(Tok::And)) {
    lhs = make_bin(BinOp::And, lhs, parse_comparison());
  }
  return lhs;
}

ExprPtr ExprParser::parse_comparison() {
  ExprPtr lhs = parse_additive();
  if (!is_comparison(peek().kind)) return lhs;
  const BinOp op = comparison_op(next().kind);
  ExprPtr rhs = parse_additive();
  if (is_comparison(peek().kind)) {
    fail("comparison operators do not chain; parenthesize the intended grouping");
  }
  return make_bin(op, lhs, rhs);
}

ExprPtr ExprParser::parse_additive() {
  ExprPtr lhs = parse_multiplicative();
  for (;;) {
    if (accept(Tok::Plus)) {
      lhs = make_bin(BinOp::Add, lhs, parse_multiplicative());
    } else if (accept(Tok::Minus)) {
      lhs = make_bin(BinOp::Sub, lhs, parse_multiplicative());
    } else {
      return lhs;
    }
  }
}

ExprPtr ExprParser::parse_multiplicative() {
  ExprPtr lhs = parse_unary();
  for (;;) {
    if (accept(Tok::Star)) {
      lhs = make_bin(BinOp::Mul, lhs, parse_unary());
    } else if (accept(Tok::KwDiv)) {
      lhs = make_bin(BinOp::Div, lhs, parse_unary());
    } else if (accept(Tok::KwMod)) {
      lhs = make_bin(BinOp::Mod, lhs, parse_unary());
    } else {
      return lhs;
    }
  }
}

ExprPtr ExprParser::parse_unary() {
  if (accept(Tok::Minus)) {
    ExprPtr operand = parse_unary();
    // Fold a negated literal so `-5` is the literal -5 and survives printing.
    if (operand->kind == Expr::Kind::IntLit) return make_int(-operand->int_val);
    return make_un(UnOp::Neg, operand);
  }
  if (accept(Tok::KwNot)) return make_un(UnOp::Not, parse_unary());
  return parse_primary();
}

ExprPtr ExprParser::parse_primary() {
  const Token& t = peek();
  switch (t.kind) {
    case Tok::Int: {
      long long v = next().int_val;
      return make_int(v);
    }
    case Tok::KwTrue:
      next();
      return make_int(1);
    case Tok::KwFalse:
      next();
      return make_int(0);
    case Tok::LParen: {
      next();
      ExprPtr inner = parse_expression();
      expect(Tok::RParen, "')'");
      return inner;
    }
    case Tok::LBracket:
      return parse_bracket_expr();
    case Tok::KwForall:
    case Tok::KwExists:
    case Tok::KwSum: {
      const Tok kw = next().kind;
      const QuantKind q = kw == Tok::KwForall  ? QuantKind::Forall
                          : kw == Tok::KwExists ? QuantKind::Exists
                                                : QuantKind::Sum;
      expect(Tok::LParen, "'(' after quantifier");
      std::vector<Generator> gens = parse_generators();
      expect(Tok::RParen, "')' after generators");
      expect(Tok::LParen, "'(' before quantifier body");
      ExprPtr body = parse_expression();
      expect(Tok::RParen, "')' after quantifier body");
      return make_quant(q, std::move(gens), std::move(body));
    }
    case Tok::Ident:
      return parse_ident_expr();
    default:
      fail("expected expression, found " + token_name(t));
  }
}

ExprPtr ExprParser::parse_ident_expr() {
  std::string name = next().text;
  if (peek().kind == Tok::LParen) {
    auto it = builtin_table().find(name);
    if (it == builtin_table().end()) {
      fail("unknown function '" + name + "'");
    }
    std::vector<ExprPtr> args = parse_call_args();
    if (static_cast<int>(args.size()) != it->second.arity) {
      fail("'" + name + "' expects " + std::to_string(it->second.arity) +
           " argument(s), got " + std::to_string(args.size()));
    }
    return make_call(it->second.builtin, std::move(args));
  }
  if (accept(Tok::LBracket)) {
    std::vector<ExprPtr> indices;
    indices.push_back(parse_expression());
    while (accept(Tok::Comma)) indices.push_back(parse_expression());
    expect(Tok::RBracket, "']' after index list");
    return make_var(std::move(name), std::move(indices));
  }
  return make_var(std::move(name));
}

std::vector<ExprPtr> ExprParser::parse_call_args() {
  expect(Tok::LParen, "'('");
  std::vector<ExprPtr> args;
  if (peek().kind != Tok::RParen) {
    args.push_back(parse_expression());
    while (accept(Tok::Comma)) args.push_back(parse_expression());
  }
  expect(Tok::RParen, "')' after arguments");
  return args;
}

ExprPtr ExprParser::parse_bracket_expr() {
  expect(Tok::LBracket, "'['");
  if (accept(Tok::RBracket)) return make_array({});
  ExprPtr first = parse_expression();
  if (accept(Tok::Pipe)) {
    std::vector<Generator> gens = parse_generators();
    expect(Tok::RBracket, "']' after comprehension generators");
    return make_comprehension(std::move(first), std::move(gens));
  }
  std::vector<ExprPtr> elems;
  elems.push_back(std::move(first));
  while (accept(Tok::Comma)) elems.push_back(parse_expression());
  expect(Tok::RBracket, "']' after array elements");
  return make_array(std::move(elems));
}

SetRef ExprParser::parse_set_ref() {
  ExprPtr lo = parse_additive();
  if (accept(Tok::DotDot)) {
    SetRef s;
    s.lo = std::move(lo);
    s.hi = parse_additive();
    return s;
  }
  if (lo->kind == Expr::Kind::VarRef && lo->args.empty()) {
    SetRef s;
    s.name = lo->name;
    return s;
  }
  fail("expected a range 'lo..hi' or a named index set");
}

Generator ExprParser::parse_generator() {
  Generator gen;
  if (peek().kind != Tok::Ident) {
    fail("expected generator variable name, found " + token_name(peek()));
  }
  gen.names.push_back(next().text);
  while (accept(Tok::Comma)) {
    if (peek().kind != Tok::Ident) {
      fail("expected generator variable name, found " + token_name(peek()));
    }
    gen.names.push_back(next().text);
  }
  expect(Tok::KwIn, "'in' after generator variables");
  gen.set = parse_set_ref();
  if (accept(Tok::KwWhere)) gen.where = parse_expression();
  return gen;
}

std::vector<Generator> ExprParser::parse_generators() {
  std::vector<Generator> gens;
  gens.push_back(parse_generator());
  while (accept(Tok::Comma)) gens.push_back(parse_generator());
  return gens;
}

}  // namespace streamforge::minicp::detail

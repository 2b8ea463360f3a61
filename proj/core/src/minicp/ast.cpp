#include "streamforge/minicp/ast.hpp"

namespace streamforge::minicp {

namespace {

std::shared_ptr<Expr> node(Expr::Kind kind) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  return e;
}

}  // namespace

ExprPtr make_int(long long v) {
  auto e = node(Expr::Kind::IntLit);
  e->int_val = v;
  return e;
}

ExprPtr make_var(std::string name, std::vector<ExprPtr> indices) {
  auto e = node(Expr::Kind::VarRef);
  e->name = std::move(name);
  e->args = std::move(indices);
  return e;
}

ExprPtr make_bin(BinOp op, ExprPtr lhs, ExprPtr rhs) {
  auto e = node(Expr::Kind::Bin);
  e->bin_op = op;
  e->args = {std::move(lhs), std::move(rhs)};
  return e;
}

ExprPtr make_un(UnOp op, ExprPtr operand) {
  auto e = node(Expr::Kind::Un);
  e->un_op = op;
  e->args = {std::move(operand)};
  return e;
}

ExprPtr make_call(Builtin b, std::vector<ExprPtr> args) {
  auto e = node(Expr::Kind::Call);
  e->builtin = b;
  e->args = std::move(args);
  return e;
}

ExprPtr make_quant(QuantKind q, std::vector<Generator> gens, ExprPtr body) {
  auto e = node(Expr::Kind::Quant);
  e->quant = q;
  e->gens = std::move(gens);
  e->body = std::move(body);
  return e;
}

ExprPtr make_array(std::vector<ExprPtr> elems) {
  auto e = node(Expr::Kind::ArrayLit);
  e->args = std::move(elems);
  return e;
}

ExprPtr make_comprehension(ExprPtr body, std::vector<Generator> gens) {
  auto e = node(Expr::Kind::Comprehension);
  e->body = std::move(body);
  e->gens = std::move(gens);
  return e;
}

namespace {

bool equal_set(const SetRef& a, const SetRef& b) {
  if (a.is_named() != b.is_named()) return false;
  if (a.is_named()) return a.name == b.name;
  return equal(a.lo, b.lo) && equal(a.hi, b.hi);
}

bool equal_gens(const std::vector<Generator>& a, const std::vector<Generator>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].names != b[i].names) return false;
    if (!equal_set(a[i].set, b[i].set)) return false;
    const bool has_where = static_cast<bool>(a[i].where);
    if (has_where != static_cast<bool>(b[i].where)) return false;
    if (has_where && !equal(a[i].where, b[i].where)) return false;
  }
  return true;
}

}  // namespace

bool equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::IntLit:
      return a.int_val == b.int_val;
    case Expr::Kind::VarRef:
      if (a.name != b.name) return false;
      break;
    case Expr::Kind::Bin:
      if (a.bin_op != b.bin_op) return false;
      break;
    case Expr::Kind::Un:
      if (a.un_op != b.un_op) return false;
      break;
    case Expr::Kind::Call:
      if (a.builtin != b.builtin) return false;
      break;
    case Expr::Kind::Quant:
      if (a.quant != b.quant) return false;
      break;
    case Expr::Kind::ArrayLit:
    case Expr::Kind::Comprehension:
      break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!equal(a.args[i], b.args[i])) return false;
  }
  if (!equal_gens(a.gens, b.gens)) return false;
  const bool has_body = static_cast<bool>(a.body);
  if (has_body != static_cast<bool>(b.body)) return false;
  if (has_body && !equal(a.body, b.body)) return false;
  return true;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return equal(*a, *b);
}

}  // namespace streamforge::minicp

#include <string>

#include "streamforge/minicp/ast.hpp"

namespace streamforge::minicp {

const char* bin_op_token(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "div";
    case BinOp::Mod: return "mod";
    case BinOp::Eq: return "=";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "/\\";
    case BinOp::Or: return "\\/";
    case BinOp::Implies: return "->";
  }
  return "?";
}

namespace {

// Binding strength, higher binds tighter. Comparisons are non-associative, so
// both their operands are rendered at the additive level and any nested
// comparison gets explicit parentheses.
constexpr int kLevelImplies = 1;
constexpr int kLevelOr = 2;
constexpr int kLevelAnd = 3;
constexpr int kLevelCompare = 4;
constexpr int kLevelAdditive = 5;
constexpr int kLevelMultiplicative = 6;
constexpr int kLevelUnary = 7;
constexpr int kLevelPrimary = 8;

int op_level(BinOp op) {
  switch (op) {
    case BinOp::Implies: return kLevelImplies;
    case BinOp::Or: return kLevelOr;
    case BinOp::And: return kLevelAnd;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return kLevelCompare;
    case BinOp::Add:
    case BinOp::Sub: return kLevelAdditive;
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod: return kLevelMultiplicative;
  }
  return kLevelPrimary;
}

const char* builtin_name(Builtin b) {
  switch (b) {
    case Builtin::Abs: return "abs";
    case Builtin::Min: return "min";
    case Builtin::Max: return "max";
    case Builtin::Bool2Int: return "bool2int";
    case Builtin::AllDifferent: return "alldifferent";
    case Builtin::LexLesseq: return "lex_lesseq";
  }
  return "?";
}

class Writer {
 public:
  std::string take() { return std::move(out_); }

  void write(const Expr& e, int min_level) {
    const int level = expr_level(e);
    const bool parens = level < min_level;
    if (parens) out_ += '(';
    write_node(e);
    if (parens) out_ += ')';
  }

 private:
  static int expr_level(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Bin: return op_level(e.bin_op);
      case Expr::Kind::Un: return kLevelUnary;
      default: return kLevelPrimary;
    }
  }

  void write_node(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit:
        out_ += std::to_string(e.int_val);
        return;
      case Expr::Kind::VarRef:
        out_ += e.name;
        if (!e.args.empty()) {
          out_ += '[';
          write_list(e.args);
          out_ += ']';
        }
        return;
      case Expr::Kind::Bin: {
        const int level = op_level(e.bin_op);
        // Left-associative chains re-parse without parentheses on the left;
        // comparisons demand the tighter additive level on both sides.
        const int lhs_min = level == kLevelCompare ? kLevelAdditive : level;
        const int rhs_min = level == kLevelCompare ? kLevelAdditive : level + 1;
        write(*e.args[0], lhs_min);
        out_ += ' ';
        out_ += bin_op_token(e.bin_op);
        out_ += ' ';
        write(*e.args[1], rhs_min);
        return;
      }
      case Expr::Kind::Un:
        out_ += e.un_op == UnOp::Neg ? "-" : "not ";
        write(*e.args[0], kLevelUnary);
        return;
      case Expr::Kind::Call:
        out_ += builtin_name(e.builtin);
        out_ += '(';
        write_list(e.args);
        out_ += ')';
        return;
      case Expr::Kind::Quant:
        out_ += e.quant == QuantKind::Forall  ? "forall"
                : e.quant == QuantKind::Exists ? "exists"
                                               : "sum";
        out_ += '(';
        write_generators(e.gens);
        out_ += ")(";
        write(*e.body, kLevelImplies);
        out_ += ')';
        return;
      case Expr::Kind::ArrayLit:
        out_ += '[';
        write_list(e.args);
        out_ += ']';
        return;
      case Expr::Kind::Comprehension:
        out_ += '[';
        write(*e.body, kLevelImplies);
        out_ += " | ";
        write_generators(e.gens);
        out_ += ']';
        return;
    }
  }

  void write_list(const std::vector<ExprPtr>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) out_ += ", ";
      write(*items[i], kLevelImplies);
    }
  }

  void write_set(const SetRef& s) {
    if (s.is_named()) {
      out_ += s.name;
      return;
    }
    write(*s.lo, kLevelAdditive);
    out_ += "..";
    write(*s.hi, kLevelAdditive);
  }

  void write_generators(const std::vector<Generator>& gens) {
    for (std::size_t i = 0; i < gens.size(); ++i) {
      if (i > 0) out_ += ", ";
      const Generator& g = gens[i];
      for (std::size_t k = 0; k < g.names.size(); ++k) {
        if (k > 0) out_ += ", ";
        out_ += g.names[k];
      }
      out_ += " in ";
      write_set(g.set);
      if (g.where) {
        out_ += " where ";
        write(*g.where, kLevelImplies);
      }
    }
  }

  std::string out_;
};

}  // namespace

std::string print(const Expr& e) {
  Writer w;
  w.write(e, kLevelImplies);
  return w.take();
}

std::string print(const ExprPtr& e) { return print(*e); }

}  // namespace streamforge::minicp

#pragma once

#include <memory>
#include <string>
#include <vector>

namespace streamforge::minicp {

enum class BinOp {
  Add, Sub, Mul, Div, Mod,
  Eq, Ne, Lt, Le, Gt, Ge,
  And, Or, Implies,
};

enum class UnOp { Neg, Not };

enum class Builtin { Abs, Min, Max, Bool2Int, AllDifferent, LexLesseq };

enum class QuantKind { Forall, Exists, Sum };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// A generator set: either an explicit range `lo..hi` or a named index set.
struct SetRef {
  ExprPtr lo;        // null when named
  ExprPtr hi;
  std::string name;  // empty when explicit range

  bool is_named() const { return !name.empty(); }
};

/// One quantifier/comprehension generator, e.g. `c1, c2 in Containers where c1 < c2`.
struct Generator {
  std::vector<std::string> names;
  SetRef set;
  ExprPtr where;  // optional
};

/// Immutable expression node. A single tagged struct keeps the traversals
/// (printing, binding, grounding, evaluation) uniform.
struct Expr {
  enum class Kind { IntLit, VarRef, Bin, Un, Call, Quant, ArrayLit, Comprehension };

  Kind kind;
  long long int_val = 0;        // IntLit
  std::string name;             // VarRef
  BinOp bin_op = BinOp::Add;    // Bin
  UnOp un_op = UnOp::Neg;       // Un
  Builtin builtin = Builtin::Abs;  // Call
  QuantKind quant = QuantKind::Forall;  // Quant
  std::vector<ExprPtr> args;    // VarRef indices / Call args / Bin lhs,rhs / Un operand / ArrayLit elems
  std::vector<Generator> gens;  // Quant / Comprehension
  ExprPtr body;                 // Quant / Comprehension
};

ExprPtr make_int(long long v);
ExprPtr make_var(std::string name, std::vector<ExprPtr> indices = {});
ExprPtr make_bin(BinOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_un(UnOp op, ExprPtr operand);
ExprPtr make_call(Builtin b, std::vector<ExprPtr> args);
ExprPtr make_quant(QuantKind q, std::vector<Generator> gens, ExprPtr body);
ExprPtr make_array(std::vector<ExprPtr> elems);
ExprPtr make_comprehension(ExprPtr body, std::vector<Generator> gens);

/// Structural equality, used by the round-trip tests and text dedup.
bool equal(const Expr& a, const Expr& b);
bool equal(const ExprPtr& a, const ExprPtr& b);

/// Renders the AST back to mini-language text. parse(print(ast)) == ast.
std::string print(const Expr& e);
std::string print(const ExprPtr& e);

const char* bin_op_token(BinOp op);

}  // namespace streamforge::minicp

#include "streamforge/minicp/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "expr_parser.hpp"
#include "lexer.hpp"
#include "streamforge/minicp/eval.hpp"
#include "streamforge/minicp/parse.hpp"

namespace streamforge::minicp {

long long ValueArray::at(long long i) const {
  if (dims.size() != 1) throw EvalError("expected a 1-D array");
  if (i < 1 || i > dims[0]) {
    throw EvalError("index " + std::to_string(i) + " outside 1.." + std::to_string(dims[0]));
  }
  return data[static_cast<std::size_t>(i - 1)];
}

long long ValueArray::at(long long i, long long j) const {
  if (dims.size() != 2) throw EvalError("expected a 2-D array");
  if (i < 1 || i > dims[0] || j < 1 || j > dims[1]) {
    throw EvalError("index (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") outside [1.." + std::to_string(dims[0]) + ", 1.." +
                    std::to_string(dims[1]) + "]");
  }
  return data[static_cast<std::size_t>((i - 1) * dims[1] + (j - 1))];
}

std::vector<long long> VarInfo::extents() const {
  std::vector<long long> out;
  out.reserve(index_ranges.size());
  for (const auto& [lo, hi] : index_ranges) out.push_back(hi - lo + 1);
  return out;
}

const VarInfo* Instance::find_var(const std::string& name) const {
  for (const VarInfo& v : vars) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const ValueArray* Instance::find_param(const std::string& name) const {
  auto it = params.find(name);
  return it == params.end() ? nullptr : &it->second;
}

std::size_t Instance::cell_index(const VarInfo& var,
                                 const std::vector<long long>& indices) const {
  if (indices.size() != var.index_ranges.size()) {
    throw EvalError("'" + var.name + "' expects " +
                    std::to_string(var.index_ranges.size()) + " indices, got " +
                    std::to_string(indices.size()));
  }
  std::size_t offset = 0;
  for (std::size_t d = 0; d < indices.size(); ++d) {
    const auto [lo, hi] = var.index_ranges[d];
    if (indices[d] < lo || indices[d] > hi) {
      throw EvalError("index " + std::to_string(indices[d]) + " of '" + var.name +
                      "' outside " + std::to_string(lo) + ".." + std::to_string(hi));
    }
    offset = offset * static_cast<std::size_t>(hi - lo + 1) +
             static_cast<std::size_t>(indices[d] - lo);
  }
  return var.cell_offset + offset;
}

std::vector<long long> Instance::flatten(const Solution& solution) const {
  std::vector<long long> cells(total_cells, 0);
  for (const VarInfo& var : vars) {
    auto it = solution.find(var.name);
    if (it == solution.end()) {
      throw EvalError("solution is missing variable '" + var.name + "'");
    }
    if (it->second.size() != var.cell_count) {
      throw EvalError("solution value for '" + var.name + "' has " +
                      std::to_string(it->second.size()) + " cells, expected " +
                      std::to_string(var.cell_count));
    }
    for (std::size_t k = 0; k < var.cell_count; ++k) {
      cells[var.cell_offset + k] = it->second.data[k];
    }
  }
  return cells;
}

Solution Instance::unflatten(const std::vector<long long>& cells) const {
  if (cells.size() != total_cells) {
    throw EvalError("flat assignment has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(total_cells));
  }
  Solution out;
  for (const VarInfo& var : vars) {
    ValueArray value;
    value.dims = var.extents();
    value.data.assign(cells.begin() + static_cast<long long>(var.cell_offset),
                      cells.begin() + static_cast<long long>(var.cell_offset + var.cell_count));
    out.emplace(var.name, std::move(value));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model and data parsing
// ---------------------------------------------------------------------------

namespace {

using detail::ExprParser;
using detail::Tok;
using detail::Token;

class StatementParser {
 public:
  explicit StatementParser(const std::string& text)
      : tokens_(detail::lex(text)), parser_(tokens_) {}

  Model parse_model() {
    Model model;
    while (parser_.peek().kind != Tok::End) {
      switch (parser_.peek().kind) {
        case Tok::KwParam:
          model.params.push_back(parse_param());
          break;
        case Tok::KwSet:
          model.sets.push_back(parse_set());
          break;
        case Tok::KwVar:
          model.vars.push_back(parse_var());
          break;
        case Tok::KwConstraint:
          advance();
          model.constraints.push_back(parser_.parse_expression());
          parser_.expect(Tok::Semi, "';' after constraint");
          break;
        default:
          parser_.fail("expected 'param', 'set', 'var', or 'constraint', found " +
                       detail::token_name(parser_.peek()));
      }
    }
    return model;
  }

  DataMap parse_data() {
    DataMap data;
    while (parser_.peek().kind != Tok::End) {
      if (parser_.peek().kind == Tok::KwParam) advance();
      std::string name = expect_ident("parameter name");
      parser_.expect(Tok::Eq, "'=' in parameter assignment");
      ParamInit init = parse_init();
      parser_.expect(Tok::Semi, "';' after parameter assignment");
      data.emplace_back(std::move(name), std::move(init));
    }
    return data;
  }

 private:
  void advance() { parser_.skip(); }

  std::string expect_ident(const char* what) {
    if (parser_.peek().kind != Tok::Ident) {
      parser_.fail(std::string("expected ") + what + ", found " +
                   detail::token_name(parser_.peek()));
    }
    std::string name = parser_.peek().text;
    parser_.skip();
    return name;
  }

  ParamDecl parse_param() {
    parser_.expect(Tok::KwParam, "'param'");
    ParamDecl decl;
    decl.name = expect_ident("parameter name");
    if (parser_.peek().kind == Tok::Eq) {
      parser_.expect(Tok::Eq, "'='");
      decl.init = parse_init();
    }
    parser_.expect(Tok::Semi, "';' after parameter declaration");
    return decl;
  }

  ParamInit parse_init() {
    ParamInit init;
    if (parser_.peek().kind != Tok::LBracket) {
      init.elems.push_back(parser_.parse_expression());
      return init;
    }
    parser_.expect(Tok::LBracket, "'['");
    if (parser_.peek().kind == Tok::Pipe) return parse_matrix_rows();
    // 1-D literal.
    std::vector<ExprPtr> elems;
    if (parser_.peek().kind != Tok::RBracket) {
      elems.push_back(parser_.parse_expression());
      while (parser_.peek().kind == Tok::Comma) {
        parser_.expect(Tok::Comma, "','");
        elems.push_back(parser_.parse_expression());
      }
    }
    parser_.expect(Tok::RBracket, "']' after array literal");
    init.dims = {static_cast<long long>(elems.size())};
    init.elems = std::move(elems);
    return init;
  }

  ParamInit parse_matrix_rows() {
    parser_.expect(Tok::Pipe, "'|'");
    ParamInit init;
    long long rows = 0;
    long long cols = -1;
    while (parser_.peek().kind != Tok::RBracket) {
      std::vector<ExprPtr> row;
      row.push_back(parser_.parse_expression());
      while (parser_.peek().kind == Tok::Comma) {
        parser_.expect(Tok::Comma, "','");
        row.push_back(parser_.parse_expression());
      }
      parser_.expect(Tok::Pipe, "'|' after matrix row");
      if (cols == -1) {
        cols = static_cast<long long>(row.size());
      } else if (cols != static_cast<long long>(row.size())) {
        parser_.fail("matrix rows have unequal lengths");
      }
      ++rows;
      for (auto& e : row) init.elems.push_back(std::move(e));
    }
    parser_.expect(Tok::RBracket, "']' closing matrix literal");
    init.dims = {rows, cols == -1 ? 0 : cols};
    return init;
  }

  SetDecl parse_set() {
    parser_.expect(Tok::KwSet, "'set'");
    SetDecl decl;
    decl.name = expect_ident("set name");
    parser_.expect(Tok::Eq, "'=' in set declaration");
    decl.lo = parser_.parse_additive();
    parser_.expect(Tok::DotDot, "'..' in set declaration");
    decl.hi = parser_.parse_additive();
    parser_.expect(Tok::Semi, "';' after set declaration");
    return decl;
  }

  VarShapeDecl parse_var() {
    parser_.expect(Tok::KwVar, "'var'");
    VarShapeDecl decl;
    decl.name = expect_ident("variable name");
    if (parser_.peek().kind == Tok::LBracket) {
      parser_.expect(Tok::LBracket, "'['");
      decl.index_sets.push_back(parser_.parse_set_ref());
      while (parser_.peek().kind == Tok::Comma) {
        parser_.expect(Tok::Comma, "','");
        decl.index_sets.push_back(parser_.parse_set_ref());
      }
      parser_.expect(Tok::RBracket, "']' after variable shape");
    }
    parser_.expect(Tok::KwIn, "'in' before variable domain");
    if (parser_.peek().kind == Tok::KwBool) {
      parser_.expect(Tok::KwBool, "'bool'");
      decl.is_bool = true;
    } else {
      decl.dom_lo = parser_.parse_additive();
      parser_.expect(Tok::DotDot, "'..' in variable domain");
      decl.dom_hi = parser_.parse_additive();
    }
    parser_.expect(Tok::Semi, "';' after variable declaration");
    return decl;
  }

  std::vector<Token> tokens_;
  ExprParser parser_;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

Model parse_model(const std::string& text) { return StatementParser(text).parse_model(); }

Model parse_model_file(const std::string& path) { return parse_model(read_text_file(path)); }

DataMap parse_data(const std::string& text) { return StatementParser(text).parse_data(); }

DataMap parse_data_file(const std::string& path) { return parse_data(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

namespace {

long long eval_param_expr(const ExprPtr& expr, const Instance& partial,
                          const std::string& context) {
  try {
    return eval_int(expr, partial, std::vector<long long>(partial.total_cells, 0));
  } catch (const EvalError& e) {
    throw BindError("in " + context + ": " + e.what());
  }
}

std::pair<long long, long long> resolve_set_ref(const SetRef& ref, const Instance& partial,
                                                const std::string& context) {
  if (ref.is_named()) {
    auto it = partial.sets.find(ref.name);
    if (it == partial.sets.end()) {
      throw BindError("in " + context + ": unknown index set '" + ref.name + "'");
    }
    return it->second;
  }
  return {eval_param_expr(ref.lo, partial, context), eval_param_expr(ref.hi, partial, context)};
}

}  // namespace

Instance resolve(const Model& model, const DataMap& data) {
  Instance inst;
  inst.total_cells = 0;

  std::set<std::string> declared_params;
  for (const ParamDecl& p : model.params) {
    if (!declared_params.insert(p.name).second) {
      throw BindError("parameter '" + p.name + "' declared twice");
    }
  }
  for (const auto& [name, init] : data) {
    if (!declared_params.count(name)) {
      throw BindError("data assigns unknown parameter '" + name + "'");
    }
  }

  auto find_data = [&](const std::string& name) -> const ParamInit* {
    const ParamInit* found = nullptr;
    for (const auto& [n, init] : data) {
      if (n == name) found = &init;  // last assignment wins
    }
    return found;
  };

  for (const ParamDecl& p : model.params) {
    const ParamInit* init = find_data(p.name);
    if (init == nullptr && p.init) init = &*p.init;
    if (init == nullptr) {
      throw BindError("parameter '" + p.name + "' has no value");
    }
    ValueArray value;
    value.dims = init->dims;
    value.data.reserve(init->elems.size());
    const std::string context = "parameter '" + p.name + "'";
    for (const ExprPtr& e : init->elems) {
      value.data.push_back(eval_param_expr(e, inst, context));
    }
    if (!value.dims.empty()) {
      long long expected = 1;
      for (long long d : value.dims) expected *= d;
      if (expected != static_cast<long long>(value.data.size())) {
        throw BindError(context + ": literal shape mismatch");
      }
    }
    inst.params.emplace(p.name, std::move(value));
  }

  for (const SetDecl& s : model.sets) {
    if (inst.params.count(s.name) || inst.sets.count(s.name)) {
      throw BindError("name '" + s.name + "' declared twice");
    }
    const std::string context = "set '" + s.name + "'";
    inst.sets.emplace(s.name, std::pair{eval_param_expr(s.lo, inst, context),
                                        eval_param_expr(s.hi, inst, context)});
  }

  for (const VarShapeDecl& v : model.vars) {
    if (inst.params.count(v.name) || inst.sets.count(v.name) || inst.find_var(v.name)) {
      throw BindError("name '" + v.name + "' declared twice");
    }
    const std::string context = "variable '" + v.name + "'";
    VarInfo info;
    info.name = v.name;
    info.is_bool = v.is_bool;
    if (v.is_bool) {
      info.dom_lo = 0;
      info.dom_hi = 1;
    } else {
      info.dom_lo = eval_param_expr(v.dom_lo, inst, context);
      info.dom_hi = eval_param_expr(v.dom_hi, inst, context);
      if (info.dom_hi < info.dom_lo) {
        throw BindError(context + ": empty domain " + std::to_string(info.dom_lo) + ".." +
                        std::to_string(info.dom_hi));
      }
    }
    std::size_t count = 1;
    for (const SetRef& ref : v.index_sets) {
      const auto [lo, hi] = resolve_set_ref(ref, inst, context);
      if (hi < lo) throw BindError(context + ": empty index range");
      info.index_ranges.emplace_back(lo, hi);
      count *= static_cast<std::size_t>(hi - lo + 1);
    }
    info.cell_offset = inst.total_cells;
    info.cell_count = count;
    inst.total_cells += count;
    inst.vars.push_back(std::move(info));
  }

  for (const ExprPtr& c : model.constraints) {
    bind_check(c, inst, /*as_constraint=*/true);
    inst.constraints.push_back(c);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Binding and type checking
// ---------------------------------------------------------------------------

namespace {

enum class Ty { Int, Bool, IntArray };

const char* ty_name(Ty t) {
  switch (t) {
    case Ty::Int: return "int";
    case Ty::Bool: return "bool";
    case Ty::IntArray: return "array of int";
  }
  return "?";
}

class Binder {
 public:
  explicit Binder(const Instance& inst) : inst_(inst) {}

  Ty check(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::IntLit:
        return Ty::Int;
      case Expr::Kind::VarRef:
        return check_ref(e);
      case Expr::Kind::Bin:
        return check_bin(e);
      case Expr::Kind::Un: {
        const Ty t = check(*e.args[0]);
        if (e.un_op == UnOp::Neg) {
          require(t, Ty::Int, "operand of unary '-'");
          return Ty::Int;
        }
        require(t, Ty::Bool, "operand of 'not'");
        return Ty::Bool;
      }
      case Expr::Kind::Call:
        return check_call(e);
      case Expr::Kind::Quant: {
        const std::size_t mark = scope_.size();
        check_generators(e.gens);
        const Ty body = check(*e.body);
        scope_.resize(mark);
        if (e.quant == QuantKind::Sum) {
          require(body, Ty::Int, "body of 'sum'");
          return Ty::Int;
        }
        require(body, Ty::Bool,
                e.quant == QuantKind::Forall ? "body of 'forall'" : "body of 'exists'");
        return Ty::Bool;
      }
      case Expr::Kind::ArrayLit:
        for (const ExprPtr& elem : e.args) {
          require(check(*elem), Ty::Int, "array element");
        }
        return Ty::IntArray;
      case Expr::Kind::Comprehension: {
        const std::size_t mark = scope_.size();
        check_generators(e.gens);
        require(check(*e.body), Ty::Int, "comprehension element");
        scope_.resize(mark);
        return Ty::IntArray;
      }
    }
    throw BindError("unreachable expression kind");
  }

 private:
  void require(Ty got, Ty want, const std::string& what) {
    if (got != want) {
      throw BindError(what + " must be " + ty_name(want) + ", found " + ty_name(got));
    }
  }

  bool in_scope(const std::string& name) const {
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
      if (*it == name) return true;
    }
    return false;
  }

  Ty check_ref(const Expr& e) {
    for (const ExprPtr& idx : e.args) {
      require(check(*idx), Ty::Int, "array index");
    }
    if (e.args.empty() && in_scope(e.name)) return Ty::Int;
    if (const ValueArray* p = inst_.find_param(e.name)) {
      if (e.args.empty()) return p->is_scalar() ? Ty::Int : Ty::IntArray;
      if (p->is_scalar()) throw BindError("'" + e.name + "' is not an array");
      if (p->dims.size() != e.args.size()) {
        throw BindError("'" + e.name + "' expects " + std::to_string(p->dims.size()) +
                        " indices, got " + std::to_string(e.args.size()));
      }
      return Ty::Int;
    }
    if (const VarInfo* v = inst_.find_var(e.name)) {
      if (e.args.empty()) {
        if (v->index_ranges.empty()) return v->is_bool ? Ty::Bool : Ty::Int;
        if (v->is_bool) throw BindError("'" + e.name + "' is an array of bool, not of int");
        return Ty::IntArray;
      }
      if (v->index_ranges.empty()) throw BindError("'" + e.name + "' is not an array");
      if (v->index_ranges.size() != e.args.size()) {
        throw BindError("'" + e.name + "' expects " + std::to_string(v->index_ranges.size()) +
                        " indices, got " + std::to_string(e.args.size()));
      }
      return v->is_bool ? Ty::Bool : Ty::Int;
    }
    throw BindError("unbound identifier '" + e.name + "'");
  }

  Ty check_bin(const Expr& e) {
    const Ty lhs = check(*e.args[0]);
    const Ty rhs = check(*e.args[1]);
    switch (e.bin_op) {
      case BinOp::Add:
      case BinOp::Sub:
      case BinOp::Mul:
      case BinOp::Div:
      case BinOp::Mod:
        require(lhs, Ty::Int, std::string("left operand of '") + bin_op_token(e.bin_op) + "'");
        require(rhs, Ty::Int, std::string("right operand of '") + bin_op_token(e.bin_op) + "'");
        return Ty::Int;
      case BinOp::Eq:
      case BinOp::Ne:
      case BinOp::Lt:
      case BinOp::Le:
      case BinOp::Gt:
      case BinOp::Ge:
        if (lhs == Ty::IntArray || rhs == Ty::IntArray) {
          throw BindError(std::string("cannot compare arrays with '") +
                          bin_op_token(e.bin_op) + "'");
        }
        if (lhs != rhs) {
          throw BindError(std::string("operands of '") + bin_op_token(e.bin_op) +
                          "' have mixed types " + ty_name(lhs) + " and " + ty_name(rhs));
        }
        return Ty::Bool;
      case BinOp::And:
      case BinOp::Or:
      case BinOp::Implies:
        require(lhs, Ty::Bool, std::string("left operand of '") + bin_op_token(e.bin_op) + "'");
        require(rhs, Ty::Bool, std::string("right operand of '") + bin_op_token(e.bin_op) + "'");
        return Ty::Bool;
    }
    throw BindError("unreachable operator");
  }

  Ty check_call(const Expr& e) {
    switch (e.builtin) {
      case Builtin::Abs:
        require(check(*e.args[0]), Ty::Int, "argument of 'abs'");
        return Ty::Int;
      case Builtin::Min:
      case Builtin::Max:
        require(check(*e.args[0]), Ty::Int, "argument of 'min'/'max'");
        require(check(*e.args[1]), Ty::Int, "argument of 'min'/'max'");
        return Ty::Int;
      case Builtin::Bool2Int:
        require(check(*e.args[0]), Ty::Bool, "argument of 'bool2int'");
        return Ty::Int;
      case Builtin::AllDifferent:
        require(check(*e.args[0]), Ty::IntArray, "argument of 'alldifferent'");
        return Ty::Bool;
      case Builtin::LexLesseq:
        require(check(*e.args[0]), Ty::IntArray, "argument of 'lex_lesseq'");
        require(check(*e.args[1]), Ty::IntArray, "argument of 'lex_lesseq'");
        return Ty::Bool;
    }
    throw BindError("unreachable builtin");
  }

  void check_generators(const std::vector<Generator>& gens) {
    for (const Generator& g : gens) {
      if (g.set.is_named()) {
        if (!inst_.sets.count(g.set.name)) {
          throw BindError("unknown index set '" + g.set.name + "'");
        }
      } else {
        require(check(*g.set.lo), Ty::Int, "generator range bound");
        require(check(*g.set.hi), Ty::Int, "generator range bound");
      }
      for (const std::string& name : g.names) scope_.push_back(name);
      if (g.where) require(check(*g.where), Ty::Bool, "'where' clause");
    }
  }

  const Instance& inst_;
  std::vector<std::string> scope_;
};

}  // namespace

void bind_check(const ExprPtr& expr, const Instance& instance, bool as_constraint) {
  Binder binder(instance);
  const Ty top = binder.check(*expr);
  if (as_constraint && top != Ty::Bool) {
    throw BindError("constraint must be boolean, found " + std::string(ty_name(top)));
  }
}

ExprPtr parse_constraint(const std::string& text, const Instance& instance) {
  ExprPtr expr = parse_expression(text);
  bind_check(expr, instance, /*as_constraint=*/true);
  return expr;
}

}  // namespace streamforge::minicp

#include "streamforge/minicp/eval.hpp"

#include <algorithm>

#include "evaluator.hpp"
#include "streamforge/minicp/errors.hpp"

namespace streamforge::minicp {

namespace detail {

long long Evaluator::cell_value(std::size_t index) const {
  if (known_ != nullptr && !(*known_)[index]) throw Unassigned{};
  return cells_[index];
}

long long Evaluator::eval_scalar(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return e.int_val;
    case Expr::Kind::VarRef:
      return eval_ref(e);
    case Expr::Kind::Bin:
      return eval_bin(e);
    case Expr::Kind::Un: {
      const long long v = eval_scalar(*e.args[0]);
      return e.un_op == UnOp::Neg ? -v : (v == 0 ? 1 : 0);
    }
    case Expr::Kind::Call:
      return eval_call(e);
    case Expr::Kind::Quant:
      return eval_quant(e);
    case Expr::Kind::ArrayLit:
    case Expr::Kind::Comprehension:
      throw EvalError("array expression used where a scalar is required");
  }
  throw EvalError("unreachable expression kind");
}

long long Evaluator::eval_ref(const Expr& e) {
  if (e.args.empty()) {
    for (auto it = binds_.rbegin(); it != binds_.rend(); ++it) {
      if (it->first == e.name) return it->second;
    }
    if (const ValueArray* p = inst_.find_param(e.name)) {
      if (!p->is_scalar()) throw EvalError("'" + e.name + "' is an array, not a scalar");
      return p->data[0];
    }
    if (const VarInfo* v = inst_.find_var(e.name)) {
      if (!v->index_ranges.empty()) {
        throw EvalError("'" + e.name + "' is an array, not a scalar");
      }
      return cell_value(v->cell_offset);
    }
    throw EvalError("unknown identifier '" + e.name + "'");
  }

  std::vector<long long> indices;
  indices.reserve(e.args.size());
  for (const ExprPtr& idx : e.args) indices.push_back(eval_scalar(*idx));

  if (const ValueArray* p = inst_.find_param(e.name)) {
    if (indices.size() == 1) return p->at(indices[0]);
    if (indices.size() == 2) return p->at(indices[0], indices[1]);
    throw EvalError("'" + e.name + "' used with " + std::to_string(indices.size()) + " indices");
  }
  if (const VarInfo* v = inst_.find_var(e.name)) {
    return cell_value(inst_.cell_index(*v, indices));
  }
  throw EvalError("unknown identifier '" + e.name + "'");
}

long long Evaluator::eval_bin(const Expr& e) {
  // Logic operators short-circuit so that guarded expressions (for example a
  // division behind an implication) never evaluate the guarded side.
  switch (e.bin_op) {
    case BinOp::And:
      if (eval_scalar(*e.args[0]) == 0) return 0;
      return eval_scalar(*e.args[1]) != 0 ? 1 : 0;
    case BinOp::Or:
      if (eval_scalar(*e.args[0]) != 0) return 1;
      return eval_scalar(*e.args[1]) != 0 ? 1 : 0;
    case BinOp::Implies:
      if (eval_scalar(*e.args[0]) == 0) return 1;
      return eval_scalar(*e.args[1]) != 0 ? 1 : 0;
    default:
      break;
  }

  const long long a = eval_scalar(*e.args[0]);
  const long long b = eval_scalar(*e.args[1]);
  switch (e.bin_op) {
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Mul: return a * b;
    case BinOp::Div:
      if (b == 0) throw EvalError("division by zero");
      return a / b;
    case BinOp::Mod:
      if (b == 0) throw EvalError("modulo by zero");
      return a % b;
    case BinOp::Eq: return a == b ? 1 : 0;
    case BinOp::Ne: return a != b ? 1 : 0;
    case BinOp::Lt: return a < b ? 1 : 0;
    case BinOp::Le: return a <= b ? 1 : 0;
    case BinOp::Gt: return a > b ? 1 : 0;
    case BinOp::Ge: return a >= b ? 1 : 0;
    default:
      throw EvalError("unreachable operator");
  }
}

long long Evaluator::eval_call(const Expr& e) {
  switch (e.builtin) {
    case Builtin::Abs: {
      const long long v = eval_scalar(*e.args[0]);
      return v < 0 ? -v : v;
    }
    case Builtin::Min:
      return std::min(eval_scalar(*e.args[0]), eval_scalar(*e.args[1]));
    case Builtin::Max:
      return std::max(eval_scalar(*e.args[0]), eval_scalar(*e.args[1]));
    case Builtin::Bool2Int:
      return eval_scalar(*e.args[0]) != 0 ? 1 : 0;
    case Builtin::AllDifferent: {
      std::vector<long long> values = eval_list(*e.args[0]);
      std::sort(values.begin(), values.end());
      return std::adjacent_find(values.begin(), values.end()) == values.end() ? 1 : 0;
    }
    case Builtin::LexLesseq: {
      const std::vector<long long> a = eval_list(*e.args[0]);
      const std::vector<long long> b = eval_list(*e.args[1]);
      if (a.size() != b.size()) {
        throw EvalError("lex_lesseq arrays have different lengths");
      }
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return 1;
        if (a[i] > b[i]) return 0;
      }
      return 1;
    }
  }
  throw EvalError("unreachable builtin");
}

long long Evaluator::eval_quant(const Expr& e) {
  long long result = e.quant == QuantKind::Forall ? 1 : 0;
  enumerate(e.gens, 0, [&]() {
    switch (e.quant) {
      case QuantKind::Forall:
        if (eval_scalar(*e.body) == 0) {
          result = 0;
          return false;
        }
        return true;
      case QuantKind::Exists:
        if (eval_scalar(*e.body) != 0) {
          result = 1;
          return false;
        }
        return true;
      case QuantKind::Sum:
        result += eval_scalar(*e.body);
        return true;
    }
    return true;
  });
  return result;
}

std::vector<long long> Evaluator::eval_list(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::ArrayLit: {
      std::vector<long long> out;
      out.reserve(e.args.size());
      for (const ExprPtr& elem : e.args) out.push_back(eval_scalar(*elem));
      return out;
    }
    case Expr::Kind::Comprehension: {
      std::vector<long long> out;
      enumerate(e.gens, 0, [&]() {
        out.push_back(eval_scalar(*e.body));
        return true;
      });
      return out;
    }
    case Expr::Kind::VarRef: {
      if (!e.args.empty()) break;
      if (const ValueArray* p = inst_.find_param(e.name)) return p->data;
      if (const VarInfo* v = inst_.find_var(e.name)) {
        std::vector<long long> out;
        out.reserve(v->cell_count);
        for (std::size_t k = 0; k < v->cell_count; ++k) {
          out.push_back(cell_value(v->cell_offset + k));
        }
        return out;
      }
      throw EvalError("unknown identifier '" + e.name + "'");
    }
    default:
      break;
  }
  throw EvalError("expected an array expression");
}

std::pair<long long, long long> Evaluator::set_range(const SetRef& ref) {
  if (ref.is_named()) {
    auto it = inst_.sets.find(ref.name);
    if (it == inst_.sets.end()) throw EvalError("unknown index set '" + ref.name + "'");
    return it->second;
  }
  return {eval_scalar(*ref.lo), eval_scalar(*ref.hi)};
}

bool Evaluator::enumerate(const std::vector<Generator>& gens, std::size_t k,
                          const std::function<bool()>& fn) {
  if (k == gens.size()) return fn();
  const Generator& gen = gens[k];
  const auto [lo, hi] = set_range(gen.set);

  // Multi-name generators draw each name independently from the same set.
  std::vector<long long> values(gen.names.size(), lo);
  const std::function<bool(std::size_t)> walk = [&](std::size_t name_index) -> bool {
    if (name_index == gen.names.size()) {
      if (gen.where && eval_scalar(*gen.where) == 0) return true;
      return enumerate(gens, k + 1, fn);
    }
    for (long long v = lo; v <= hi; ++v) {
      push_bind(gen.names[name_index], v);
      const bool keep_going = walk(name_index + 1);
      pop_bind();
      if (!keep_going) return false;
    }
    return true;
  };
  return walk(0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public wrappers
// ---------------------------------------------------------------------------

bool eval_constraint(const ExprPtr& expr, const Instance& instance,
                     const std::vector<long long>& cells) {
  detail::Evaluator ev(instance, cells);
  return ev.eval_scalar(*expr) != 0;
}

bool eval_constraint(const ExprPtr& expr, const Instance& instance, const Solution& solution) {
  return eval_constraint(expr, instance, instance.flatten(solution));
}

long long eval_int(const ExprPtr& expr, const Instance& instance,
                   const std::vector<long long>& cells) {
  detail::Evaluator ev(instance, cells);
  return ev.eval_scalar(*expr);
}

long long eval_int(const ExprPtr& expr, const Instance& instance, const Solution& solution) {
  return eval_int(expr, instance, instance.flatten(solution));
}

TriState eval_partial(const ExprPtr& expr, const Instance& instance,
                      const std::vector<long long>& cells, const std::vector<char>& known) {
  detail::Evaluator ev(instance, cells, &known);
  try {
    return ev.eval_scalar(*expr) != 0 ? TriState::True : TriState::False;
  } catch (const detail::Unassigned&) {
    return TriState::Unknown;
  }
}

}  // namespace streamforge::minicp

#include "streamforge/minicp/solve.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

#include "evaluator.hpp"
#include "streamforge/minicp/errors.hpp"
#include "streamforge/minicp/eval.hpp"

namespace streamforge::minicp {

namespace {

using detail::Evaluator;
using detail::Unassigned;

// ---------------------------------------------------------------------------
// Quantifier expansion
// ---------------------------------------------------------------------------

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, long long>& binds);

ExprPtr substitute_quantifier(const ExprPtr& e, const std::map<std::string, long long>& binds) {
  std::map<std::string, long long> local = binds;
  std::vector<Generator> gens;
  gens.reserve(e->gens.size());
  for (const Generator& g : e->gens) {
    Generator ng;
    ng.names = g.names;
    if (g.set.is_named()) {
      ng.set = g.set;
    } else {
      ng.set.lo = substitute(g.set.lo, local);
      ng.set.hi = substitute(g.set.hi, local);
    }
    // Generator names shadow outer bindings from their declaration onward,
    // including inside their own where clause.
    for (const std::string& name : g.names) local.erase(name);
    if (g.where) ng.where = substitute(g.where, local);
    gens.push_back(std::move(ng));
  }
  ExprPtr body = substitute(e->body, local);
  if (e->kind == Expr::Kind::Quant) return make_quant(e->quant, std::move(gens), std::move(body));
  return make_comprehension(std::move(body), std::move(gens));
}

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, long long>& binds) {
  switch (e->kind) {
    case Expr::Kind::IntLit:
      return e;
    case Expr::Kind::VarRef: {
      if (e->args.empty()) {
        auto it = binds.find(e->name);
        return it == binds.end() ? e : make_int(it->second);
      }
      std::vector<ExprPtr> indices;
      indices.reserve(e->args.size());
      for (const ExprPtr& idx : e->args) indices.push_back(substitute(idx, binds));
      return make_var(e->name, std::move(indices));
    }
    case Expr::Kind::Bin:
      return make_bin(e->bin_op, substitute(e->args[0], binds), substitute(e->args[1], binds));
    case Expr::Kind::Un:
      return make_un(e->un_op, substitute(e->args[0], binds));
    case Expr::Kind::Call: {
      std::vector<ExprPtr> args;
      args.reserve(e->args.size());
      for (const ExprPtr& a : e->args) args.push_back(substitute(a, binds));
      return make_call(e->builtin, std::move(args));
    }
    case Expr::Kind::ArrayLit: {
      std::vector<ExprPtr> elems;
      elems.reserve(e->args.size());
      for (const ExprPtr& a : e->args) elems.push_back(substitute(a, binds));
      return make_array(std::move(elems));
    }
    case Expr::Kind::Quant:
    case Expr::Kind::Comprehension:
      return substitute_quantifier(e, binds);
  }
  return e;
}

void expand_constraint(const ExprPtr& e, const Instance& inst, std::vector<ExprPtr>& out) {
  if (e->kind == Expr::Kind::Bin && e->bin_op == BinOp::And) {
    expand_constraint(e->args[0], inst, out);
    expand_constraint(e->args[1], inst, out);
    return;
  }
  if (e->kind == Expr::Kind::Quant && e->quant == QuantKind::Forall) {
    const std::vector<long long> no_cells(inst.total_cells, 0);
    const std::vector<char> none_known(inst.total_cells, 0);
    Evaluator ev(inst, no_cells, &none_known);
    std::vector<std::map<std::string, long long>> bindings;
    try {
      ev.enumerate(e->gens, 0, [&]() {
        bindings.emplace_back(ev.binds().begin(), ev.binds().end());
        return true;
      });
    } catch (const Unassigned&) {
      // Generator bounds or a where clause depend on decision variables:
      // keep the quantifier opaque and let the evaluator handle it.
      out.push_back(e);
      return;
    } catch (const EvalError&) {
      out.push_back(e);
      return;
    }
    for (const auto& binding : bindings) {
      expand_constraint(substitute(e->body, binding), inst, out);
    }
    return;
  }
  out.push_back(e);
}

// ---------------------------------------------------------------------------
// Dependency analysis
// ---------------------------------------------------------------------------

/// Collects the flat cell indices a ground constraint can touch. The result
/// over-approximates: a variable reference whose index cannot be evaluated
/// from parameters alone contributes every cell of that array.
class DepCollector {
 public:
  explicit DepCollector(const Instance& inst)
      : inst_(inst),
        zero_cells_(inst.total_cells, 0),
        none_known_(inst.total_cells, 0),
        ev_(inst, zero_cells_, &none_known_) {}

  void collect(const Expr& e, std::set<std::size_t>& deps) {
    switch (e.kind) {
      case Expr::Kind::IntLit:
        return;
      case Expr::Kind::VarRef: {
        if (const VarInfo* v = inst_.find_var(e.name)) {
          if (e.args.empty()) {
            add_all(*v, deps);
          } else {
            add_indexed(*v, e, deps);
          }
        }
        for (const ExprPtr& idx : e.args) collect(*idx, deps);
        return;
      }
      case Expr::Kind::Bin:
      case Expr::Kind::Un:
      case Expr::Kind::Call:
      case Expr::Kind::ArrayLit:
        for (const ExprPtr& a : e.args) collect(*a, deps);
        return;
      case Expr::Kind::Quant:
      case Expr::Kind::Comprehension: {
        bool enumerable = true;
        try {
          ev_.enumerate(e.gens, 0, [&]() {
            collect(*e.body, deps);
            return true;
          });
        } catch (const Unassigned&) {
          enumerable = false;
        } catch (const EvalError&) {
          enumerable = false;
        }
        if (!enumerable) add_mentioned(e, deps);
        return;
      }
    }
  }

  /// Every cell of every variable mentioned anywhere below `e`.
  void add_mentioned(const Expr& e, std::set<std::size_t>& deps) {
    if (e.kind == Expr::Kind::VarRef) {
      if (const VarInfo* v = inst_.find_var(e.name)) add_all(*v, deps);
    }
    for (const ExprPtr& a : e.args) add_mentioned(*a, deps);
    if (e.body) add_mentioned(*e.body, deps);
    for (const Generator& g : e.gens) {
      if (!g.set.is_named()) {
        add_mentioned(*g.set.lo, deps);
        add_mentioned(*g.set.hi, deps);
      }
      if (g.where) add_mentioned(*g.where, deps);
    }
  }

  Evaluator& evaluator() { return ev_; }

 private:
  static void add_all(const VarInfo& v, std::set<std::size_t>& deps) {
    for (std::size_t k = 0; k < v.cell_count; ++k) deps.insert(v.cell_offset + k);
  }

  void add_indexed(const VarInfo& v, const Expr& e, std::set<std::size_t>& deps) {
    std::vector<long long> indices;
    indices.reserve(e.args.size());
    try {
      for (const ExprPtr& idx : e.args) indices.push_back(ev_.eval_scalar(*idx));
      deps.insert(inst_.cell_index(v, indices));
    } catch (const Unassigned&) {
      add_all(v, deps);
    } catch (const EvalError&) {
      add_all(v, deps);
    }
  }

  const Instance& inst_;
  std::vector<long long> zero_cells_;
  std::vector<char> none_known_;
  Evaluator ev_;
};

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

struct BinaryWatch {
  const Expr* expr;
  std::size_t other;
};

struct Residual {
  const Expr* expr;
  std::size_t unassigned = 0;
};

class Searcher {
 public:
  Searcher(const Instance& inst, const SolveOptions& opts) : inst_(inst), opts_(opts) {}

  SolveResult run() {
    const auto start = std::chrono::steady_clock::now();
    if (opts_.time_budget_s > 0) {
      deadline_ = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(opts_.time_budget_s));
      has_deadline_ = true;
    }

    SolveResult result;
    int stop = 0;
    if (setup()) {
      stop = search();
    }
    result.solutions = std::move(solutions_);
    result.nodes = nodes_;
    result.exhausted = stop == 0;
    if (!result.solutions.empty()) {
      result.status = SolveStatus::Sat;
    } else if (stop == 2) {
      result.status = SolveStatus::Timeout;
    } else {
      result.status = SolveStatus::Unsat;
    }
    result.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

 private:
  bool setup() {
    const std::size_t n = inst_.total_cells;
    cells_.assign(n, 0);
    known_.assign(n, 0);
    domains_.resize(n);
    dom_size_.resize(n);
    for (const VarInfo& v : inst_.vars) {
      for (std::size_t k = 0; k < v.cell_count; ++k) {
        std::vector<long long>& dom = domains_[v.cell_offset + k];
        dom.clear();
        for (long long val = v.dom_lo; val <= v.dom_hi; ++val) dom.push_back(val);
        dom_size_[v.cell_offset + k] = dom.size();
      }
    }
    binary_watch_.assign(n, {});
    alldiff_of_cell_.assign(n, {});
    residual_of_cell_.assign(n, {});

    original_ = inst_.constraints;
    for (const ExprPtr& e : opts_.extra_constraints) original_.push_back(e);
    for (const ExprPtr& e : original_) expand_constraint(e, inst_, ground_);

    DepCollector collector(inst_);
    for (const ExprPtr& e : ground_) {
      std::set<std::size_t> deps;
      collector.collect(*e, deps);

      if (deps.empty()) {
        // Parameter-only constraint: decide it now.
        if (eval_partial(e, inst_, cells_, known_) == TriState::False) return false;
        continue;
      }
      if (classify_alldifferent(*e, collector)) continue;
      if (deps.size() == 1) {
        if (!root_prune(*deps.begin(), *e)) return false;
        continue;
      }
      if (deps.size() == 2) {
        auto it = deps.begin();
        const std::size_t a = *it++;
        const std::size_t b = *it;
        binary_watch_[a].push_back({e.get(), b});
        binary_watch_[b].push_back({e.get(), a});
        continue;
      }
      residuals_.push_back({e.get(), deps.size()});
      const std::size_t rid = residuals_.size() - 1;
      for (std::size_t cell : deps) residual_of_cell_[cell].push_back(rid);
    }
    return true;
  }

  /// Recognizes `alldifferent` over directly addressable variable cells and
  /// registers it as a forward-checking group. Anything else falls back to the
  /// caller's generic classification.
  bool classify_alldifferent(const Expr& e, DepCollector& collector) {
    if (e.kind != Expr::Kind::Call || e.builtin != Builtin::AllDifferent) return false;
    const Expr& arg = *e.args[0];
    std::vector<std::size_t> group;
    Evaluator& ev = collector.evaluator();

    auto add_element = [&](const Expr& elem) -> bool {
      if (elem.kind != Expr::Kind::VarRef) return false;
      const VarInfo* v = inst_.find_var(elem.name);
      if (v == nullptr || elem.args.empty()) return false;
      std::vector<long long> indices;
      try {
        for (const ExprPtr& idx : elem.args) indices.push_back(ev.eval_scalar(*idx));
        group.push_back(inst_.cell_index(*v, indices));
      } catch (const Unassigned&) {
        return false;
      } catch (const EvalError&) {
        return false;
      }
      return true;
    };

    bool ok = true;
    if (arg.kind == Expr::Kind::VarRef && arg.args.empty()) {
      const VarInfo* v = inst_.find_var(arg.name);
      if (v == nullptr) return false;
      for (std::size_t k = 0; k < v->cell_count; ++k) group.push_back(v->cell_offset + k);
    } else if (arg.kind == Expr::Kind::ArrayLit) {
      for (const ExprPtr& elem : arg.args) {
        if (!add_element(*elem)) {
          ok = false;
          break;
        }
      }
    } else if (arg.kind == Expr::Kind::Comprehension) {
      try {
        ev.enumerate(arg.gens, 0, [&]() {
          if (!add_element(*arg.body)) ok = false;
          return ok;
        });
      } catch (const Unassigned&) {
        ok = false;
      } catch (const EvalError&) {
        ok = false;
      }
    } else {
      return false;
    }
    if (!ok) return false;

    alldiff_groups_.push_back(group);
    const std::size_t gid = alldiff_groups_.size() - 1;
    for (std::size_t cell : group) alldiff_of_cell_[cell].push_back(gid);
    return true;
  }

  bool root_prune(std::size_t cell, const Expr& e) {
    known_[cell] = 1;
    std::size_t i = 0;
    while (i < dom_size_[cell]) {
      cells_[cell] = domains_[cell][i];
      TriState t = TriState::True;
      try {
        Evaluator ev(inst_, cells_, &known_);
        t = ev.eval_scalar(e) != 0 ? TriState::True : TriState::False;
      } catch (const Unassigned&) {
        t = TriState::Unknown;  // should not happen: single-cell dependency
      }
      if (t == TriState::False) {
        std::swap(domains_[cell][i], domains_[cell][dom_size_[cell] - 1]);
        --dom_size_[cell];
      } else {
        ++i;
      }
    }
    known_[cell] = 0;
    return dom_size_[cell] > 0;
  }

  void trail_remove_at(std::size_t cell, std::size_t pos) {
    trail_.emplace_back(cell, dom_size_[cell]);
    std::swap(domains_[cell][pos], domains_[cell][dom_size_[cell] - 1]);
    --dom_size_[cell];
  }

  bool remove_value(std::size_t cell, long long v) {
    for (std::size_t i = 0; i < dom_size_[cell]; ++i) {
      if (domains_[cell][i] == v) {
        trail_remove_at(cell, i);
        break;
      }
    }
    return dom_size_[cell] > 0;
  }

  bool sweep(std::size_t target, const Expr& e) {
    const char was_known = known_[target];
    const long long old_value = cells_[target];
    known_[target] = 1;
    std::size_t i = 0;
    bool alive = true;
    while (i < dom_size_[target]) {
      cells_[target] = domains_[target][i];
      bool holds = true;
      try {
        Evaluator ev(inst_, cells_, &known_);
        holds = ev.eval_scalar(e) != 0;
      } catch (const Unassigned&) {
        holds = true;  // conservative: cannot refute this value yet
      }
      if (!holds) {
        trail_remove_at(target, i);
      } else {
        ++i;
      }
    }
    alive = dom_size_[target] > 0;
    known_[target] = was_known;
    cells_[target] = old_value;
    return alive;
  }

  bool propagate(std::size_t cell) {
    // Residual bookkeeping happens first and unconditionally so the caller's
    // undo (which re-increments every watcher of `cell`) stays symmetric.
    for (std::size_t rid : residual_of_cell_[cell]) --residuals_[rid].unassigned;

    for (const BinaryWatch& w : binary_watch_[cell]) {
      if (!sweep(w.other, *w.expr)) return false;
    }
    for (std::size_t gid : alldiff_of_cell_[cell]) {
      for (std::size_t other : alldiff_groups_[gid]) {
        if (other == cell) continue;
        if (!remove_value(other, cells_[cell])) return false;
      }
    }
    for (std::size_t rid : residual_of_cell_[cell]) {
      if (residuals_[rid].unassigned == 0) {
        const TriState t = check_expr(*residuals_[rid].expr);
        if (t == TriState::False) return false;
      }
    }
    return true;
  }

  TriState check_expr(const Expr& e) {
    try {
      Evaluator ev(inst_, cells_, &known_);
      return ev.eval_scalar(e) != 0 ? TriState::True : TriState::False;
    } catch (const Unassigned&) {
      return TriState::Unknown;
    }
  }

  bool timed_out() {
    return has_deadline_ && std::chrono::steady_clock::now() >= deadline_;
  }

  // 0 = subtree exhausted, 1 = solution limit reached, 2 = budget exhausted.
  int search() {
    if (decided_ == inst_.total_cells) {
      return record_leaf();
    }

    std::size_t cell = inst_.total_cells;
    std::size_t best = SIZE_MAX;
    for (std::size_t c = 0; c < inst_.total_cells; ++c) {
      if (!known_[c] && dom_size_[c] < best) {
        best = dom_size_[c];
        cell = c;
      }
    }

    std::vector<long long> values(domains_[cell].begin(),
                                  domains_[cell].begin() + static_cast<long long>(dom_size_[cell]));
    std::sort(values.begin(), values.end());

    for (long long v : values) {
      ++nodes_;
      if ((nodes_ & 1023) == 0 && timed_out()) return 2;

      const std::size_t mark = trail_.size();
      trail_.emplace_back(cell, dom_size_[cell]);
      for (std::size_t i = 0; i < dom_size_[cell]; ++i) {
        if (domains_[cell][i] == v) {
          std::swap(domains_[cell][i], domains_[cell][0]);
          break;
        }
      }
      dom_size_[cell] = 1;
      cells_[cell] = v;
      known_[cell] = 1;
      ++decided_;

      int stop = 0;
      if (propagate(cell)) stop = search();

      known_[cell] = 0;
      --decided_;
      for (std::size_t rid : residual_of_cell_[cell]) ++residuals_[rid].unassigned;
      while (trail_.size() > mark) {
        dom_size_[trail_.back().first] = trail_.back().second;
        trail_.pop_back();
      }
      if (stop != 0) return stop;
    }
    return 0;
  }

  int record_leaf() {
    // Soundness backstop: a candidate leaf must satisfy every original
    // constraint, including ones the classifier kept opaque.
    for (const ExprPtr& e : original_) {
      if (eval_constraint(e, inst_, cells_)) continue;
      return 0;
    }
    solutions_.push_back(inst_.unflatten(cells_));
    if (opts_.solution_limit > 0 && solutions_.size() >= opts_.solution_limit) return 1;
    if (timed_out()) return 2;
    return 0;
  }

  const Instance& inst_;
  const SolveOptions& opts_;

  std::vector<ExprPtr> original_;
  std::vector<ExprPtr> ground_;  // owns every expression the watches point into

  std::vector<std::vector<long long>> domains_;
  std::vector<std::size_t> dom_size_;
  std::vector<long long> cells_;
  std::vector<char> known_;
  std::vector<std::vector<BinaryWatch>> binary_watch_;
  std::vector<std::vector<std::size_t>> alldiff_of_cell_;
  std::vector<std::vector<std::size_t>> alldiff_groups_;
  std::vector<Residual> residuals_;
  std::vector<std::vector<std::size_t>> residual_of_cell_;
  std::vector<std::pair<std::size_t, std::size_t>> trail_;

  std::vector<Solution> solutions_;
  long long nodes_ = 0;
  std::size_t decided_ = 0;
  bool has_deadline_ = false;
  std::chrono::steady_clock::time_point deadline_;
};

}  // namespace

std::vector<ExprPtr> ground_constraints(const Instance& instance,
                                        const std::vector<ExprPtr>& extra_constraints) {
  std::vector<ExprPtr> out;
  for (const ExprPtr& e : instance.constraints) expand_constraint(e, instance, out);
  for (const ExprPtr& e : extra_constraints) expand_constraint(e, instance, out);
  return out;
}

SolveResult solve(const Instance& instance, const SolveOptions& options) {
  Searcher searcher(instance, options);
  return searcher.run();
}

}  // namespace streamforge::minicp

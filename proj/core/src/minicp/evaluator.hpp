#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "streamforge/minicp/ast.hpp"
#include "streamforge/minicp/model.hpp"

namespace streamforge::minicp::detail {

/// Internal signal: evaluation touched a cell whose value is not yet known.
/// Callers that work with partial assignments catch it and defer.
struct Unassigned {};

/// Tree-walking evaluator over a flat cell array. `known == nullptr` means
/// every cell is known. Generator bindings live on an internal stack, so the
/// same object serves quantifier expansion during grounding.
class Evaluator {
 public:
  Evaluator(const Instance& inst, const std::vector<long long>& cells,
            const std::vector<char>* known = nullptr)
      : inst_(inst), cells_(cells), known_(known) {}

  long long eval_scalar(const Expr& e);
  std::vector<long long> eval_list(const Expr& e);

  void push_bind(const std::string& name, long long value) { binds_.emplace_back(name, value); }
  void pop_bind() { binds_.pop_back(); }
  const std::vector<std::pair<std::string, long long>>& binds() const { return binds_; }

  /// Inclusive bounds of a generator set under the current bindings.
  std::pair<long long, long long> set_range(const SetRef& ref);

  /// Runs `fn` once per generator binding that passes the where clauses,
  /// starting from generator `k`. `fn` returning false stops the walk; the
  /// return value is false when stopped early.
  bool enumerate(const std::vector<Generator>& gens, std::size_t k,
                 const std::function<bool()>& fn);

 private:
  long long cell_value(std::size_t index) const;
  long long eval_ref(const Expr& e);
  long long eval_bin(const Expr& e);
  long long eval_call(const Expr& e);
  long long eval_quant(const Expr& e);

  const Instance& inst_;
  const std::vector<long long>& cells_;
  const std::vector<char>* known_;
  std::vector<std::pair<std::string, long long>> binds_;
};

}  // namespace streamforge::minicp::detail

#pragma once

#include <cstddef>
#include <vector>

#include "streamforge/minicp/ast.hpp"
#include "streamforge/minicp/model.hpp"

namespace streamforge::minicp {

struct SolveOptions {
  /// Stop after this many solutions; 0 exhausts the search space.
  std::size_t solution_limit = 1;
  /// Wall-clock budget in seconds; <= 0 means no budget.
  double time_budget_s = 0.0;
  /// Additional constraints conjoined with the instance's own.
  std::vector<ExprPtr> extra_constraints;
};

enum class SolveStatus { Sat, Unsat, Timeout };

struct SolveResult {
  SolveStatus status = SolveStatus::Unsat;
  std::vector<Solution> solutions;
  /// True when the whole search space was explored (so `solutions` is the
  /// complete set under the limit semantics).
  bool exhausted = false;
  long long nodes = 0;
  double elapsed_s = 0.0;
};

/// Depth-first backtracking search: smallest-domain-first variable order with
/// declaration order as the tie-break, ascending value order, forward checking
/// on two-variable constraints and alldifferent. Deterministic.
SolveResult solve(const Instance& instance, const SolveOptions& options = {});

/// Expands top-level `forall` quantifiers and splits conjunctions into a flat
/// constraint list. Exposed for inspection and tests; `solve` uses it.
std::vector<ExprPtr> ground_constraints(const Instance& instance,
                                        const std::vector<ExprPtr>& extra_constraints = {});

}  // namespace streamforge::minicp

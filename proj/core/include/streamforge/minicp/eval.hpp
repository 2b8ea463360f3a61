#pragma once

#include <vector>

#include "streamforge/minicp/ast.hpp"
#include "streamforge/minicp/model.hpp"

namespace streamforge::minicp {

/// Evaluates a bound boolean expression against a full assignment.
bool eval_constraint(const ExprPtr& expr, const Instance& instance, const Solution& solution);
bool eval_constraint(const ExprPtr& expr, const Instance& instance,
                     const std::vector<long long>& cells);

/// Evaluates a bound integer expression (no variable references required to
/// be present; params and literals suffice).
long long eval_int(const ExprPtr& expr, const Instance& instance, const Solution& solution);
long long eval_int(const ExprPtr& expr, const Instance& instance,
                   const std::vector<long long>& cells);

enum class TriState { True, False, Unknown };

/// Evaluates against a partial assignment; Unknown means the result depends
/// on a cell whose `known` flag is unset.
TriState eval_partial(const ExprPtr& expr, const Instance& instance,
                      const std::vector<long long>& cells, const std::vector<char>& known);

}  // namespace streamforge::minicp

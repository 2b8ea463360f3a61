#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamforge/minicp/ast.hpp"
#include "streamforge/minicp/errors.hpp"

namespace streamforge::minicp {

/// Scalar or rectangular integer array, row-major, 1-based indices.
struct ValueArray {
  std::vector<long long> dims;  // empty => scalar
  std::vector<long long> data;  // scalar stored as data[0]

  static ValueArray scalar(long long v) { return {{}, {v}}; }

  bool is_scalar() const { return dims.empty(); }
  std::size_t size() const { return data.size(); }

  long long at(long long i) const;                // 1-based, 1-D
  long long at(long long i, long long j) const;   // 1-based, 2-D

  bool operator==(const ValueArray& other) const = default;
};

/// Variable values keyed by declared name; the solver's output format.
using Solution = std::map<std::string, ValueArray>;

/// Unevaluated parameter value: an expression (scalars) or an array of
/// element expressions with a literal shape.
struct ParamInit {
  std::vector<long long> dims;   // empty => scalar
  std::vector<ExprPtr> elems;    // one expr for a scalar
};

struct ParamDecl {
  std::string name;
  std::optional<ParamInit> init;  // empty => value must come from data
};

struct SetDecl {
  std::string name;
  ExprPtr lo;
  ExprPtr hi;
};

struct VarShapeDecl {
  std::string name;
  std::vector<SetRef> index_sets;  // empty => scalar variable
  ExprPtr dom_lo;                  // null for bool domains
  ExprPtr dom_hi;
  bool is_bool = false;
};

/// Parsed model text: declarations plus constraint expressions, not yet
/// resolved against parameter values.
struct Model {
  std::vector<ParamDecl> params;   // declaration order
  std::vector<SetDecl> sets;
  std::vector<VarShapeDecl> vars;
  std::vector<ExprPtr> constraints;
};

/// Parameter assignments from a data file, in file order.
using DataMap = std::vector<std::pair<std::string, ParamInit>>;

Model parse_model(const std::string& text);
Model parse_model_file(const std::string& path);
DataMap parse_data(const std::string& text);
DataMap parse_data_file(const std::string& path);

/// A resolved variable: concrete index ranges and domain bounds.
struct VarInfo {
  std::string name;
  std::vector<std::pair<long long, long long>> index_ranges;  // inclusive
  long long dom_lo = 0;
  long long dom_hi = 0;
  bool is_bool = false;
  std::size_t cell_offset = 0;  // first cell in the flat cell space
  std::size_t cell_count = 0;

  std::vector<long long> extents() const;
};

/// Model with all parameters evaluated, shapes fixed, and constraints bound.
/// This is what the evaluator and solver operate on.
struct Instance {
  std::map<std::string, ValueArray> params;
  std::map<std::string, std::pair<long long, long long>> sets;
  std::vector<VarInfo> vars;
  std::vector<ExprPtr> constraints;
  std::size_t total_cells = 0;

  const VarInfo* find_var(const std::string& name) const;
  const ValueArray* find_param(const std::string& name) const;

  /// Flat cell index for a variable cell; throws EvalError on range errors.
  std::size_t cell_index(const VarInfo& var, const std::vector<long long>& indices) const;

  std::vector<long long> flatten(const Solution& solution) const;
  Solution unflatten(const std::vector<long long>& cells) const;
};

/// Evaluates parameters (data overrides model defaults), resolves sets and
/// variable shapes, and binds every constraint. Throws BindError or EvalError.
Instance resolve(const Model& model, const DataMap& data = {});

/// Parses a constraint against an already-resolved instance: syntax check,
/// then name resolution and type check. The instance is not modified.
ExprPtr parse_constraint(const std::string& text, const Instance& instance);

/// Name-resolution and Int/Bool type check; throws BindError. The expression
/// must be boolean at the top level when `as_constraint` is set.
void bind_check(const ExprPtr& expr, const Instance& instance, bool as_constraint = true);

}  // namespace streamforge::minicp

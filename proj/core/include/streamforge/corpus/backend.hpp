#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "streamforge/corpus/problem.hpp"

namespace streamforge::corpus {

/// Result of an all-solutions enumeration run.
struct EnumerateOutcome {
  RunStatus status = RunStatus::Error;
  std::vector<minicp::Solution> solutions;
  bool exhausted = false;  ///< true when the whole space was explored
  double elapsed_s = 0.0;
  std::string backend_id;
  unsigned seed = 0;
  std::string diagnostics;
};

/// A solver that can enumerate solutions and run capped single solves.
/// Implementations must be safe to call from multiple threads as long as
/// each call uses its own arguments (no shared mutable solve state).
class SolverBackend {
 public:
  virtual ~SolverBackend() = default;

  virtual std::string id() const = 0;

  /// Enumerates up to `limit` solutions (0 = all) within `budget_s` seconds.
  virtual EnumerateOutcome enumerate(const ProblemSpec& problem,
                                     const std::string& instance_id,
                                     std::size_t limit, double budget_s,
                                     unsigned seed) = 0;

  /// Finds one solution (or proves unsatisfiability) within `budget_s`
  /// seconds, with `extra_constraints` conjoined to the model.  A constraint
  /// the backend cannot accept yields status ERROR with diagnostics, not an
  /// exception.
  virtual SolveOutcome solve_one(const ProblemSpec& problem,
                                 const std::string& instance_id,
                                 const std::vector<std::string>& extra_constraints,
                                 double budget_s, unsigned seed) = 0;
};

/// In-process backend running the bundled constraint solver.  Deterministic:
/// the seed is recorded but does not influence the search.
class BuiltinBackend : public SolverBackend {
 public:
  std::string id() const override { return "builtin"; }
  EnumerateOutcome enumerate(const ProblemSpec& problem,
                             const std::string& instance_id, std::size_t limit,
                             double budget_s, unsigned seed) override;
  SolveOutcome solve_one(const ProblemSpec& problem,
                         const std::string& instance_id,
                         const std::vector<std::string>& extra_constraints,
                         double budget_s, unsigned seed) override;
};

/// Subprocess adapter for a MiniZinc-compatible executable.  The executable
/// path comes from the STREAMFORGE_MZN environment variable (default
/// "minizinc"); `solver_id` is forwarded via --solver.  Extra constraints are
/// appended to a copy of the model file as `constraint <text>;` lines.
class ExternalBackend : public SolverBackend {
 public:
  explicit ExternalBackend(std::string solver_id, std::string work_dir = "");

  std::string id() const override { return "external:" + solver_id_; }
  EnumerateOutcome enumerate(const ProblemSpec& problem,
                             const std::string& instance_id, std::size_t limit,
                             double budget_s, unsigned seed) override;
  SolveOutcome solve_one(const ProblemSpec& problem,
                         const std::string& instance_id,
                         const std::vector<std::string>& extra_constraints,
                         double budget_s, unsigned seed) override;

  /// The executable that will be invoked (resolved from the environment).
  static std::string executable();

 private:
  SolveOutcome run_external(const ProblemSpec& problem,
                            const std::string& instance_id,
                            const std::vector<std::string>& extra_constraints,
                            double budget_s, unsigned seed, bool all_solutions,
                            std::vector<minicp::Solution>* solutions_out,
                            bool* exhausted_out);

  std::string solver_id_;
  std::string work_dir_;
};

/// Parses one solution block of MiniZinc-style output: `name = value;`
/// assignments where value is an integer, true/false, `[..]`,
/// `array1d(lo..hi, [..])` or `array2d(r0..r1, c0..c1, [..])`.
minicp::Solution parse_solution_block(const std::string& block);

}  // namespace streamforge::corpus

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/minicp/model.hpp"

namespace streamforge::corpus {

/// Structural shape of a problem's decision variables.  The encoder and the
/// property catalogs dispatch on this.
enum class ShapeKind {
  Matrix,         ///< one 2-D integer grid (e.g. quasigroup completion)
  Permutation,    ///< one 1-D array holding a permutation of 1..n
  Assignment,     ///< one 2-D entity-by-slot grid of small categorical values
  PackingCoords,  ///< per-item Left/Bottom coordinates on a rectangular deck
};

const char* shape_kind_name(ShapeKind kind);
ShapeKind shape_kind_from_name(const std::string& name);

/// A problem: a model plus named instances split into training and test sets.
///
/// For builtin models `model` holds the model text in the mini constraint
/// language.  For external models `model` holds a path to a MiniZinc file and
/// solving goes through the subprocess adapter.
struct ProblemSpec {
  std::string id;
  ShapeKind kind = ShapeKind::Matrix;
  bool external_model = false;
  std::string model;
  std::vector<std::string> training_instances;
  std::vector<std::string> test_instances;
  /// instance id -> parameter-assignment text ("n = 4; hints = [...];").
  std::map<std::string, std::string> instance_data;

  const std::string& data_for(const std::string& instance_id) const;
};

/// Resolves a builtin model against one named instance's data.
minicp::Instance resolve_instance(const ProblemSpec& problem,
                                  const std::string& instance_id);

enum class RunStatus { Sat, Unsat, Timeout, Error };

const char* run_status_name(RunStatus status);
RunStatus run_status_from_name(const std::string& name);

/// Outcome of a single solve call, as recorded in caches and reports.
struct SolveOutcome {
  RunStatus status = RunStatus::Error;
  double elapsed_s = 0.0;
  std::optional<minicp::Solution> solution;  ///< present iff status == Sat
  std::string backend_id;
  unsigned seed = 0;
  std::string diagnostics;  ///< backend error text; empty on success
};

/// One stored training solution.
struct CorpusSolution {
  std::string instance_id;
  minicp::Solution values;
};

/// Error raised by corpus operations, with a machine-checkable reason.
class CorpusError : public std::runtime_error {
 public:
  enum class Reason {
    UnsatInstance,
    NoSolutions,
    MissingBaseline,
    CapExceedsBaseline,
    BackendFailure,
    BadProblem,
  };

  CorpusError(Reason reason, const std::string& message)
      : std::runtime_error(message), reason_(reason) {}

  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

}  // namespace streamforge::corpus

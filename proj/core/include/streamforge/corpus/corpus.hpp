#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "streamforge/corpus/backend.hpp"
#include "streamforge/corpus/problem.hpp"
#include "streamforge/corpus/store.hpp"

namespace streamforge::corpus {

/// Desk-scale defaults; production runs override these via configuration.
inline constexpr std::size_t kDefaultTargetSolutions = 500;
inline constexpr double kDefaultSolveTimeout = 60.0;

struct TrainingCorpus {
  std::vector<CorpusSolution> solutions;
  bool fewer_than_target = false;  ///< space exhausted below the target
  bool exhausted = false;
  double elapsed_s = 0.0;
};

/// Enumerates up to `target_n` training solutions for one instance, checking
/// each against the base model (builtin models) and checkpointing them to
/// `store` when one is given.  A stored completed enumeration is replayed
/// instead of re-solving.  Throws CorpusError with reason UnsatInstance for
/// unsatisfiable instances and NoSolutions when the budget yields nothing.
TrainingCorpus enumerate_training_corpus(const ProblemSpec& problem,
                                         const std::string& instance_id,
                                         std::size_t target_n, double budget_s,
                                         SolverBackend& backend,
                                         CorpusStore* store = nullptr,
                                         unsigned seed = 1);

/// Returns the cached reference solve for (problem, instance), solving once
/// and recording it on a cache miss.  ERROR outcomes are not cached; they
/// raise CorpusError with reason BackendFailure.
SolveOutcome baseline_solve(const ProblemSpec& problem,
                            const std::string& instance_id, double timeout_s,
                            SolverBackend& backend, BaselineCache& cache,
                            unsigned seed = 1);

/// Solves with one extra constraint under a time cap that may not exceed the
/// cached reference time for the same instance.  The returned elapsed time
/// never exceeds the cap.  Throws CorpusError with reason MissingBaseline
/// when no reference solve is cached and CapExceedsBaseline when the cap is
/// larger than the cached time.
SolveOutcome streamlined_solve(const ProblemSpec& problem,
                               const std::string& instance_id,
                               const std::string& extra_constraint,
                               double cap_s, SolverBackend& backend,
                               const BaselineCache& cache, unsigned seed = 1);

}  // namespace streamforge::corpus

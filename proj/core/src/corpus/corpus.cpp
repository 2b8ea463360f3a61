#include "streamforge/corpus/corpus.hpp"

#include <algorithm>

#include "streamforge/minicp/eval.hpp"

namespace streamforge::corpus {

namespace {

/// Verifies a solution against the base model of a builtin problem.  The
/// check is skipped for external models, whose constraints live outside the
/// in-process language.
void check_ingested(const ProblemSpec& problem, const minicp::Instance* instance,
                    const minicp::Solution& solution,
                    const std::string& instance_id) {
  if (instance == nullptr) return;
  for (const auto& constraint : instance->constraints) {
    if (!minicp::eval_constraint(constraint, *instance, solution)) {
      throw CorpusError(CorpusError::Reason::BackendFailure,
                        "solution for problem '" + problem.id + "' instance '" +
                            instance_id + "' violates the base constraints");
    }
  }
}

}  // namespace

TrainingCorpus enumerate_training_corpus(const ProblemSpec& problem,
                                         const std::string& instance_id,
                                         std::size_t target_n, double budget_s,
                                         SolverBackend& backend,
                                         CorpusStore* store, unsigned seed) {
  if (target_n < 1) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "target solution count must be at least 1");
  }
  if (std::find(problem.training_instances.begin(),
                problem.training_instances.end(),
                instance_id) == problem.training_instances.end()) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "'" + instance_id + "' is not a training instance of '" +
                          problem.id + "'");
  }

  std::optional<minicp::Instance> instance;
  if (!problem.external_model) {
    instance = resolve_instance(problem, instance_id);
  }
  const minicp::Instance* check = instance ? &*instance : nullptr;

  TrainingCorpus corpus;
  if (store != nullptr && store->has_complete(problem.id, instance_id)) {
    std::vector<minicp::Solution> stored = store->load(problem.id, instance_id);
    if (stored.empty()) {
      throw CorpusError(CorpusError::Reason::NoSolutions,
                        "stored corpus for '" + instance_id + "' is empty");
    }
    for (auto& sol : stored) {
      check_ingested(problem, check, sol, instance_id);
      corpus.solutions.push_back({instance_id, std::move(sol)});
    }
    corpus.exhausted = store->stored_exhausted(problem.id, instance_id);
    corpus.fewer_than_target =
        corpus.exhausted && corpus.solutions.size() < target_n;
    return corpus;
  }

  EnumerateOutcome outcome =
      backend.enumerate(problem, instance_id, target_n, budget_s, seed);
  if (outcome.status == RunStatus::Error) {
    throw CorpusError(CorpusError::Reason::BackendFailure,
                      "enumeration failed for '" + instance_id +
                          "': " + outcome.diagnostics);
  }
  if (outcome.status == RunStatus::Unsat) {
    throw CorpusError(CorpusError::Reason::UnsatInstance,
                      "instance unsatisfiable: '" + instance_id +
                          "' of problem '" + problem.id + "'");
  }
  if (outcome.solutions.empty()) {
    throw CorpusError(CorpusError::Reason::NoSolutions,
                      "no solutions found for '" + instance_id +
                          "' within the enumeration budget");
  }

  corpus.elapsed_s = outcome.elapsed_s;
  corpus.exhausted = outcome.exhausted;
  corpus.fewer_than_target =
      outcome.exhausted && outcome.solutions.size() < target_n;
  for (auto& sol : outcome.solutions) {
    check_ingested(problem, check, sol, instance_id);
    if (store != nullptr) store->append(problem.id, instance_id, sol);
    corpus.solutions.push_back({instance_id, std::move(sol)});
  }
  if (store != nullptr) {
    store->mark_complete(problem.id, instance_id, corpus.exhausted);
  }
  return corpus;
}

SolveOutcome baseline_solve(const ProblemSpec& problem,
                            const std::string& instance_id, double timeout_s,
                            SolverBackend& backend, BaselineCache& cache,
                            unsigned seed) {
  if (auto cached = cache.find(problem.id, instance_id)) {
    return *cached;
  }
  SolveOutcome outcome =
      backend.solve_one(problem, instance_id, {}, timeout_s, seed);
  if (outcome.status == RunStatus::Error) {
    throw CorpusError(CorpusError::Reason::BackendFailure,
                      "reference solve failed for '" + instance_id +
                          "': " + outcome.diagnostics);
  }
  cache.put(problem.id, instance_id, outcome);
  return outcome;
}

SolveOutcome streamlined_solve(const ProblemSpec& problem,
                               const std::string& instance_id,
                               const std::string& extra_constraint,
                               double cap_s, SolverBackend& backend,
                               const BaselineCache& cache, unsigned seed) {
  std::optional<SolveOutcome> baseline = cache.find(problem.id, instance_id);
  if (!baseline.has_value()) {
    throw CorpusError(CorpusError::Reason::MissingBaseline,
                      "no baseline cached for '" + instance_id +
                          "'; run the reference solve first");
  }
  if (cap_s > baseline->elapsed_s) {
    throw CorpusError(CorpusError::Reason::CapExceedsBaseline,
                      "cap exceeds baseline contract: requested " +
                          std::to_string(cap_s) + " s but the baseline took " +
                          std::to_string(baseline->elapsed_s) + " s");
  }
  SolveOutcome outcome = backend.solve_one(problem, instance_id,
                                           {extra_constraint}, cap_s, seed);
  if (outcome.elapsed_s > cap_s) {
    // Scheduling slack may push the measured time past the cap; the recorded
    // time never exceeds it.
    outcome.elapsed_s = cap_s;
  }
  return outcome;
}

}  // namespace streamforge::corpus

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/minicp/model.hpp"
#include "streamforge/synth/synth.hpp"

namespace streamforge::valid {

class ValidError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Phase { Train, Test };
enum class Status { Sat, Unsat, Timeout, Error };

const char* phase_name(Phase phase);
const char* status_name(Status status);
std::optional<Phase> phase_from_name(const std::string& name);
std::optional<Status> status_from_name(const std::string& name);

/// Outcome of one capped (candidate, instance) solve. The elapsed time is
/// clamped to the baseline: a streamliner slower than baseline is not useful,
/// so every solve is budgeted at t_b.
struct ValidationRecord {
  std::string candidate_id;
  std::string instance_id;
  Phase phase = Phase::Train;
  Status status = Status::Error;
  double elapsed_s = 0.0;   ///< t_c(i), <= baseline_s
  double baseline_s = 0.0;  ///< t_b(i), > 0
  unsigned seed = 0;

  bool operator==(const ValidationRecord&) const = default;
};

/// Runs one candidate against one instance under a time budget.
/// Implementations must be safe to call from multiple threads.
struct SolveOutcome {
  Status status = Status::Error;
  double elapsed_s = 0.0;
};

class CandidateSolver {
 public:
  virtual ~CandidateSolver() = default;
  virtual SolveOutcome solve(const synth::CandidateStreamliner& candidate,
                             const std::string& instance_id,
                             double budget_s) = 0;
};

/// Solves with the built-in backtracking search: the candidate constraint is
/// conjoined with the instance, first solution wins, budget enforced.
/// Unparseable or unevaluable candidates report Status::Error.
class MinicpCandidateSolver : public CandidateSolver {
 public:
  explicit MinicpCandidateSolver(
      std::map<std::string, const minicp::Instance*> instances);
  SolveOutcome solve(const synth::CandidateStreamliner& candidate,
                     const std::string& instance_id,
                     double budget_s) override;

 private:
  std::map<std::string, const minicp::Instance*> instances_;
};

struct ValidationConfig {
  unsigned seed = 0;
  int parallelism = 4;          ///< bounded width of the solve pool
  std::string checkpoint_path;  ///< empty disables checkpointing
};

/// Stable per-candidate ids for a validation run: the descriptor, with
/// "_2", "_3", ... appended on collision, in input order.
std::vector<std::string> candidate_ids(
    const std::vector<synth::CandidateStreamliner>& pool);

struct TrainValidation {
  std::vector<ValidationRecord> records;  ///< candidate-major, instance-minor
  std::vector<synth::CandidateStreamliner> survivors;
  std::map<std::string, double> scores;  ///< candidate id -> training savings
};

/// Phase 1: every (candidate, instance) pair is solved with cap t_b(i).
/// A candidate survives when some instance returns SAT strictly under
/// baseline; its score is the summed time saved over SAT instances.
/// Completed pairs found in the checkpoint are reused, never re-run; fresh
/// results are appended incrementally so an interrupted run resumes.
/// Throws before any solve when a baseline is missing or non-positive.
TrainValidation validate_phase_train(
    const std::vector<synth::CandidateStreamliner>& pool,
    const std::vector<std::string>& instance_ids,
    const std::map<std::string, double>& baselines, CandidateSolver& solver,
    const ValidationConfig& config);

/// Phase 2: the surviving candidates measured once on the held-out test
/// instances, same capping and checkpoint contract, no filtering.
std::vector<ValidationRecord> validate_phase_test(
    const std::vector<synth::CandidateStreamliner>& pool,
    const std::vector<std::string>& instance_ids,
    const std::map<std::string, double>& baselines, CandidateSolver& solver,
    const ValidationConfig& config);

/// t_b / t_c for a SAT record (denominator floored at 1 ms); nullopt for
/// anything that did not return SAT.
std::optional<double> per_instance_speedup(const ValidationRecord& record);

struct GeomeanSpeedup {
  bool defined = false;
  double geomean = 0.0;
  int retained = 0;  ///< SAT records contributing; reported alongside, always
  double max_speedup = 0.0;
};

/// Geometric mean of per-instance speedups over one candidate's SAT records.
GeomeanSpeedup geomean_speedup(const std::vector<ValidationRecord>& records);

/// Oracle savings of the single fastest SAT pool member per instance:
/// (sum t_b - sum min(t_b, fastest t_c)) / sum t_b. No runtime selection
/// over the same records can beat it.
double pool_ceiling(const std::vector<ValidationRecord>& records,
                    const std::vector<std::string>& instance_ids,
                    const std::map<std::string, double>& baselines);

struct CandidateMetrics {
  std::string candidate_id;
  int sat = 0;
  int unsat = 0;
  GeomeanSpeedup speedup;
};

struct InstanceWinner {
  std::string instance_id;
  std::string winner_id;  ///< fastest SAT candidate, or "baseline"
  double baseline_s = 0.0;
  double best_s = 0.0;  ///< min(t_b, fastest SAT t_c)
};

struct MetricsReport {
  std::vector<CandidateMetrics> candidates;  ///< by descending SAT count
  double ceiling = 0.0;
  std::vector<InstanceWinner> winners;  ///< in instance order
  /// Race results, filled by the portfolio stage when one was deployed.
  std::optional<double> wall_clock_savings;
  std::optional<double> cpu_adjusted_savings;
};

/// Per-candidate aggregates, the pool ceiling, and the instance winner
/// table over one phase's records.
MetricsReport build_metrics(const std::vector<ValidationRecord>& records,
                            const std::vector<std::string>& instance_ids,
                            const std::map<std::string, double>& baselines);

/// One JSON record per line; the checkpoint and archive format.
void save_records(const std::string& path,
                  const std::vector<ValidationRecord>& records);
std::vector<ValidationRecord> load_records(const std::string& path);

/// Flat TSV: candidate, instance, phase, status, elapsed_s, baseline_s, seed.
std::string records_table(const std::vector<ValidationRecord>& records);

/// Readable metrics summary for the CLI.
std::string metrics_table(const MetricsReport& report);

}  // namespace streamforge::valid

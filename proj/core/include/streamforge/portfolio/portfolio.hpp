#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/valid/valid.hpp"

namespace streamforge::portfolio {

class PortfolioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Family of a candidate id: trailing tokens that are integers or
/// aggressiveness words (conservative, tight, tightfit, aggressive, loose)
/// are stripped; at least one token is always retained.
std::string derive_family(const std::string& descriptor);

/// Family tag for every candidate id, in one pass.
std::map<std::string, std::string> tag_families(
    const std::vector<std::string>& candidate_ids);

struct ScoredCandidate {
  std::string candidate_id;
  double score = 0.0;  ///< training-set savings
};

enum class SelectionRule { SimpleTopK, FamilyBudget };

/// One race lane: its members run sequentially in order.
struct FamilyLane {
  std::string family;
  std::vector<std::string> members;

  bool operator==(const FamilyLane&) const = default;
};

struct PortfolioPlan {
  SelectionRule rule = SelectionRule::FamilyBudget;
  int k = 0;  ///< requested lanes; fewer when fewer families exist
  int m = 0;  ///< requested members per lane; 0 means "all"
  std::vector<FamilyLane> lanes;  ///< ranked best family first

  bool operator==(const PortfolioPlan&) const = default;
};

/// Top-k candidates by score (ties by id), one lane each with the full
/// baseline budget.
PortfolioPlan select_simple_top_k(const std::vector<ScoredCandidate>& scored,
                                  int k);

/// Families ranked by their best member's score; each family keeps its top-m
/// members by score. Ties break by candidate id. Fewer than k families means
/// all of them race. m = 0 keeps every member ("all").
PortfolioPlan select_family_budget(const std::vector<ScoredCandidate>& scored,
                                   int k, int m);

/// Recorded (candidate, instance) outcomes addressable by pair. Duplicate
/// pairs keep the first record. Holds pointers into the given vector, which
/// must outlive the index.
class RecordIndex {
 public:
  explicit RecordIndex(const std::vector<valid::ValidationRecord>& records);
  /// Null when the pair was never validated.
  const valid::ValidationRecord* find(const std::string& candidate_id,
                                      const std::string& instance_id) const;

 private:
  std::map<std::string, const valid::ValidationRecord*> by_pair_;
};

struct RaceOptions {
  /// A member failing before its slot expires hands the remaining slot time
  /// to the rest of its lane (default). When false the lane always consumes
  /// the full slot per member.
  bool free_slot_on_fast_failure = true;
};

/// One instance's simulated race outcome.
struct RaceRow {
  std::string instance_id;
  std::string winner_id;  ///< candidate id, or "baseline"
  double t_winner = 0.0;  ///< wall-clock of the first SAT return, <= t_b
  double baseline_s = 0.0;
  std::vector<double> lane_contributions;  ///< aligned with plan.lanes
  double cpu_charge = 0.0;  ///< (lanes + 1) * t_winner
};

/// Replays the race for one instance from recorded solve outcomes. Each lane
/// runs its members sequentially with slot t_b / m (the full t_b under
/// SimpleTopK); a member whose recorded SAT time fits its slot wins the lane
/// at lane-elapsed + t_c; failures advance the lane; a lane that never
/// succeeds contributes t_b. The instance winner is the earliest lane SAT,
/// or baseline on any tie. Missing records are a hard error.
RaceRow simulate_race(const PortfolioPlan& plan, const RecordIndex& records,
                      const std::string& instance_id, double baseline_s,
                      const RaceOptions& options = {});

/// The race on every instance, in instance order.
std::vector<RaceRow> race_all(const PortfolioPlan& plan,
                              const RecordIndex& records,
                              const std::vector<std::string>& instance_ids,
                              const std::map<std::string, double>& baselines,
                              const RaceOptions& options = {});

struct Savings {
  double wall_clock = 0.0;    ///< (sum t_b - sum t_winner) / sum t_b
  double cpu_adjusted = 0.0;  ///< (sum t_b - sum cpu_charge) / sum t_b
};

/// Both savings fractions over the full race; throws when the baselines sum
/// to zero. CPU-adjusted may be negative.
Savings portfolio_savings(const std::vector<RaceRow>& rows);

struct SweepCell {
  int k = 0;
  int m = 0;  ///< 0 means "all"
  Savings savings;
};

/// One family-budget race per (k, m) pair over the same records.
std::vector<SweepCell> sweep_km(const std::vector<ScoredCandidate>& scored,
                                const RecordIndex& records,
                                const std::vector<std::string>& instance_ids,
                                const std::map<std::string, double>& baselines,
                                const std::vector<int>& ks,
                                const std::vector<int>& ms,
                                const RaceOptions& options = {});

/// Lane listing for logs and reports.
std::string plan_summary(const PortfolioPlan& plan);

/// Per-instance winner table: instance, winner, t_winner, baseline.
std::string race_table(const std::vector<RaceRow>& rows);

/// (k, m) grid with "WC / CPU" cells.
std::string sweep_table(const std::vector<SweepCell>& cells);

}  // namespace streamforge::portfolio

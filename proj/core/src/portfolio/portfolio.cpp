#include "streamforge/portfolio/portfolio.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

namespace streamforge::portfolio {

namespace {

const char* kBaselineId = "baseline";

bool all_digits(const std::string& token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

bool aggressiveness_word(const std::string& token) {
  return token == "conservative" || token == "tight" || token == "tightfit" ||
         token == "aggressive" || token == "loose";
}

std::vector<std::string> split_tokens(const std::string& descriptor) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : descriptor) {
    if (c == '_') {
      tokens.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  tokens.push_back(current);
  return tokens;
}

std::string pair_key(const std::string& candidate, const std::string& instance) {
  return candidate + '\t' + instance;
}

std::string fixed(double value, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

/// Scored candidates ordered best first, ties by id.
std::vector<ScoredCandidate> ranked(std::vector<ScoredCandidate> scored) {
  std::sort(scored.begin(), scored.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.candidate_id < b.candidate_id;
            });
  return scored;
}

}  // namespace

std::string derive_family(const std::string& descriptor) {
  if (descriptor.empty()) return descriptor;
  std::vector<std::string> tokens = split_tokens(descriptor);
  while (tokens.size() > 1 &&
         (all_digits(tokens.back()) || aggressiveness_word(tokens.back()))) {
    tokens.pop_back();
  }
  std::string family = tokens.front();
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    family += '_';
    family += tokens[i];
  }
  return family;
}

std::map<std::string, std::string> tag_families(
    const std::vector<std::string>& candidate_ids) {
  std::map<std::string, std::string> tags;
  for (const auto& id : candidate_ids) tags[id] = derive_family(id);
  return tags;
}

PortfolioPlan select_simple_top_k(const std::vector<ScoredCandidate>& scored,
                                  int k) {
  if (k < 1) throw PortfolioError("k must be at least 1");
  PortfolioPlan plan;
  plan.rule = SelectionRule::SimpleTopK;
  plan.k = k;
  plan.m = 1;
  for (const auto& candidate : ranked(scored)) {
    if (static_cast<int>(plan.lanes.size()) == k) break;
    plan.lanes.push_back({candidate.candidate_id, {candidate.candidate_id}});
  }
  return plan;
}

PortfolioPlan select_family_budget(const std::vector<ScoredCandidate>& scored,
                                   int k, int m) {
  if (k < 1) throw PortfolioError("k must be at least 1");
  if (m < 0) throw PortfolioError("m must be at least 1, or 0 for all");
  PortfolioPlan plan;
  plan.rule = SelectionRule::FamilyBudget;
  plan.k = k;
  plan.m = m;

  // Candidates arrive best-first, so each family's member list is already
  // ordered and the first member carries the family's rank score.
  std::vector<FamilyLane> lanes;
  std::map<std::string, std::size_t> lane_of;
  std::vector<double> best_score;
  for (const auto& candidate : ranked(scored)) {
    const std::string family = derive_family(candidate.candidate_id);
    auto [it, inserted] = lane_of.try_emplace(family, lanes.size());
    if (inserted) {
      lanes.push_back({family, {}});
      best_score.push_back(candidate.score);
    }
    lanes[it->second].members.push_back(candidate.candidate_id);
  }

  std::vector<std::size_t> order(lanes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (best_score[a] != best_score[b]) return best_score[a] > best_score[b];
    return lanes[a].members.front() < lanes[b].members.front();
  });

  for (std::size_t index : order) {
    if (static_cast<int>(plan.lanes.size()) == k) break;
    FamilyLane lane = lanes[index];
    if (m > 0 && static_cast<int>(lane.members.size()) > m) {
      lane.members.resize(m);
    }
    plan.lanes.push_back(std::move(lane));
  }
  return plan;
}

RecordIndex::RecordIndex(const std::vector<valid::ValidationRecord>& records) {
  for (const auto& record : records) {
    by_pair_.emplace(pair_key(record.candidate_id, record.instance_id),
                     &record);
  }
}

const valid::ValidationRecord* RecordIndex::find(
    const std::string& candidate_id, const std::string& instance_id) const {
  auto it = by_pair_.find(pair_key(candidate_id, instance_id));
  return it == by_pair_.end() ? nullptr : it->second;
}

RaceRow simulate_race(const PortfolioPlan& plan, const RecordIndex& records,
                      const std::string& instance_id, double baseline_s,
                      const RaceOptions& options) {
  if (!(baseline_s > 0.0)) {
    throw PortfolioError("baseline for instance '" + instance_id +
                         "' must be positive");
  }
  RaceRow row;
  row.instance_id = instance_id;
  row.winner_id = kBaselineId;
  row.t_winner = baseline_s;
  row.baseline_s = baseline_s;

  for (const FamilyLane& lane : plan.lanes) {
    const std::size_t effective_m =
        plan.rule == SelectionRule::SimpleTopK
            ? 1
            : (plan.m == 0 ? lane.members.size() : plan.m);
    const double slot = baseline_s / static_cast<double>(effective_m);

    double elapsed = 0.0;
    double contribution = baseline_s;  // a lane with no success
    std::string lane_winner;
    for (const std::string& member : lane.members) {
      const valid::ValidationRecord* record =
          records.find(member, instance_id);
      if (record == nullptr) {
        throw PortfolioError("no validation record for candidate '" + member +
                             "' on instance '" + instance_id + "'");
      }
      const double t_c = record->elapsed_s;
      if (record->status == valid::Status::Sat && t_c <= slot) {
        contribution = std::min(baseline_s, elapsed + t_c);
        lane_winner = member;
        break;
      }
      // No answer inside the slot: the lane moves on, either as soon as the
      // member failed or after the full slot expires.
      if (t_c <= slot && options.free_slot_on_fast_failure) {
        elapsed += t_c;
      } else {
        elapsed += slot;
      }
    }
    row.lane_contributions.push_back(contribution);
    if (!lane_winner.empty() && contribution < row.t_winner) {
      row.t_winner = contribution;
      row.winner_id = lane_winner;
    }
  }
  row.cpu_charge =
      static_cast<double>(plan.lanes.size() + 1) * row.t_winner;
  return row;
}

std::vector<RaceRow> race_all(const PortfolioPlan& plan,
                              const RecordIndex& records,
                              const std::vector<std::string>& instance_ids,
                              const std::map<std::string, double>& baselines,
                              const RaceOptions& options) {
  std::vector<RaceRow> rows;
  rows.reserve(instance_ids.size());
  for (const auto& instance : instance_ids) {
    auto it = baselines.find(instance);
    if (it == baselines.end()) {
      throw PortfolioError("missing baseline for instance '" + instance + "'");
    }
    rows.push_back(
        simulate_race(plan, records, instance, it->second, options));
  }
  return rows;
}

Savings portfolio_savings(const std::vector<RaceRow>& rows) {
  double baseline_total = 0.0;
  double winner_total = 0.0;
  double charge_total = 0.0;
  for (const auto& row : rows) {
    baseline_total += row.baseline_s;
    winner_total += row.t_winner;
    charge_total += row.cpu_charge;
  }
  if (!(baseline_total > 0.0)) {
    throw PortfolioError("baselines sum to zero; savings are undefined");
  }
  Savings savings;
  savings.wall_clock = (baseline_total - winner_total) / baseline_total;
  savings.cpu_adjusted = (baseline_total - charge_total) / baseline_total;
  return savings;
}

std::vector<SweepCell> sweep_km(const std::vector<ScoredCandidate>& scored,
                                const RecordIndex& records,
                                const std::vector<std::string>& instance_ids,
                                const std::map<std::string, double>& baselines,
                                const std::vector<int>& ks,
                                const std::vector<int>& ms,
                                const RaceOptions& options) {
  std::vector<SweepCell> cells;
  cells.reserve(ks.size() * ms.size());
  for (int k : ks) {
    for (int m : ms) {
      const PortfolioPlan plan = select_family_budget(scored, k, m);
      const auto rows =
          race_all(plan, records, instance_ids, baselines, options);
      cells.push_back({k, m, portfolio_savings(rows)});
    }
  }
  return cells;
}

std::string plan_summary(const PortfolioPlan& plan) {
  std::ostringstream out;
  out << "rule="
      << (plan.rule == SelectionRule::SimpleTopK ? "simple_top_k"
                                                 : "family_budget")
      << " k=" << plan.k << " m=";
  if (plan.m == 0) {
    out << "all";
  } else {
    out << plan.m;
  }
  out << " lanes=" << plan.lanes.size() << '\n';
  for (std::size_t i = 0; i < plan.lanes.size(); ++i) {
    out << "  lane " << (i + 1) << ": " << plan.lanes[i].family
        << "  members:";
    for (const auto& member : plan.lanes[i].members) out << ' ' << member;
    out << '\n';
  }
  return out.str();
}

std::string race_table(const std::vector<RaceRow>& rows) {
  std::ostringstream out;
  out << "instance\twinner\tt_winner\tbaseline\tcpu_charge\n";
  for (const auto& row : rows) {
    out << row.instance_id << '\t' << row.winner_id << '\t'
        << fixed(row.t_winner, 6) << '\t' << fixed(row.baseline_s, 6) << '\t'
        << fixed(row.cpu_charge, 6) << '\n';
  }
  return out.str();
}

std::string sweep_table(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "k\tm\twall_clock\tcpu_adjusted\n";
  for (const auto& cell : cells) {
    out << cell.k << '\t';
    if (cell.m == 0) {
      out << "all";
    } else {
      out << cell.m;
    }
    out << '\t' << fixed(cell.savings.wall_clock, 4) << '\t'
        << fixed(cell.savings.cpu_adjusted, 4) << '\n';
  }
  return out.str();
}

}  // namespace streamforge::portfolio

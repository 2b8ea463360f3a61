#include "streamforge/valid/valid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "streamforge/minicp/solve.hpp"

namespace streamforge::valid {

namespace {

using nlohmann::json;

constexpr double kTimerFloorS = 0.001;  ///< timer resolution floor for ratios

std::string pair_key(const std::string& candidate, const std::string& instance,
                     Phase phase) {
  return candidate + '\t' + instance + '\t' + phase_name(phase);
}

json record_to_json(const ValidationRecord& record) {
  return json{{"candidate", record.candidate_id},
              {"instance", record.instance_id},
              {"phase", phase_name(record.phase)},
              {"status", status_name(record.status)},
              {"elapsed_s", record.elapsed_s},
              {"baseline_s", record.baseline_s},
              {"seed", record.seed}};
}

std::optional<ValidationRecord> record_from_line(const std::string& line) {
  if (line.find_first_not_of(" \t\r") == std::string::npos) return std::nullopt;
  json parsed = json::parse(line, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  if (!parsed.contains("candidate") || !parsed["candidate"].is_string() ||
      !parsed.contains("instance") || !parsed["instance"].is_string() ||
      !parsed.contains("phase") || !parsed["phase"].is_string() ||
      !parsed.contains("status") || !parsed["status"].is_string() ||
      !parsed.contains("elapsed_s") || !parsed["elapsed_s"].is_number() ||
      !parsed.contains("baseline_s") || !parsed["baseline_s"].is_number() ||
      !parsed.contains("seed") || !parsed["seed"].is_number()) {
    return std::nullopt;
  }
  auto phase = phase_from_name(parsed["phase"].get<std::string>());
  auto status = status_from_name(parsed["status"].get<std::string>());
  if (!phase || !status) return std::nullopt;
  ValidationRecord record;
  record.candidate_id = parsed["candidate"].get<std::string>();
  record.instance_id = parsed["instance"].get<std::string>();
  record.phase = *phase;
  record.status = *status;
  record.elapsed_s = parsed["elapsed_s"].get<double>();
  record.baseline_s = parsed["baseline_s"].get<double>();
  record.seed = parsed["seed"].get<unsigned>();
  return record;
}

/// Earlier results keyed by (candidate, instance, phase); the first
/// occurrence wins so a re-run never changes what a resumed line says.
std::map<std::string, ValidationRecord> load_checkpoint(
    const std::string& path) {
  std::map<std::string, ValidationRecord> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) return out;  // nothing recorded yet
  std::string line;
  while (std::getline(in, line)) {
    auto record = record_from_line(line);
    if (!record) continue;  // torn or foreign line; re-run that pair
    out.emplace(
        pair_key(record->candidate_id, record->instance_id, record->phase),
        *record);
  }
  return out;
}

void check_baselines(const std::vector<std::string>& instance_ids,
                     const std::map<std::string, double>& baselines) {
  for (const auto& instance : instance_ids) {
    auto it = baselines.find(instance);
    if (it == baselines.end()) {
      throw ValidError("missing baseline for instance '" + instance + "'");
    }
    if (!(it->second > 0.0)) {
      throw ValidError("baseline for instance '" + instance +
                       "' must be positive");
    }
  }
}

/// Solves every (candidate, instance) pair not already in the checkpoint,
/// bounded-width, and returns the full grid candidate-major.
std::vector<ValidationRecord> run_phase(
    const std::vector<synth::CandidateStreamliner>& pool,
    const std::vector<std::string>& instance_ids,
    const std::map<std::string, double>& baselines, CandidateSolver& solver,
    const ValidationConfig& config, Phase phase) {
  check_baselines(instance_ids, baselines);
  const auto ids = candidate_ids(pool);
  const auto done = load_checkpoint(config.checkpoint_path);

  const std::size_t columns = instance_ids.size();
  std::vector<std::optional<ValidationRecord>> grid(pool.size() * columns);
  struct WorkItem {
    std::size_t slot;
    std::size_t candidate;
    std::size_t instance;
  };
  std::vector<WorkItem> work;
  for (std::size_t c = 0; c < pool.size(); ++c) {
    for (std::size_t i = 0; i < columns; ++i) {
      const std::size_t slot = c * columns + i;
      auto it = done.find(pair_key(ids[c], instance_ids[i], phase));
      if (it != done.end()) {
        grid[slot] = it->second;
      } else {
        work.push_back({slot, c, i});
      }
    }
  }

  std::ofstream checkpoint;
  if (!config.checkpoint_path.empty() && !work.empty()) {
    checkpoint.open(config.checkpoint_path, std::ios::app);
    if (!checkpoint) {
      throw ValidError("cannot append to checkpoint '" +
                       config.checkpoint_path + "'");
    }
  }

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= work.size()) break;
      const WorkItem& item = work[index];
      const std::string& instance = instance_ids[item.instance];
      const double budget = baselines.at(instance);
      SolveOutcome outcome;
      try {
        outcome = solver.solve(pool[item.candidate], instance, budget);
      } catch (const std::exception&) {
        outcome = {Status::Error, 0.0};
      }
      ValidationRecord record;
      record.candidate_id = ids[item.candidate];
      record.instance_id = instance;
      record.phase = phase;
      record.status = outcome.status;
      record.elapsed_s = std::clamp(outcome.elapsed_s, 0.0, budget);
      record.baseline_s = budget;
      record.seed = config.seed;
      std::lock_guard<std::mutex> lock(mutex);
      grid[item.slot] = record;
      if (checkpoint.is_open()) {
        checkpoint << record_to_json(record).dump() << '\n';
        checkpoint.flush();
      }
    }
  };

  const std::size_t width = std::min<std::size_t>(
      std::max(1, config.parallelism), std::max<std::size_t>(1, work.size()));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(width);
    for (std::size_t t = 0; t < width; ++t) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
  }

  std::vector<ValidationRecord> records;
  records.reserve(grid.size());
  for (auto& cell : grid) records.push_back(std::move(*cell));
  return records;
}

std::string fixed(double value, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

}  // namespace

const char* phase_name(Phase phase) {
  return phase == Phase::Train ? "train" : "test";
}

const char* status_name(Status status) {
  switch (status) {
    case Status::Sat:
      return "SAT";
    case Status::Unsat:
      return "UNSAT";
    case Status::Timeout:
      return "TIMEOUT";
    case Status::Error:
      return "ERROR";
  }
  return "ERROR";
}

std::optional<Phase> phase_from_name(const std::string& name) {
  if (name == "train") return Phase::Train;
  if (name == "test") return Phase::Test;
  return std::nullopt;
}

std::optional<Status> status_from_name(const std::string& name) {
  if (name == "SAT") return Status::Sat;
  if (name == "UNSAT") return Status::Unsat;
  if (name == "TIMEOUT") return Status::Timeout;
  if (name == "ERROR") return Status::Error;
  return std::nullopt;
}

MinicpCandidateSolver::MinicpCandidateSolver(
    std::map<std::string, const minicp::Instance*> instances)
    : instances_(std::move(instances)) {}

SolveOutcome MinicpCandidateSolver::solve(
    const synth::CandidateStreamliner& candidate,
    const std::string& instance_id, double budget_s) {
  auto it = instances_.find(instance_id);
  if (it == instances_.end() || it->second == nullptr) {
    return {Status::Error, 0.0};
  }
  try {
    minicp::SolveOptions options;
    options.solution_limit = 1;
    options.time_budget_s = budget_s;
    options.extra_constraints.push_back(
        minicp::parse_constraint(candidate.text, *it->second));
    const minicp::SolveResult result = minicp::solve(*it->second, options);
    Status status = Status::Error;
    switch (result.status) {
      case minicp::SolveStatus::Sat:
        status = Status::Sat;
        break;
      case minicp::SolveStatus::Unsat:
        status = Status::Unsat;
        break;
      case minicp::SolveStatus::Timeout:
        status = Status::Timeout;
        break;
    }
    return {status, result.elapsed_s};
  } catch (const std::exception&) {
    return {Status::Error, 0.0};
  }
}

std::vector<std::string> candidate_ids(
    const std::vector<synth::CandidateStreamliner>& pool) {
  std::vector<std::string> out;
  out.reserve(pool.size());
  std::set<std::string> taken;
  for (const auto& candidate : pool) {
    std::string base =
        candidate.descriptor.empty() ? "candidate" : candidate.descriptor;
    std::string id = base;
    for (int suffix = 2; !taken.insert(id).second; ++suffix) {
      id = base + "_" + std::to_string(suffix);
    }
    out.push_back(id);
  }
  return out;
}

TrainValidation validate_phase_train(
    const std::vector<synth::CandidateStreamliner>& pool,
    const std::vector<std::string>& instance_ids,
    const std::map<std::string, double>& baselines, CandidateSolver& solver,
    const ValidationConfig& config) {
  TrainValidation result;
  result.records = run_phase(pool, instance_ids, baselines, solver, config,
                             Phase::Train);
  const auto ids = candidate_ids(pool);
  const std::size_t columns = instance_ids.size();
  for (std::size_t c = 0; c < pool.size(); ++c) {
    double score = 0.0;
    bool survives = false;
    for (std::size_t i = 0; i < columns; ++i) {
      const ValidationRecord& record = result.records[c * columns + i];
      if (record.status != Status::Sat) continue;
      score += std::max(0.0, record.baseline_s - record.elapsed_s);
      if (record.elapsed_s < record.baseline_s) survives = true;
    }
    result.scores[ids[c]] = score;
    if (survives) result.survivors.push_back(pool[c]);
  }
  return result;
}

std::vector<ValidationRecord> validate_phase_test(
    const std::vector<synth::CandidateStreamliner>& pool,
    const std::vector<std::string>& instance_ids,
    const std::map<std::string, double>& baselines, CandidateSolver& solver,
    const ValidationConfig& config) {
  return run_phase(pool, instance_ids, baselines, solver, config, Phase::Test);
}

std::optional<double> per_instance_speedup(const ValidationRecord& record) {
  if (record.status != Status::Sat) return std::nullopt;
  if (!(record.baseline_s > 0.0)) return std::nullopt;
  return record.baseline_s / std::max(record.elapsed_s, kTimerFloorS);
}

GeomeanSpeedup geomean_speedup(const std::vector<ValidationRecord>& records) {
  GeomeanSpeedup out;
  double log_sum = 0.0;
  for (const auto& record : records) {
    auto speedup = per_instance_speedup(record);
    if (!speedup) continue;
    log_sum += std::log(*speedup);
    out.max_speedup = std::max(out.max_speedup, *speedup);
    ++out.retained;
  }
  if (out.retained > 0) {
    out.defined = true;
    out.geomean = std::exp(log_sum / out.retained);
  }
  return out;
}

double pool_ceiling(const std::vector<ValidationRecord>& records,
                    const std::vector<std::string>& instance_ids,
                    const std::map<std::string, double>& baselines) {
  check_baselines(instance_ids, baselines);
  double baseline_total = 0.0;
  double best_total = 0.0;
  for (const auto& instance : instance_ids) {
    const double baseline = baselines.at(instance);
    double best = baseline;
    for (const auto& record : records) {
      if (record.instance_id != instance || record.status != Status::Sat) {
        continue;
      }
      best = std::min(best, record.elapsed_s);
    }
    baseline_total += baseline;
    best_total += best;
  }
  if (!(baseline_total > 0.0)) return 0.0;
  return (baseline_total - best_total) / baseline_total;
}

MetricsReport build_metrics(const std::vector<ValidationRecord>& records,
                            const std::vector<std::string>& instance_ids,
                            const std::map<std::string, double>& baselines) {
  MetricsReport report;

  std::vector<std::string> order;  // candidate ids by first appearance
  std::map<std::string, std::vector<ValidationRecord>> by_candidate;
  for (const auto& record : records) {
    auto [it, inserted] = by_candidate.try_emplace(record.candidate_id);
    if (inserted) order.push_back(record.candidate_id);
    it->second.push_back(record);
  }
  for (const auto& id : order) {
    CandidateMetrics metrics;
    metrics.candidate_id = id;
    for (const auto& record : by_candidate.at(id)) {
      if (record.status == Status::Sat) ++metrics.sat;
      if (record.status == Status::Unsat) ++metrics.unsat;
    }
    metrics.speedup = geomean_speedup(by_candidate.at(id));
    report.candidates.push_back(std::move(metrics));
  }
  std::stable_sort(report.candidates.begin(), report.candidates.end(),
                   [](const CandidateMetrics& a, const CandidateMetrics& b) {
                     return a.sat > b.sat;
                   });

  report.ceiling = pool_ceiling(records, instance_ids, baselines);

  for (const auto& instance : instance_ids) {
    InstanceWinner winner;
    winner.instance_id = instance;
    winner.baseline_s = baselines.at(instance);
    winner.winner_id = "baseline";
    winner.best_s = winner.baseline_s;
    for (const auto& record : records) {
      if (record.instance_id != instance || record.status != Status::Sat) {
        continue;
      }
      if (record.elapsed_s < winner.best_s) {
        winner.best_s = record.elapsed_s;
        winner.winner_id = record.candidate_id;
      }
    }
    report.winners.push_back(std::move(winner));
  }
  return report;
}

void save_records(const std::string& path,
                  const std::vector<ValidationRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidError("cannot write records to '" + path + "'");
  for (const auto& record : records) {
    out << record_to_json(record).dump() << '\n';
  }
  if (!out) throw ValidError("failed writing records to '" + path + "'");
}

std::vector<ValidationRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidError("cannot read records from '" + path + "'");
  std::vector<ValidationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    auto record = record_from_line(line);
    if (record) out.push_back(*record);
  }
  return out;
}

std::string records_table(const std::vector<ValidationRecord>& records) {
  std::ostringstream out;
  out << "candidate\tinstance\tphase\tstatus\telapsed_s\tbaseline_s\tseed\n";
  for (const auto& record : records) {
    out << record.candidate_id << '\t' << record.instance_id << '\t'
        << phase_name(record.phase) << '\t' << status_name(record.status)
        << '\t' << fixed(record.elapsed_s, 6) << '\t'
        << fixed(record.baseline_s, 6) << '\t' << record.seed << '\n';
  }
  return out.str();
}

std::string metrics_table(const MetricsReport& report) {
  std::ostringstream out;
  out << "candidate\tsat\tunsat\tgeomean\tmax\n";
  for (const auto& metrics : report.candidates) {
    out << metrics.candidate_id << '\t' << metrics.sat << '\t' << metrics.unsat
        << '\t';
    if (metrics.speedup.defined) {
      out << fixed(metrics.speedup.geomean, 3) << '\t'
          << fixed(metrics.speedup.max_speedup, 3);
    } else {
      out << "-\t-";
    }
    out << '\n';
  }
  out << "pool ceiling: " << fixed(report.ceiling, 4) << '\n';
  if (report.wall_clock_savings) {
    out << "wall-clock savings: " << fixed(*report.wall_clock_savings, 4)
        << '\n';
  }
  if (report.cpu_adjusted_savings) {
    out << "cpu-adjusted savings: " << fixed(*report.cpu_adjusted_savings, 4)
        << '\n';
  }
  out << "winners:\n";
  for (const auto& winner : report.winners) {
    out << "  " << winner.instance_id << '\t' << winner.winner_id << '\t'
        << "baseline=" << fixed(winner.baseline_s, 6) << '\t'
        << "best=" << fixed(winner.best_s, 6) << '\n';
  }
  return out.str();
}

}  // namespace streamforge::valid

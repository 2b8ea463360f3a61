#include "streamforge/valid/valid.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "streamforge/minicp/model.hpp"
#include "streamforge/minicp/parse.hpp"

using namespace streamforge;
using valid::Phase;
using valid::Status;
using valid::ValidationConfig;
using valid::ValidationRecord;

namespace {

synth::CandidateStreamliner make_candidate(const std::string& text,
                                           const std::string& descriptor) {
  synth::CandidateStreamliner c;
  c.text = text;
  c.descriptor = descriptor;
  c.method = synth::Method::LlmStats;
  c.instance_id = "origin";
  c.seed = 1;
  return c;
}

/// Deterministic solver: outcomes keyed by "<descriptor>|<instance>", with a
/// default for unscripted pairs, and a thread-safe call counter.
class ScriptedSolver : public valid::CandidateSolver {
 public:
  std::map<std::string, valid::SolveOutcome> script;
  valid::SolveOutcome fallback{Status::Unsat, 0.05};
  std::atomic<int> calls{0};

  valid::SolveOutcome solve(const synth::CandidateStreamliner& candidate,
                            const std::string& instance_id,
                            double /*budget_s*/) override {
    ++calls;
    auto it = script.find(candidate.descriptor + "|" + instance_id);
    return it == script.end() ? fallback : it->second;
  }
};

class ThrowingSolver : public valid::CandidateSolver {
 public:
  valid::SolveOutcome solve(const synth::CandidateStreamliner&,
                            const std::string&, double) override {
    throw std::runtime_error("solver exploded");
  }
};

/// Fresh scratch directory removed when the test ends.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("streamforge-valid-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str(const std::string& leaf) const {
    return (path / leaf).string();
  }
};

ValidationRecord make_record(const std::string& candidate,
                             const std::string& instance, Status status,
                             double elapsed, double baseline) {
  ValidationRecord r;
  r.candidate_id = candidate;
  r.instance_id = instance;
  r.phase = Phase::Train;
  r.status = status;
  r.elapsed_s = elapsed;
  r.baseline_s = baseline;
  r.seed = 7;
  return r;
}

std::size_t line_count(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("candidate ids are descriptors with collision suffixes") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "pin"), make_candidate("x[2] = 1", "pin"),
      make_candidate("x[3] = 1", "pin_2"), make_candidate("x[4] = 1", "")};
  auto ids = valid::candidate_ids(pool);
  REQUIRE(ids.size() == 4);
  CHECK(ids[0] == "pin");
  CHECK(ids[1] == "pin_2");
  CHECK(ids[2] == "pin_2_2");
  CHECK(ids[3] == "candidate");

  // Stable across calls: resumability depends on it.
  CHECK(valid::candidate_ids(pool) == ids);
}

TEST_CASE("missing or non-positive baseline fails before any solve") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "pin")};
  ScriptedSolver solver;
  ValidationConfig config;
  config.parallelism = 1;

  CHECK_THROWS_WITH_AS(
      valid::validate_phase_train(pool, {"i1", "ghost"}, {{"i1", 1.0}}, solver,
                                  config),
      doctest::Contains("missing baseline"), valid::ValidError);
  CHECK(solver.calls == 0);

  CHECK_THROWS_WITH_AS(
      valid::validate_phase_train(pool, {"i1"}, {{"i1", 0.0}}, solver, config),
      doctest::Contains("must be positive"), valid::ValidError);
  CHECK(solver.calls == 0);
}

TEST_CASE("a candidate UNSAT everywhere is filtered with score zero") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 99", "impossible")};
  ScriptedSolver solver;  // fallback is UNSAT
  ValidationConfig config;
  config.parallelism = 1;
  std::map<std::string, double> baselines = {
      {"i1", 1.0}, {"i2", 1.0}, {"i3", 1.0}};

  auto result = valid::validate_phase_train(pool, {"i1", "i2", "i3"},
                                            baselines, solver, config);
  CHECK(result.survivors.empty());
  CHECK(result.scores.at("impossible") == doctest::Approx(0.0));
  REQUIRE(result.records.size() == 3);
  for (const auto& record : result.records) {
    CHECK(record.status == Status::Unsat);
    CHECK(record.phase == Phase::Train);
  }
}

TEST_CASE("SAT on one of three instances at half baseline survives") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "half")};
  ScriptedSolver solver;
  solver.script["half|i2"] = {Status::Sat, 0.5};
  ValidationConfig config;
  config.parallelism = 1;
  config.seed = 42;
  std::map<std::string, double> baselines = {
      {"i1", 1.0}, {"i2", 1.0}, {"i3", 1.0}};

  auto result = valid::validate_phase_train(pool, {"i1", "i2", "i3"},
                                            baselines, solver, config);
  REQUIRE(result.survivors.size() == 1);
  CHECK(result.survivors[0].descriptor == "half");
  // Saved time: only the SAT instance contributes, t_b - t_c = 0.5.
  CHECK(result.scores.at("half") == doctest::Approx(0.5).epsilon(1e-9));

  REQUIRE(result.records.size() == 3);
  CHECK(result.records[1].instance_id == "i2");
  CHECK(result.records[1].status == Status::Sat);
  CHECK(result.records[1].elapsed_s == doctest::Approx(0.5));
  CHECK(result.records[1].baseline_s == doctest::Approx(1.0));
  CHECK(result.records[1].seed == 42);
}

TEST_CASE("SAT exactly at baseline neither survives nor scores") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "even")};
  ScriptedSolver solver;
  solver.script["even|i1"] = {Status::Sat, 1.0};
  ValidationConfig config;
  config.parallelism = 1;

  auto result =
      valid::validate_phase_train(pool, {"i1"}, {{"i1", 1.0}}, solver, config);
  CHECK(result.survivors.empty());
  CHECK(result.scores.at("even") == doctest::Approx(0.0));
}

TEST_CASE("elapsed time is clamped to the per-instance cap") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "slow")};
  ScriptedSolver solver;
  solver.script["slow|i1"] = {Status::Timeout, 2.75};  // overshoots the budget
  ValidationConfig config;
  config.parallelism = 1;

  auto result =
      valid::validate_phase_train(pool, {"i1"}, {{"i1", 1.5}}, solver, config);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].status == Status::Timeout);
  CHECK(result.records[0].elapsed_s == doctest::Approx(1.5));
  CHECK(result.records[0].baseline_s == doctest::Approx(1.5));
}

TEST_CASE("records come back candidate-major over instances in order") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "a"), make_candidate("x[2] = 2", "b")};
  ScriptedSolver solver;
  ValidationConfig config;
  config.parallelism = 1;
  std::map<std::string, double> baselines = {{"i1", 1.0}, {"i2", 2.0}};

  auto result = valid::validate_phase_train(pool, {"i1", "i2"}, baselines,
                                            solver, config);
  REQUIRE(result.records.size() == 4);
  CHECK(result.records[0].candidate_id == "a");
  CHECK(result.records[0].instance_id == "i1");
  CHECK(result.records[1].candidate_id == "a");
  CHECK(result.records[1].instance_id == "i2");
  CHECK(result.records[2].candidate_id == "b");
  CHECK(result.records[2].instance_id == "i1");
  CHECK(result.records[3].candidate_id == "b");
  CHECK(result.records[3].instance_id == "i2");
}

TEST_CASE("test phase stamps phase=test and never filters") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 99", "hopeless")};
  ScriptedSolver solver;
  ValidationConfig config;
  config.parallelism = 1;

  auto records = valid::validate_phase_test(pool, {"t1"}, {{"t1", 1.0}},
                                            solver, config);
  REQUIRE(records.size() == 1);
  CHECK(records[0].phase == Phase::Test);
  CHECK(records[0].status == Status::Unsat);
}

TEST_CASE("a checkpointed run resumes with zero additional solves") {
  TempDir dir("resume");
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "a"), make_candidate("x[2] = 2", "b")};
  std::map<std::string, double> baselines = {{"i1", 1.0}, {"i2", 2.0}};
  ValidationConfig config;
  config.parallelism = 2;
  config.checkpoint_path = dir.str("train.jsonl");

  ScriptedSolver first;
  first.script["a|i1"] = {Status::Sat, 0.25};
  first.script["b|i2"] = {Status::Sat, 0.5};
  auto run1 = valid::validate_phase_train(pool, {"i1", "i2"}, baselines, first,
                                          config);
  CHECK(first.calls == 4);
  const std::size_t lines_after_first = line_count(config.checkpoint_path);
  CHECK(lines_after_first == 4);

  // Different scripted outcomes would change the records if anything re-ran.
  ScriptedSolver second;
  second.fallback = {Status::Sat, 0.01};
  auto run2 = valid::validate_phase_train(pool, {"i1", "i2"}, baselines,
                                          second, config);
  CHECK(second.calls == 0);
  CHECK(run2.records == run1.records);
  CHECK(run2.survivors == run1.survivors);
  CHECK(run2.scores == run1.scores);
  // No-op re-validation appends nothing.
  CHECK(line_count(config.checkpoint_path) == lines_after_first);
}

TEST_CASE("resume re-runs only the missing pairs") {
  TempDir dir("partial");
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "a")};
  std::map<std::string, double> baselines = {{"i1", 1.0}, {"i2", 1.0}};
  ValidationConfig config;
  config.parallelism = 1;
  config.checkpoint_path = dir.str("train.jsonl");

  {
    std::ofstream out(config.checkpoint_path);
    out << R"({"candidate":"a","instance":"i1","phase":"train",)"
        << R"("status":"SAT","elapsed_s":0.123,"baseline_s":1.0,"seed":9})"
        << "\n";
    out << "{\"torn\": \n";  // interrupted write; must be skipped, not fatal
  }

  ScriptedSolver solver;
  auto result = valid::validate_phase_train(pool, {"i1", "i2"}, baselines,
                                            solver, config);
  CHECK(solver.calls == 1);  // only (a, i2)
  REQUIRE(result.records.size() == 2);
  CHECK(result.records[0].elapsed_s == doctest::Approx(0.123));
  CHECK(result.records[0].seed == 9);  // reused verbatim, not restamped
  CHECK(result.records[1].status == Status::Unsat);
}

TEST_CASE("train and test checkpoints do not collide in one file") {
  TempDir dir("phases");
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "a")};
  std::map<std::string, double> baselines = {{"i1", 1.0}};
  ValidationConfig config;
  config.parallelism = 1;
  config.checkpoint_path = dir.str("both.jsonl");

  ScriptedSolver solver;
  solver.script["a|i1"] = {Status::Sat, 0.2};
  valid::validate_phase_train(pool, {"i1"}, baselines, solver, config);
  CHECK(solver.calls == 1);
  // Same pair under the other phase still needs its own solve.
  auto test_records =
      valid::validate_phase_test(pool, {"i1"}, baselines, solver, config);
  CHECK(solver.calls == 2);
  CHECK(test_records[0].phase == Phase::Test);
}

TEST_CASE("a throwing solver yields an ERROR record, not a crash") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "boom")};
  ThrowingSolver solver;
  ValidationConfig config;
  config.parallelism = 1;

  auto result =
      valid::validate_phase_train(pool, {"i1"}, {{"i1", 1.0}}, solver, config);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].status == Status::Error);
  CHECK(result.survivors.empty());
}

TEST_CASE("parallel and serial runs return identical records") {
  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[1] = 1", "a"), make_candidate("x[2] = 2", "b"),
      make_candidate("x[3] = 3", "c")};
  std::vector<std::string> instances = {"i1", "i2", "i3", "i4"};
  std::map<std::string, double> baselines = {
      {"i1", 1.0}, {"i2", 2.0}, {"i3", 3.0}, {"i4", 4.0}};
  ScriptedSolver solver;
  solver.script["a|i1"] = {Status::Sat, 0.1};
  solver.script["b|i3"] = {Status::Sat, 1.5};
  solver.script["c|i4"] = {Status::Timeout, 4.0};

  ValidationConfig serial;
  serial.parallelism = 1;
  auto one =
      valid::validate_phase_train(pool, instances, baselines, solver, serial);

  ValidationConfig wide;
  wide.parallelism = 4;
  auto four =
      valid::validate_phase_train(pool, instances, baselines, solver, wide);

  CHECK(one.records == four.records);
  CHECK(one.scores == four.scores);
}

TEST_CASE("per-instance speedup follows the ratio with a millisecond floor") {
  CHECK(*valid::per_instance_speedup(
            make_record("c", "i", Status::Sat, 0.1, 100.0)) ==
        doctest::Approx(1000.0));
  CHECK(*valid::per_instance_speedup(
            make_record("c", "i", Status::Sat, 2.0, 2.0)) ==
        doctest::Approx(1.0));
  // Sub-millisecond solves are floored at 1 ms, so the ratio stays finite.
  CHECK(*valid::per_instance_speedup(
            make_record("c", "i", Status::Sat, 0.0, 1.0)) ==
        doctest::Approx(1000.0));
  CHECK(!valid::per_instance_speedup(
      make_record("c", "i", Status::Unsat, 0.1, 1.0)));
  CHECK(!valid::per_instance_speedup(
      make_record("c", "i", Status::Timeout, 1.0, 1.0)));
  CHECK(!valid::per_instance_speedup(
      make_record("c", "i", Status::Error, 0.0, 1.0)));
}

TEST_CASE("geometric mean speedup over the SAT records") {
  SUBCASE("two speedups of 10 and 1000 average to 100") {
    std::vector<ValidationRecord> records = {
        make_record("c", "i1", Status::Sat, 1.0, 10.0),     // 10x
        make_record("c", "i2", Status::Sat, 0.01, 10.0),    // 1000x
        make_record("c", "i3", Status::Unsat, 0.01, 10.0),  // ignored
    };
    auto speedup = valid::geomean_speedup(records);
    CHECK(speedup.defined);
    CHECK(speedup.geomean == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(speedup.retained == 2);
    CHECK(speedup.max_speedup == doctest::Approx(1000.0));
  }
  SUBCASE("a single SAT record is its own mean") {
    std::vector<ValidationRecord> records = {
        make_record("c", "i1", Status::Sat, 1.0, 7.0)};
    auto speedup = valid::geomean_speedup(records);
    CHECK(speedup.defined);
    CHECK(speedup.geomean == doctest::Approx(7.0));
    CHECK(speedup.retained == 1);
  }
  SUBCASE("no SAT records leaves the mean undefined") {
    std::vector<ValidationRecord> records = {
        make_record("c", "i1", Status::Unsat, 0.1, 1.0),
        make_record("c", "i2", Status::Timeout, 1.0, 1.0)};
    auto speedup = valid::geomean_speedup(records);
    CHECK(!speedup.defined);
    CHECK(speedup.retained == 0);
  }
}

TEST_CASE("pool ceiling is the oracle best-per-instance savings") {
  std::vector<std::string> instances = {"i1", "i2"};
  std::map<std::string, double> baselines = {{"i1", 1.0}, {"i2", 1.0}};

  SUBCASE("no SAT record anywhere saves nothing") {
    std::vector<ValidationRecord> records = {
        make_record("c", "i1", Status::Unsat, 0.1, 1.0)};
    CHECK(valid::pool_ceiling(records, instances, baselines) ==
          doctest::Approx(0.0));
  }
  SUBCASE("a tenth of baseline everywhere saves ninety percent") {
    std::vector<ValidationRecord> records = {
        make_record("c", "i1", Status::Sat, 0.1, 1.0),
        make_record("c", "i2", Status::Sat, 0.1, 1.0)};
    CHECK(valid::pool_ceiling(records, instances, baselines) ==
          doctest::Approx(0.9).epsilon(1e-9));
  }
  SUBCASE("slower-than-baseline SAT never hurts") {
    std::vector<ValidationRecord> records = {
        make_record("c", "i1", Status::Sat, 0.9, 1.0),
        make_record("c", "i2", Status::Sat, 1.0, 1.0)};  // no gain on i2
    CHECK(valid::pool_ceiling(records, instances, baselines) ==
          doctest::Approx(0.05).epsilon(1e-9));
  }
}

TEST_CASE("pool ceiling matches a brute-force oracle and dominates") {
  // Five instances, three candidates, mixed statuses.
  std::vector<std::string> instances = {"i1", "i2", "i3", "i4", "i5"};
  std::map<std::string, double> baselines = {
      {"i1", 2.0}, {"i2", 4.0}, {"i3", 1.0}, {"i4", 8.0}, {"i5", 0.5}};
  std::vector<ValidationRecord> records = {
      make_record("a", "i1", Status::Sat, 0.5, 2.0),
      make_record("a", "i2", Status::Unsat, 0.1, 4.0),
      make_record("a", "i3", Status::Sat, 0.9, 1.0),
      make_record("a", "i4", Status::Timeout, 8.0, 8.0),
      make_record("a", "i5", Status::Sat, 0.1, 0.5),
      make_record("b", "i1", Status::Sat, 1.0, 2.0),
      make_record("b", "i2", Status::Sat, 0.25, 4.0),
      make_record("b", "i3", Status::Unsat, 0.2, 1.0),
      make_record("b", "i4", Status::Sat, 2.0, 8.0),
      make_record("b", "i5", Status::Error, 0.0, 0.5),
      make_record("c", "i1", Status::Unsat, 0.3, 2.0),
      make_record("c", "i2", Status::Sat, 3.0, 4.0),
      make_record("c", "i3", Status::Sat, 0.4, 1.0),
      make_record("c", "i4", Status::Sat, 1.0, 8.0),
      make_record("c", "i5", Status::Sat, 0.6, 0.5),
  };

  // Oracle: direct per-instance minimum over SAT entries, capped at baseline.
  double baseline_total = 0.0;
  double best_total = 0.0;
  for (const auto& instance : instances) {
    double best = baselines.at(instance);
    for (const auto& record : records) {
      if (record.instance_id == instance && record.status == Status::Sat) {
        best = std::min(best, record.elapsed_s);
      }
    }
    baseline_total += baselines.at(instance);
    best_total += best;
  }
  const double oracle = (baseline_total - best_total) / baseline_total;

  const double ceiling = valid::pool_ceiling(records, instances, baselines);
  CHECK(ceiling == doctest::Approx(oracle).epsilon(1e-12));
  // Spelled out: best times are 0.5, 0.25, 0.4, 1.0, 0.1 against 15.5 total.
  CHECK(ceiling ==
        doctest::Approx((15.5 - 2.25) / 15.5).epsilon(1e-9));

  // Dominance: no single candidate's savings can beat the oracle.
  for (const std::string candidate : {"a", "b", "c"}) {
    double single_total = 0.0;
    for (const auto& instance : instances) {
      double best = baselines.at(instance);
      for (const auto& record : records) {
        if (record.candidate_id == candidate &&
            record.instance_id == instance && record.status == Status::Sat) {
          best = std::min(best, record.elapsed_s);
        }
      }
      single_total += best;
    }
    const double single = (baseline_total - single_total) / baseline_total;
    CHECK(single <= ceiling + 1e-12);
  }
}

TEST_CASE("metrics report aggregates counts, ceiling, and winners") {
  std::vector<std::string> instances = {"i1", "i2"};
  std::map<std::string, double> baselines = {{"i1", 1.0}, {"i2", 2.0}};
  std::vector<ValidationRecord> records = {
      make_record("fast", "i1", Status::Sat, 0.2, 1.0),
      make_record("fast", "i2", Status::Sat, 0.5, 2.0),
      make_record("meek", "i1", Status::Unsat, 0.1, 1.0),
      make_record("meek", "i2", Status::Sat, 1.9, 2.0),
      make_record("broken", "i1", Status::Error, 0.0, 1.0),
      make_record("broken", "i2", Status::Timeout, 2.0, 2.0),
  };

  auto report = valid::build_metrics(records, instances, baselines);
  REQUIRE(report.candidates.size() == 3);
  // Ordered by descending SAT count; ties keep first-appearance order.
  CHECK(report.candidates[0].candidate_id == "fast");
  CHECK(report.candidates[0].sat == 2);
  CHECK(report.candidates[0].unsat == 0);
  CHECK(report.candidates[1].candidate_id == "meek");
  CHECK(report.candidates[1].sat == 1);
  CHECK(report.candidates[1].unsat == 1);
  CHECK(report.candidates[2].candidate_id == "broken");
  CHECK(report.candidates[2].sat == 0);
  CHECK(report.candidates[2].unsat == 0);  // ERROR and TIMEOUT are neither
  CHECK(!report.candidates[2].speedup.defined);

  // Ceiling: best 0.2 on i1, 0.5 on i2 against 3.0 baseline total.
  CHECK(report.ceiling == doctest::Approx((3.0 - 0.7) / 3.0).epsilon(1e-9));

  REQUIRE(report.winners.size() == 2);
  CHECK(report.winners[0].instance_id == "i1");
  CHECK(report.winners[0].winner_id == "fast");
  CHECK(report.winners[0].best_s == doctest::Approx(0.2));
  CHECK(report.winners[1].winner_id == "fast");

  CHECK(!report.wall_clock_savings.has_value());
}

TEST_CASE("baseline wins an instance no candidate improves") {
  std::vector<std::string> instances = {"i1"};
  std::map<std::string, double> baselines = {{"i1", 1.0}};
  std::vector<ValidationRecord> records = {
      make_record("slowpoke", "i1", Status::Sat, 1.0, 1.0),
      make_record("wrong", "i1", Status::Unsat, 0.1, 1.0)};

  auto report = valid::build_metrics(records, instances, baselines);
  REQUIRE(report.winners.size() == 1);
  CHECK(report.winners[0].winner_id == "baseline");
  CHECK(report.winners[0].best_s == doctest::Approx(1.0));
  CHECK(report.ceiling == doctest::Approx(0.0));
}

TEST_CASE("records survive a save/load round trip") {
  TempDir dir("records");
  std::vector<ValidationRecord> records = {
      make_record("a", "i1", Status::Sat, 0.25, 1.0),
      make_record("b", "i2", Status::Error, 0.0, 2.0)};
  records[1].phase = Phase::Test;

  const std::string path = dir.str("records.jsonl");
  valid::save_records(path, records);
  auto loaded = valid::load_records(path);
  CHECK(loaded == records);

  CHECK_THROWS_AS(valid::load_records(dir.str("absent.jsonl")),
                  valid::ValidError);
}

TEST_CASE("the flat table lists one row per record") {
  std::vector<ValidationRecord> records = {
      make_record("a", "i1", Status::Sat, 0.25, 1.0)};
  const std::string table = valid::records_table(records);
  CHECK(table ==
        "candidate\tinstance\tphase\tstatus\telapsed_s\tbaseline_s\tseed\n"
        "a\ti1\ttrain\tSAT\t0.250000\t1.000000\t7\n");
}

TEST_CASE("the metrics table is a readable summary") {
  std::vector<std::string> instances = {"i1"};
  std::map<std::string, double> baselines = {{"i1", 1.0}};
  std::vector<ValidationRecord> records = {
      make_record("fast", "i1", Status::Sat, 0.5, 1.0)};
  auto report = valid::build_metrics(records, instances, baselines);
  report.wall_clock_savings = 0.5;
  report.cpu_adjusted_savings = -1.0;

  const std::string table = valid::metrics_table(report);
  CHECK(table.find("fast\t1\t0\t2.000\t2.000") != std::string::npos);
  CHECK(table.find("pool ceiling: 0.5000") != std::string::npos);
  CHECK(table.find("wall-clock savings: 0.5000") != std::string::npos);
  CHECK(table.find("cpu-adjusted savings: -1.0000") != std::string::npos);
  CHECK(table.find("i1\tfast\tbaseline=1.000000\tbest=0.500000") !=
        std::string::npos);
}

TEST_CASE("the built-in solver validates candidates against real instances") {
  const std::string model_text =
      "param n = 3;\n"
      "var x[1..n] in 1..3;\n"
      "constraint x[1] = 1;\n";
  minicp::Model model = minicp::parse_model(model_text);
  minicp::Instance instance = minicp::resolve(model);

  valid::MinicpCandidateSolver solver({{"tiny", &instance}});

  SUBCASE("a compatible constraint returns SAT within budget") {
    auto outcome = solver.solve(make_candidate("x[2] = 2", "ok"), "tiny", 5.0);
    CHECK(outcome.status == Status::Sat);
    CHECK(outcome.elapsed_s >= 0.0);
    CHECK(outcome.elapsed_s < 5.0);
  }
  SUBCASE("a contradicting constraint returns UNSAT") {
    auto outcome =
        solver.solve(make_candidate("x[1] = 2", "clash"), "tiny", 5.0);
    CHECK(outcome.status == Status::Unsat);
  }
  SUBCASE("an unparseable candidate reports an error") {
    auto outcome =
        solver.solve(make_candidate("x[1] @ 2", "garbled"), "tiny", 5.0);
    CHECK(outcome.status == Status::Error);
  }
  SUBCASE("an unknown instance reports an error") {
    auto outcome =
        solver.solve(make_candidate("x[2] = 2", "ok"), "missing", 5.0);
    CHECK(outcome.status == Status::Error);
  }
}

TEST_CASE("end-to-end train validation over the built-in solver") {
  const std::string model_text =
      "param n = 4;\n"
      "var x[1..n] in 1..4;\n"
      "constraint x[1] = 1;\n";
  minicp::Model model = minicp::parse_model(model_text);
  minicp::Instance instance = minicp::resolve(model);
  valid::MinicpCandidateSolver solver({{"n4", &instance}});

  std::vector<synth::CandidateStreamliner> pool = {
      make_candidate("x[2] = 2", "helpful"),
      make_candidate("x[1] = 3", "contradiction")};
  ValidationConfig config;
  config.parallelism = 2;

  auto result = valid::validate_phase_train(pool, {"n4"}, {{"n4", 10.0}},
                                            solver, config);
  REQUIRE(result.records.size() == 2);
  CHECK(result.records[0].status == Status::Sat);
  CHECK(result.records[1].status == Status::Unsat);
  REQUIRE(result.survivors.size() == 1);
  CHECK(result.survivors[0].descriptor == "helpful");
}

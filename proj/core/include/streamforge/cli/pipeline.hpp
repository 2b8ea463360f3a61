#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/cnn/cnn.hpp"
#include "streamforge/corpus/problem.hpp"
#include "streamforge/synth/synth.hpp"
#include "streamforge/valid/valid.hpp"

namespace streamforge::cli {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one experiment run depends on.  A run directory is bound to one
/// configuration: the first stage writes `config.json` and later stages (or
/// later invocations) refuse to run against a directory initialized with a
/// different configuration.
struct RunConfig {
  std::string problem_id = "latin4";
  /// "builtin", or "external" / "external:<solver-id>" for the subprocess
  /// adapter (executable taken from STREAMFORGE_MZN).
  std::string solver = "builtin";
  /// "stub" (offline rule-based), "replay" (recorded fixtures), or "live"
  /// (HTTP endpoint; key from STREAMFORGE_LLM_KEY).
  std::string llm = "stub";
  std::string llm_host = "https://api.anthropic.com";
  /// Fixture directory for replay (required) and live recording (defaults to
  /// <out>/synth/fixtures when empty).
  std::string fixtures_dir;

  std::size_t enumeration_target = 500;
  double enumeration_budget_s = 60.0;
  double baseline_timeout_s = 60.0;

  /// Cap on non-degenerate discovery payloads actually sent (0 = all).
  int max_discovery_payloads = 6;
  /// Raw sample solutions embedded in each statistics payload.
  int sample_solutions = 5;

  cnn::CnnConfig cnn;
  synth::GenerationParams generation;

  int k = 3;  ///< portfolio lanes
  int m = 3;  ///< members per lane (0 = all)
  int validate_parallelism = 4;

  std::string out_dir;
  unsigned seed = 1;

  bool operator==(const RunConfig&) const = default;
};

/// Throws PipelineError with a precise message on the first invalid field.
void validate_config(const RunConfig& config);

std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);

// ---- builtin problems ------------------------------------------------------

/// Problems bundled with the binary, solvable fully offline.
const std::vector<corpus::ProblemSpec>& builtin_problems();

/// Null when no bundled problem has this id.
const corpus::ProblemSpec* find_problem(const std::string& id);

// ---- stages ----------------------------------------------------------------

enum class Stage {
  Enumerate,
  Encode,
  Props,
  Train,
  Correlate,
  Synth,
  Pool,
  Validate,
  Race,
  Report,
};

/// All stages in execution order.
const std::vector<Stage>& stage_order();

const char* stage_name(Stage stage);
std::optional<Stage> stage_from_name(const std::string& name);

struct StageResult {
  Stage stage = Stage::Enumerate;
  bool skipped = false;  ///< artifacts were already present; nothing ran
  double elapsed_s = 0.0;
  std::string message;   ///< one-line human summary of what was produced
};

/// Runs one stage against the run directory in `config.out_dir`.  Stages are
/// idempotent: a stage whose manifest is already present is skipped.  A stage
/// whose prerequisite artifacts are missing throws PipelineError naming the
/// stage to run first.
StageResult run_stage(const RunConfig& config, Stage stage);

/// Every stage in order; previously completed stages report as skipped.
std::vector<StageResult> run_all(const RunConfig& config);

// ---- report rendering ------------------------------------------------------

/// Speedup heatmap over one phase's validation records, as TSV.  Rows are
/// candidates ordered by SAT-retention count (descending, ties by id);
/// columns are instances ordered by baseline solve time (ascending, ties in
/// the given order).  Each cell is exactly one of: the log10 speedup of a SAT
/// record, "UNSAT", or "TIMEOUT" (which also covers solver errors and
/// never-validated pairs) — no fourth state.
std::string heatmap_table(const std::vector<valid::ValidationRecord>& records,
                          const std::vector<std::string>& instance_ids,
                          const std::map<std::string, double>& baselines);

/// Per-filter corpus-average activation maps as aligned text grids.
std::string activation_map_grids(const std::vector<cnn::FilterRecord>& records);

}  // namespace streamforge::cli

#include "streamforge/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "streamforge/corpus/backend.hpp"
#include "streamforge/corpus/corpus.hpp"
#include "streamforge/corpus/store.hpp"
#include "streamforge/correlate/correlate.hpp"
#include "streamforge/encode/encode.hpp"
#include "streamforge/pool/pool.hpp"
#include "streamforge/portfolio/portfolio.hpp"
#include "streamforge/props/props.hpp"

namespace streamforge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PipelineError("cannot read artifact: " + path.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw PipelineError("cannot write artifact: " + path.string());
  }
  out << content;
}

ordered_json load_json(const fs::path& path) {
  ordered_json parsed = ordered_json::parse(read_text(path), nullptr,
                                            /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw PipelineError("malformed JSON artifact: " + path.string());
  }
  return parsed;
}

std::string fixed(double value, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

// ---------------------------------------------------------------------------
// Configuration serialization
// ---------------------------------------------------------------------------

ordered_json config_json(const RunConfig& c) {
  return ordered_json{
      {"problem", c.problem_id},
      {"solver", c.solver},
      {"llm", c.llm},
      {"llm_host", c.llm_host},
      {"fixtures_dir", c.fixtures_dir},
      {"enumeration_target", c.enumeration_target},
      {"enumeration_budget_s", c.enumeration_budget_s},
      {"baseline_timeout_s", c.baseline_timeout_s},
      {"max_discovery_payloads", c.max_discovery_payloads},
      {"sample_solutions", c.sample_solutions},
      {"cnn",
       ordered_json{
           {"channels",
            {c.cnn.channels[0], c.cnn.channels[1], c.cnn.channels[2]}},
           {"kernel", c.cnn.kernel},
           {"epochs", c.cnn.epochs},
           {"learning_rate", c.cnn.learning_rate},
           {"batch_size", c.cnn.batch_size},
           {"seed", c.cnn.seed},
           {"ensemble", c.cnn.ensemble},
           {"stop_at_accuracy", c.cnn.stop_at_accuracy},
           {"validation_fraction", c.cnn.validation_fraction},
       }},
      {"generation",
       ordered_json{
           {"candidates_per_call", c.generation.candidates_per_call},
           {"temperature", c.generation.temperature},
           {"max_tokens", c.generation.max_tokens},
           {"model", c.generation.model},
       }},
      {"k", c.k},
      {"m", c.m},
      {"validate_parallelism", c.validate_parallelism},
      {"out", c.out_dir},
      {"seed", c.seed},
  };
}

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const ordered_json::exception& e) {
    throw PipelineError(std::string("configuration field '") + key +
                        "' has the wrong type: " + e.what());
  }
}

}  // namespace

void validate_config(const RunConfig& c) {
  if (c.problem_id.empty()) {
    throw PipelineError("problem id must be set");
  }
  if (find_problem(c.problem_id) == nullptr) {
    std::string known;
    for (const corpus::ProblemSpec& p : builtin_problems()) {
      if (!known.empty()) known += ", ";
      known += p.id;
    }
    throw PipelineError("unknown problem '" + c.problem_id +
                        "'; bundled problems: " + known);
  }
  const bool external = c.solver.rfind("external", 0) == 0;
  if (c.solver != "builtin" &&
      !(external && (c.solver == "external" || c.solver[8] == ':'))) {
    throw PipelineError("solver must be 'builtin', 'external', or "
                        "'external:<solver-id>', not '" +
                        c.solver + "'");
  }
  if (c.llm != "stub" && c.llm != "replay" && c.llm != "live") {
    throw PipelineError("llm must be one of stub, replay, live, not '" +
                        c.llm + "'");
  }
  if (c.llm == "replay" && c.fixtures_dir.empty()) {
    throw PipelineError("llm 'replay' needs fixtures_dir to point at the "
                        "recorded responses");
  }
  if (c.enumeration_target == 0) {
    throw PipelineError("enumeration target must be at least 1");
  }
  if (c.enumeration_budget_s <= 0 || c.baseline_timeout_s <= 0) {
    throw PipelineError("time budgets must be positive");
  }
  if (c.max_discovery_payloads < 0) {
    throw PipelineError("max_discovery_payloads cannot be negative");
  }
  if (c.sample_solutions < 0) {
    throw PipelineError("sample_solutions cannot be negative");
  }
  if (c.cnn.epochs < 1 || c.cnn.ensemble < 1 || c.cnn.batch_size < 1) {
    throw PipelineError("CNN epochs, ensemble and batch size must be >= 1");
  }
  if (c.cnn.learning_rate <= 0) {
    throw PipelineError("CNN learning rate must be positive");
  }
  for (int ch : c.cnn.channels) {
    if (ch < 1) throw PipelineError("CNN channel counts must be >= 1");
  }
  if (c.cnn.validation_fraction <= 0 || c.cnn.validation_fraction >= 1) {
    throw PipelineError("CNN validation fraction must lie in (0, 1)");
  }
  if (c.generation.candidates_per_call < 1 || c.generation.max_tokens < 1) {
    throw PipelineError("generation parameters must request at least one "
                        "candidate and one token");
  }
  if (c.k < 1) {
    throw PipelineError("k (portfolio lanes) must be >= 1");
  }
  if (c.m < 0) {
    throw PipelineError("m (members per lane) cannot be negative; 0 means "
                        "all");
  }
  if (c.validate_parallelism < 1) {
    throw PipelineError("validation parallelism must be >= 1");
  }
  if (c.out_dir.empty()) {
    throw PipelineError("output directory must be set");
  }
}

std::string config_to_json(const RunConfig& config) {
  return config_json(config).dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  ordered_json parsed =
      ordered_json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw PipelineError("configuration is not a JSON object");
  }
  RunConfig c;
  read_field(parsed, "problem", c.problem_id);
  read_field(parsed, "solver", c.solver);
  read_field(parsed, "llm", c.llm);
  read_field(parsed, "llm_host", c.llm_host);
  read_field(parsed, "fixtures_dir", c.fixtures_dir);
  read_field(parsed, "enumeration_target", c.enumeration_target);
  read_field(parsed, "enumeration_budget_s", c.enumeration_budget_s);
  read_field(parsed, "baseline_timeout_s", c.baseline_timeout_s);
  read_field(parsed, "max_discovery_payloads", c.max_discovery_payloads);
  read_field(parsed, "sample_solutions", c.sample_solutions);
  if (parsed.contains("cnn")) {
    const ordered_json& cj = parsed["cnn"];
    if (!cj.is_object()) throw PipelineError("'cnn' must be an object");
    std::vector<int> channels;
    read_field(cj, "channels", channels);
    if (!channels.empty()) {
      if (channels.size() != 3) {
        throw PipelineError("'cnn.channels' must list exactly three counts");
      }
      c.cnn.channels = {channels[0], channels[1], channels[2]};
    }
    read_field(cj, "kernel", c.cnn.kernel);
    read_field(cj, "epochs", c.cnn.epochs);
    read_field(cj, "learning_rate", c.cnn.learning_rate);
    read_field(cj, "batch_size", c.cnn.batch_size);
    read_field(cj, "seed", c.cnn.seed);
    read_field(cj, "ensemble", c.cnn.ensemble);
    read_field(cj, "stop_at_accuracy", c.cnn.stop_at_accuracy);
    read_field(cj, "validation_fraction", c.cnn.validation_fraction);
  }
  if (parsed.contains("generation")) {
    const ordered_json& gj = parsed["generation"];
    if (!gj.is_object()) throw PipelineError("'generation' must be an object");
    read_field(gj, "candidates_per_call", c.generation.candidates_per_call);
    read_field(gj, "temperature", c.generation.temperature);
    read_field(gj, "max_tokens", c.generation.max_tokens);
    read_field(gj, "model", c.generation.model);
  }
  read_field(parsed, "k", c.k);
  read_field(parsed, "m", c.m);
  read_field(parsed, "validate_parallelism", c.validate_parallelism);
  read_field(parsed, "out", c.out_dir);
  read_field(parsed, "seed", c.seed);
  return c;
}

RunConfig load_config(const std::string& path) {
  return config_from_json(read_text(path));
}

// ---------------------------------------------------------------------------
// Stage bookkeeping
// ---------------------------------------------------------------------------

const std::vector<Stage>& stage_order() {
  static const std::vector<Stage> order = {
      Stage::Enumerate, Stage::Encode,   Stage::Props, Stage::Train,
      Stage::Correlate, Stage::Synth,    Stage::Pool,  Stage::Validate,
      Stage::Race,      Stage::Report,
  };
  return order;
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::Enumerate: return "enumerate";
    case Stage::Encode: return "encode";
    case Stage::Props: return "props";
    case Stage::Train: return "train";
    case Stage::Correlate: return "correlate";
    case Stage::Synth: return "synth";
    case Stage::Pool: return "pool";
    case Stage::Validate: return "validate";
    case Stage::Race: return "race";
    case Stage::Report: return "report";
  }
  return "?";
}

std::optional<Stage> stage_from_name(const std::string& name) {
  for (Stage s : stage_order()) {
    if (name == stage_name(s)) return s;
  }
  return std::nullopt;
}

namespace {

const std::vector<Stage>& prerequisites(Stage stage) {
  static const std::map<Stage, std::vector<Stage>> deps = {
      {Stage::Enumerate, {}},
      {Stage::Encode, {Stage::Enumerate}},
      {Stage::Props, {Stage::Enumerate, Stage::Encode}},
      {Stage::Train, {Stage::Encode}},
      {Stage::Correlate, {Stage::Props, Stage::Train}},
      {Stage::Synth,
       {Stage::Enumerate, Stage::Props, Stage::Train, Stage::Correlate}},
      {Stage::Pool, {Stage::Props, Stage::Synth}},
      {Stage::Validate, {Stage::Enumerate, Stage::Pool}},
      {Stage::Race, {Stage::Validate}},
      {Stage::Report, {Stage::Train, Stage::Validate, Stage::Race}},
  };
  return deps.at(stage);
}

// ---------------------------------------------------------------------------
// Run directory layout
// ---------------------------------------------------------------------------

struct RunContext {
  const RunConfig& config;
  const corpus::ProblemSpec& problem;
  fs::path root;

  fs::path config_path() const { return root / "config.json"; }
  fs::path manifest_path(Stage s) const {
    return root / "stages" / (std::string(stage_name(s)) + ".json");
  }
  fs::path corpus_dir() const { return root / "corpus"; }
  fs::path baselines_path() const { return root / "baselines.jsonl"; }
  fs::path encoded_path(const std::string& id) const {
    return root / "encoded" / (id + ".txt");
  }
  fs::path props_path(const std::string& id) const {
    return root / "props" / (id + ".json");
  }
  fs::path props_table_path() const { return root / "props" / "stats.txt"; }
  fs::path progression_path() const {
    return root / "props" / "progression.json";
  }
  fs::path model_path(unsigned seed) const {
    return root / "cnn" / ("model_" + std::to_string(seed) + ".txt");
  }
  fs::path filters_path() const { return root / "cnn" / "filters.json"; }
  fs::path pairs_path() const { return root / "cnn" / "pairs.json"; }
  fs::path reports_path() const { return root / "cnn" / "reports.json"; }
  fs::path matrix_path() const { return root / "correlate" / "matrix.json"; }
  fs::path ranking_path() const { return root / "correlate" / "ranking.json"; }
  fs::path matrix_table_path() const {
    return root / "correlate" / "matrix.tsv";
  }
  fs::path candidates_path() const {
    return root / "synth" / "candidates.jsonl";
  }
  fs::path synth_diag_path() const {
    return root / "synth" / "diagnostics.txt";
  }
  fs::path fixtures_dir() const {
    if (!config.fixtures_dir.empty()) return fs::path(config.fixtures_dir);
    return root / "synth" / "fixtures";
  }
  fs::path representatives_path() const {
    return root / "pool" / "representatives.jsonl";
  }
  fs::path pool_report_path() const { return root / "pool" / "report.txt"; }
  fs::path train_records_path() const {
    return root / "validate" / "train_records.jsonl";
  }
  fs::path test_records_path() const {
    return root / "validate" / "test_records.jsonl";
  }
  fs::path survivors_path() const {
    return root / "validate" / "survivors.jsonl";
  }
  fs::path validate_summary_path() const {
    return root / "validate" / "summary.json";
  }
  fs::path race_plan_path() const { return root / "race" / "plan.txt"; }
  fs::path race_table_path() const { return root / "race" / "race.tsv"; }
  fs::path sweep_table_path() const { return root / "race" / "sweep.tsv"; }
  fs::path savings_path() const { return root / "race" / "savings.json"; }
  fs::path report_dir() const { return root / "report"; }

  std::unique_ptr<corpus::SolverBackend> make_backend() const {
    if (config.solver == "builtin") {
      return std::make_unique<corpus::BuiltinBackend>();
    }
    std::string solver_id;
    if (config.solver.size() > 9 && config.solver.rfind("external:", 0) == 0) {
      solver_id = config.solver.substr(9);
    }
    return std::make_unique<corpus::ExternalBackend>(solver_id);
  }

  std::unique_ptr<synth::LlmBackend> make_llm() const {
    if (config.llm == "stub") return std::make_unique<synth::StubLlmBackend>();
    if (config.llm == "replay") {
      return std::make_unique<synth::ReplayLlmBackend>(config.fixtures_dir);
    }
    return std::make_unique<synth::HttpLlmBackend>(config.llm_host,
                                                   fixtures_dir().string());
  }

  std::string model_text() const {
    if (problem.external_model) return read_text(problem.model);
    return problem.model;
  }
};

struct StageOut {
  std::string message;
  ordered_json outputs;
};

// ---------------------------------------------------------------------------
// Shared renderers and serializers
// ---------------------------------------------------------------------------

/// Solutions travel into prompts and reports in the modelling language's own
/// literal syntax, one assignment per declared variable.
std::string solution_text(const minicp::Instance& instance,
                          const minicp::Solution& solution) {
  std::ostringstream out;
  for (const minicp::VarInfo& var : instance.vars) {
    auto it = solution.find(var.name);
    if (it == solution.end()) continue;
    const minicp::ValueArray& value = it->second;
    out << var.name << " = ";
    if (value.dims.empty()) {
      out << (value.data.empty() ? 0 : value.data[0]);
    } else if (value.dims.size() == 2) {
      out << "[|";
      const long long rows = value.dims[0];
      const long long cols = value.dims[1];
      for (long long r = 0; r < rows; ++r) {
        if (r > 0) out << "|";
        for (long long c = 0; c < cols; ++c) {
          if (c > 0) out << ", ";
          out << value.data[static_cast<std::size_t>(r * cols + c)];
        }
      }
      out << "|]";
    } else {
      out << "[";
      for (std::size_t i = 0; i < value.data.size(); ++i) {
        if (i > 0) out << ", ";
        out << value.data[i];
      }
      out << "]";
    }
    out << ";\n";
  }
  return out.str();
}

const char* kTensorSeparator = "---";

std::string join_tensors(const std::vector<encode::SolutionTensor>& tensors) {
  std::ostringstream out;
  for (const encode::SolutionTensor& t : tensors) {
    out << encode::to_text(t);
    out << kTensorSeparator << "\n";
  }
  return out.str();
}

std::vector<encode::SolutionTensor> split_tensors(const std::string& text) {
  std::vector<encode::SolutionTensor> out;
  std::istringstream in(text);
  std::string line;
  std::string chunk;
  while (std::getline(in, line)) {
    if (line == kTensorSeparator) {
      if (!chunk.empty()) out.push_back(encode::from_text(chunk));
      chunk.clear();
    } else {
      chunk += line;
      chunk += '\n';
    }
  }
  if (!chunk.empty()) out.push_back(encode::from_text(chunk));
  return out;
}

ordered_json stats_json(const props::PropertyStats& s) {
  return ordered_json{{"mean", s.mean},           {"stddev", s.stddev},
                      {"min", s.min},             {"max", s.max},
                      {"median", s.median},       {"constant", s.constant},
                      {"near_constant", s.near_constant}};
}

props::PropertyStats stats_from_json(const ordered_json& j) {
  props::PropertyStats s;
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("stddev").get<double>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.median = j.at("median").get<double>();
  s.constant = j.at("constant").get<bool>();
  s.near_constant = j.at("near_constant").get<bool>();
  return s;
}

ordered_json filter_record_json(const cnn::FilterRecord& r) {
  return ordered_json{
      {"seed", r.seed},           {"layer", r.layer},
      {"filter", r.filter},       {"activations", r.activations},
      {"variance", r.variance},   {"mean_map", r.mean_map},
      {"map_height", r.map_height}, {"map_width", r.map_width}};
}

cnn::FilterRecord filter_record_from_json(const ordered_json& j) {
  cnn::FilterRecord r;
  r.seed = j.at("seed").get<unsigned>();
  r.layer = j.at("layer").get<int>();
  r.filter = j.at("filter").get<int>();
  r.activations = j.at("activations").get<std::vector<double>>();
  r.variance = j.at("variance").get<double>();
  r.mean_map = j.at("mean_map").get<std::vector<double>>();
  r.map_height = j.at("map_height").get<int>();
  r.map_width = j.at("map_width").get<int>();
  return r;
}

ordered_json pair_json(const cnn::ContrastPair& p) {
  return ordered_json{{"seed", p.seed},
                      {"layer", p.layer},
                      {"filter", p.filter},
                      {"high_ids", p.high_ids},
                      {"low_ids", p.low_ids},
                      {"high_activations", p.high_activations},
                      {"low_activations", p.low_activations},
                      {"degenerate", p.degenerate}};
}

cnn::ContrastPair pair_from_json(const ordered_json& j) {
  cnn::ContrastPair p;
  p.seed = j.at("seed").get<unsigned>();
  p.layer = j.at("layer").get<int>();
  p.filter = j.at("filter").get<int>();
  p.high_ids = j.at("high_ids").get<std::vector<int>>();
  p.low_ids = j.at("low_ids").get<std::vector<int>>();
  p.high_activations = j.at("high_activations").get<std::vector<double>>();
  p.low_activations = j.at("low_activations").get<std::vector<double>>();
  p.degenerate = j.at("degenerate").get<bool>();
  return p;
}

ordered_json matrix_json(const correlate::CorrelationMatrix& m) {
  ordered_json filters = ordered_json::array();
  for (const auto& f : m.filters) {
    filters.push_back(ordered_json{
        {"seed", f.seed}, {"layer", f.layer}, {"filter", f.filter}});
  }
  ordered_json defined = ordered_json::array();
  for (const auto& row : m.defined) {
    defined.push_back(std::vector<int>(row.begin(), row.end()));
  }
  return ordered_json{
      {"filters", filters},
      {"properties", m.properties},
      {"r", m.r},
      {"defined", defined},
      {"filter_constant",
       std::vector<int>(m.filter_constant.begin(), m.filter_constant.end())},
      {"property_constant",
       std::vector<int>(m.property_constant.begin(),
                        m.property_constant.end())},
      {"corpus_size", m.corpus_size}};
}

correlate::CorrelationMatrix matrix_from_json(const ordered_json& j) {
  correlate::CorrelationMatrix m;
  for (const ordered_json& f : j.at("filters")) {
    m.filters.push_back({f.at("seed").get<unsigned>(),
                         f.at("layer").get<int>(),
                         f.at("filter").get<int>()});
  }
  m.properties = j.at("properties").get<std::vector<std::string>>();
  m.r = j.at("r").get<std::vector<std::vector<double>>>();
  for (const ordered_json& row : j.at("defined")) {
    const auto ints = row.get<std::vector<int>>();
    m.defined.emplace_back(ints.begin(), ints.end());
  }
  const auto fc = j.at("filter_constant").get<std::vector<int>>();
  m.filter_constant.assign(fc.begin(), fc.end());
  const auto pc = j.at("property_constant").get<std::vector<int>>();
  m.property_constant.assign(pc.begin(), pc.end());
  m.corpus_size = j.at("corpus_size").get<std::size_t>();
  return m;
}

std::map<std::string, props::Progression> load_progressions(
    const fs::path& path) {
  std::map<std::string, props::Progression> out;
  const ordered_json parsed = load_json(path);
  for (auto it = parsed.begin(); it != parsed.end(); ++it) {
    props::Progression prog;
    for (const ordered_json& row : it.value().at("rows")) {
      props::ProgressionRow r;
      r.size = row.at("size").get<double>();
      r.mean = row.at("mean").get<double>();
      r.min = row.at("min").get<double>();
      r.max = row.at("max").get<double>();
      prog.rows.push_back(r);
    }
    prog.has_fit = it.value().at("has_fit").get<bool>();
    prog.slope = it.value().at("slope").get<double>();
    prog.intercept = it.value().at("intercept").get<double>();
    out.emplace(it.key(), std::move(prog));
  }
  return out;
}

/// Per-instance property artifact produced by the props stage.
struct InstanceProps {
  double size = 0.0;
  std::vector<std::string> catalog;
  std::vector<std::vector<double>> vectors;
  std::vector<props::PropertyStats> stats;
};

InstanceProps load_props(const fs::path& path) {
  const ordered_json j = load_json(path);
  InstanceProps out;
  out.size = j.at("size").get<double>();
  out.catalog = j.at("catalog").get<std::vector<std::string>>();
  out.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  for (const ordered_json& s : j.at("stats")) {
    out.stats.push_back(stats_from_json(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation plumbing
// ---------------------------------------------------------------------------

/// Adapts a solver backend to the validation interface: one candidate text is
/// conjoined with the instance and solved under the given budget.
class BackendCandidateSolver : public valid::CandidateSolver {
 public:
  BackendCandidateSolver(const corpus::ProblemSpec& problem,
                         corpus::SolverBackend& backend, unsigned seed)
      : problem_(problem), backend_(backend), seed_(seed) {}

  valid::SolveOutcome solve(const synth::CandidateStreamliner& candidate,
                            const std::string& instance_id,
                            double budget_s) override {
    const corpus::SolveOutcome out = backend_.solve_one(
        problem_, instance_id, {candidate.text}, budget_s, seed_);
    valid::SolveOutcome r;
    switch (out.status) {
      case corpus::RunStatus::Sat: r.status = valid::Status::Sat; break;
      case corpus::RunStatus::Unsat: r.status = valid::Status::Unsat; break;
      case corpus::RunStatus::Timeout: r.status = valid::Status::Timeout; break;
      case corpus::RunStatus::Error: r.status = valid::Status::Error; break;
    }
    r.elapsed_s = out.elapsed_s;
    return r;
  }

 private:
  const corpus::ProblemSpec& problem_;
  corpus::SolverBackend& backend_;
  unsigned seed_;
};

std::map<std::string, double> baseline_map(
    const RunContext& ctx, const corpus::BaselineCache& cache,
    const std::vector<std::string>& instance_ids) {
  std::map<std::string, double> out;
  for (const std::string& id : instance_ids) {
    const auto found = cache.find(ctx.problem.id, id);
    if (!found) {
      throw PipelineError("stage 'enumerate' did not record a baseline for "
                          "instance '" + id + "'");
    }
    out.emplace(id, found->elapsed_s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage: enumerate
// ---------------------------------------------------------------------------

StageOut stage_enumerate(const RunContext& ctx) {
  corpus::CorpusStore store(ctx.corpus_dir().string());
  corpus::BaselineCache cache(ctx.baselines_path().string());
  auto backend = ctx.make_backend();

  ordered_json training = ordered_json::object();
  std::size_t total = 0;
  for (const std::string& id : ctx.problem.training_instances) {
    const corpus::TrainingCorpus tc = corpus::enumerate_training_corpus(
        ctx.problem, id, ctx.config.enumeration_target,
        ctx.config.enumeration_budget_s, *backend, &store, ctx.config.seed);
    total += tc.solutions.size();
    training[id] = ordered_json{{"solutions", tc.solutions.size()},
                                {"exhausted", tc.exhausted},
                                {"fewer_than_target", tc.fewer_than_target}};
  }

  ordered_json baselines = ordered_json::object();
  std::vector<std::string> all = ctx.problem.training_instances;
  all.insert(all.end(), ctx.problem.test_instances.begin(),
             ctx.problem.test_instances.end());
  for (const std::string& id : all) {
    const corpus::SolveOutcome out = corpus::baseline_solve(
        ctx.problem, id, ctx.config.baseline_timeout_s, *backend, cache,
        ctx.config.seed);
    baselines[id] = ordered_json{{"status", corpus::run_status_name(out.status)},
                                 {"elapsed_s", out.elapsed_s}};
  }

  StageOut out;
  out.outputs = ordered_json{{"training", training}, {"baselines", baselines}};
  out.message = std::to_string(total) + " training solutions across " +
                std::to_string(ctx.problem.training_instances.size()) +
                " instances; " + std::to_string(all.size()) +
                " baselines cached";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: encode
// ---------------------------------------------------------------------------

StageOut stage_encode(const RunContext& ctx) {
  corpus::CorpusStore store(ctx.corpus_dir().string());
  ordered_json instances = ordered_json::object();
  std::size_t total = 0;
  for (const std::string& id : ctx.problem.training_instances) {
    const minicp::Instance instance = corpus::resolve_instance(ctx.problem, id);
    const std::vector<minicp::Solution> solutions =
        store.load(ctx.problem.id, id);
    if (solutions.empty()) {
      throw PipelineError("no stored solutions for instance '" + id +
                          "'; re-run 'enumerate'");
    }
    std::vector<encode::SolutionTensor> tensors;
    tensors.reserve(solutions.size());
    for (const minicp::Solution& s : solutions) {
      tensors.push_back(encode::encode(ctx.problem.kind, instance, s));
    }
    write_text(ctx.encoded_path(id), join_tensors(tensors));
    total += tensors.size();
    instances[id] = ordered_json{{"tensors", tensors.size()},
                                 {"channels", tensors[0].channels},
                                 {"height", tensors[0].height},
                                 {"width", tensors[0].width}};
  }
  StageOut out;
  out.outputs = ordered_json{{"instances", instances}};
  out.message = std::to_string(total) + " tensors encoded";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: props
// ---------------------------------------------------------------------------

StageOut stage_props(const RunContext& ctx) {
  corpus::CorpusStore store(ctx.corpus_dir().string());
  const std::vector<std::string>& catalog = props::catalog(ctx.problem.kind);

  ordered_json instances = ordered_json::object();
  std::ostringstream table;
  std::map<std::string, std::vector<std::pair<double, props::PropertyStats>>>
      by_property;

  for (const std::string& id : ctx.problem.training_instances) {
    const minicp::Instance instance = corpus::resolve_instance(ctx.problem, id);
    const std::vector<minicp::Solution> solutions =
        store.load(ctx.problem.id, id);
    const std::vector<encode::SolutionTensor> tensors =
        split_tensors(read_text(ctx.encoded_path(id)));
    if (tensors.size() != solutions.size()) {
      throw PipelineError("instance '" + id + "' has " +
                          std::to_string(solutions.size()) + " solutions but " +
                          std::to_string(tensors.size()) +
                          " tensors; re-run 'encode'");
    }
    std::vector<std::vector<double>> vectors;
    vectors.reserve(solutions.size());
    for (std::size_t i = 0; i < solutions.size(); ++i) {
      vectors.push_back(
          props::compute_properties(tensors[i], instance, solutions[i]));
    }
    const std::vector<props::PropertyStats> stats =
        props::classify_properties(vectors);
    const double size = tensors[0].height;

    ordered_json stats_arr = ordered_json::array();
    for (const props::PropertyStats& s : stats) stats_arr.push_back(stats_json(s));
    write_text(ctx.props_path(id),
               ordered_json{{"instance", id},
                            {"size", size},
                            {"catalog", catalog},
                            {"vectors", vectors},
                            {"stats", stats_arr}}
                       .dump(2) +
                   "\n");

    table << "== instance " << id << " (size " << size << ", "
          << vectors.size() << " solutions) ==\n"
          << props::stats_table(ctx.problem.kind, stats) << "\n";
    for (std::size_t p = 0; p < catalog.size(); ++p) {
      by_property[catalog[p]].emplace_back(size, stats[p]);
    }
    instances[id] =
        ordered_json{{"rows", vectors.size()}, {"size", size}};
  }

  ordered_json progression = ordered_json::object();
  for (const std::string& id : catalog) {
    const props::Progression prog = props::progression(by_property[id]);
    ordered_json rows = ordered_json::array();
    for (const props::ProgressionRow& r : prog.rows) {
      rows.push_back(ordered_json{
          {"size", r.size}, {"mean", r.mean}, {"min", r.min}, {"max", r.max}});
    }
    progression[id] = ordered_json{{"rows", rows},
                                   {"has_fit", prog.has_fit},
                                   {"slope", prog.slope},
                                   {"intercept", prog.intercept}};
  }
  write_text(ctx.progression_path(), progression.dump(2) + "\n");
  write_text(ctx.props_table_path(), table.str());

  StageOut out;
  out.outputs = ordered_json{{"instances", instances},
                             {"catalog", catalog.size()}};
  out.message = std::to_string(catalog.size()) + " properties over " +
                std::to_string(ctx.problem.training_instances.size()) +
                " instances";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: train
// ---------------------------------------------------------------------------

StageOut stage_train(const RunContext& ctx) {
  // The network needs one fixed input shape; training instances are grouped
  // by tensor shape and the largest group (ties: the one seen first) forms
  // the contrastive corpus.
  struct Group {
    std::vector<std::string> instances;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
  };
  std::map<std::string, Group> groups;
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<encode::SolutionTensor>> tensors_of;
  for (const std::string& id : ctx.problem.training_instances) {
    std::vector<encode::SolutionTensor> tensors =
        split_tensors(read_text(ctx.encoded_path(id)));
    if (tensors.empty()) {
      throw PipelineError("instance '" + id +
                          "' has no tensors; re-run 'encode'");
    }
    const std::string key = std::to_string(tensors[0].channels) + "x" +
                            std::to_string(tensors[0].height) + "x" +
                            std::to_string(tensors[0].width);
    if (groups.find(key) == groups.end()) group_order.push_back(key);
    Group& g = groups[key];
    g.instances.push_back(id);
    g.counts.push_back(tensors.size());
    g.total += tensors.size();
    tensors_of[id] = std::move(tensors);
  }
  std::string best = group_order[0];
  for (const std::string& key : group_order) {
    if (groups[key].total > groups[best].total) best = key;
  }
  const Group& corpus_group = groups[best];

  std::vector<encode::SolutionTensor> positives;
  positives.reserve(corpus_group.total);
  ordered_json corpus_instances = ordered_json::array();
  for (std::size_t i = 0; i < corpus_group.instances.size(); ++i) {
    const std::string& id = corpus_group.instances[i];
    for (encode::SolutionTensor& t : tensors_of[id]) {
      positives.push_back(std::move(t));
    }
    corpus_instances.push_back(ordered_json{
        {"instance", id}, {"count", corpus_group.counts[i]}});
  }

  const std::vector<cnn::NegativeSample> negatives =
      cnn::generate_negatives(positives, ctx.config.seed);
  const cnn::TrainResult result =
      cnn::train_contrastive(positives, negatives, ctx.config.cnn);

  ordered_json reports = ordered_json::array();
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const cnn::SeedReport& r = result.reports[i];
    cnn::save_model(result.models[i], ctx.model_path(r.seed).string());
    reports.push_back(ordered_json{{"seed", r.seed},
                                   {"holdout_accuracy", r.holdout_accuracy},
                                   {"epochs_run", r.epochs_run},
                                   {"final_loss", r.final_loss},
                                   {"no_signal", r.no_signal}});
  }
  write_text(ctx.reports_path(), reports.dump(2) + "\n");

  ordered_json records = ordered_json::array();
  for (const cnn::FilterRecord& r : result.records) {
    records.push_back(filter_record_json(r));
  }
  write_text(ctx.filters_path(), records.dump() + "\n");

  const std::vector<cnn::ContrastPair> pairs =
      cnn::select_contrast_pairs(result.records, positives.size());
  ordered_json pairs_arr = ordered_json::array();
  std::size_t degenerate = 0;
  for (const cnn::ContrastPair& p : pairs) {
    if (p.degenerate) ++degenerate;
    pairs_arr.push_back(pair_json(p));
  }
  write_text(ctx.pairs_path(), pairs_arr.dump() + "\n");

  double best_accuracy = 0.0;
  for (const cnn::SeedReport& r : result.reports) {
    best_accuracy = std::max(best_accuracy, r.holdout_accuracy);
  }

  StageOut out;
  out.outputs = ordered_json{{"corpus_instances", corpus_instances},
                             {"corpus_size", positives.size()},
                             {"shape", best},
                             {"reports", reports},
                             {"filter_records", result.records.size()},
                             {"contrast_pairs", pairs.size()},
                             {"degenerate_pairs", degenerate}};
  out.message = std::to_string(result.reports.size()) +
                " seeds trained on " + std::to_string(positives.size()) +
                " positives; best held-out accuracy " +
                fixed(best_accuracy, 3);
  return out;
}

// ---------------------------------------------------------------------------
// Stage: correlate
// ---------------------------------------------------------------------------

std::vector<std::string> corpus_instance_ids(const RunContext& ctx) {
  const ordered_json manifest = load_json(ctx.manifest_path(Stage::Train));
  std::vector<std::string> out;
  for (const ordered_json& entry :
       manifest.at("outputs").at("corpus_instances")) {
    out.push_back(entry.at("instance").get<std::string>());
  }
  return out;
}

StageOut stage_correlate(const RunContext& ctx) {
  std::vector<cnn::FilterRecord> records;
  for (const ordered_json& j : load_json(ctx.filters_path())) {
    records.push_back(filter_record_from_json(j));
  }

  const std::vector<std::string> corpus_ids = corpus_instance_ids(ctx);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> catalog;
  for (const std::string& id : corpus_ids) {
    const InstanceProps p = load_props(ctx.props_path(id));
    if (catalog.empty()) catalog = p.catalog;
    rows.insert(rows.end(), p.vectors.begin(), p.vectors.end());
  }
  std::vector<correlate::PropertyVector> properties(catalog.size());
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    properties[c].id = catalog[c];
    properties[c].values.reserve(rows.size());
    for (const std::vector<double>& row : rows) {
      properties[c].values.push_back(row[c]);
    }
  }

  const correlate::CorrelationMatrix matrix =
      correlate::correlate(records, properties);
  const std::vector<props::PropertyStats> pooled_stats =
      props::classify_properties(rows);
  const std::vector<correlate::RankedProperty> ranking =
      correlate::rank_properties(matrix, pooled_stats);

  write_text(ctx.matrix_path(), matrix_json(matrix).dump() + "\n");
  ordered_json ranking_arr = ordered_json::array();
  for (const correlate::RankedProperty& r : ranking) {
    ranking_arr.push_back(ordered_json{
        {"id", r.id}, {"score", r.score}, {"implied", r.implied}});
  }
  write_text(ctx.ranking_path(), ranking_arr.dump(2) + "\n");
  write_text(ctx.matrix_table_path(), correlate::matrix_table(matrix));

  ordered_json top = ordered_json::array();
  for (std::size_t i = 0; i < ranking.size() && i < 5; ++i) {
    top.push_back(ranking[i].id);
  }

  StageOut out;
  out.outputs = ordered_json{{"filters", matrix.filters.size()},
                             {"properties", matrix.properties.size()},
                             {"corpus_size", matrix.corpus_size},
                             {"top_properties", top}};
  out.message = std::to_string(matrix.filters.size()) + " filters x " +
                std::to_string(matrix.properties.size()) +
                " properties correlated";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: synth
// ---------------------------------------------------------------------------

StageOut stage_synth(const RunContext& ctx) {
  corpus::CorpusStore store(ctx.corpus_dir().string());
  auto llm = ctx.make_llm();
  const std::string model_text = ctx.model_text();

  const correlate::CorrelationMatrix matrix =
      matrix_from_json(load_json(ctx.matrix_path()));
  std::vector<correlate::RankedProperty> ranking;
  for (const ordered_json& j : load_json(ctx.ranking_path())) {
    ranking.push_back({j.at("id").get<std::string>(),
                       j.at("score").get<double>(),
                       j.at("implied").get<bool>()});
  }
  const std::map<std::string, props::Progression> progressions =
      load_progressions(ctx.progression_path());

  // The payload carries the size progression of the best-ranked property
  // that actually has a cross-size fit.
  std::optional<props::Progression> payload_progression;
  for (const correlate::RankedProperty& r : ranking) {
    auto it = progressions.find(r.id);
    if (it != progressions.end() && it->second.has_fit) {
      payload_progression = it->second;
      break;
    }
  }

  std::vector<std::string> diagnostics;
  std::map<std::string, std::vector<synth::CandidateStreamliner>> per_instance;
  std::size_t n_stats = 0, n_discovery = 0, n_templates = 0, payloads = 0;

  // Statistics path: one payload per training instance.
  for (const std::string& id : ctx.problem.training_instances) {
    const minicp::Instance instance = corpus::resolve_instance(ctx.problem, id);
    const InstanceProps p = load_props(ctx.props_path(id));

    std::vector<std::string> samples;
    const std::vector<minicp::Solution> solutions =
        store.load(ctx.problem.id, id);
    const std::size_t want =
        std::min<std::size_t>(solutions.size(),
                              static_cast<std::size_t>(
                                  std::max(0, ctx.config.sample_solutions)));
    for (std::size_t i = 0; i < want; ++i) {
      samples.push_back(solution_text(instance, solutions[i]));
    }

    const synth::StatsPayload payload = synth::build_stats_payload(
        matrix, ranking, p.stats, samples, payload_progression, model_text,
        ctx.config.generation);
    const std::string response =
        llm->complete(payload.text, ctx.config.generation);
    ++payloads;
    synth::ParsedCandidates parsed = synth::parse_candidates(
        response, instance, synth::Method::LlmStats, id, ctx.config.seed);
    for (const std::string& d : parsed.diagnostics) {
      diagnostics.push_back("stats[" + id + "]: " + d);
    }
    n_stats += parsed.candidates.size();
    auto& bucket = per_instance[id];
    bucket.insert(bucket.end(), parsed.candidates.begin(),
                  parsed.candidates.end());
  }

  // Discovery path: contrast pairs over the contrastive corpus.
  std::vector<cnn::ContrastPair> pairs;
  for (const ordered_json& j : load_json(ctx.pairs_path())) {
    pairs.push_back(pair_from_json(j));
  }
  const std::vector<std::string> corpus_ids = corpus_instance_ids(ctx);
  std::vector<std::string> corpus_texts;
  for (const std::string& id : corpus_ids) {
    const minicp::Instance instance = corpus::resolve_instance(ctx.problem, id);
    for (const minicp::Solution& s : store.load(ctx.problem.id, id)) {
      corpus_texts.push_back(solution_text(instance, s));
    }
  }
  const std::string& discovery_home = corpus_ids.front();
  const minicp::Instance discovery_instance =
      corpus::resolve_instance(ctx.problem, discovery_home);
  std::size_t sent = 0, suppressed = 0;
  for (const cnn::ContrastPair& pair : pairs) {
    if (ctx.config.max_discovery_payloads > 0 &&
        sent >= static_cast<std::size_t>(ctx.config.max_discovery_payloads)) {
      break;
    }
    const synth::DiscoveryPayload payload = synth::build_discovery_payload(
        pair, corpus_texts, model_text, ctx.config.generation);
    if (payload.suppressed) {
      ++suppressed;
      diagnostics.push_back("discovery: payload suppressed (" +
                            payload.reason + ")");
      continue;
    }
    const std::string response =
        llm->complete(payload.text, ctx.config.generation);
    ++payloads;
    ++sent;
    synth::ParsedCandidates parsed = synth::parse_candidates(
        response, discovery_instance, synth::Method::LlmDiscovery,
        discovery_home, ctx.config.seed);
    for (const std::string& d : parsed.diagnostics) {
      diagnostics.push_back("discovery: " + d);
    }
    n_discovery += parsed.candidates.size();
    auto& bucket = per_instance[discovery_home];
    bucket.insert(bucket.end(), parsed.candidates.begin(),
                  parsed.candidates.end());
  }

  // Mechanical template path, per training instance.
  const std::vector<std::string>& catalog = props::catalog(ctx.problem.kind);
  for (const std::string& id : ctx.problem.training_instances) {
    const minicp::Instance instance = corpus::resolve_instance(ctx.problem, id);
    const InstanceProps p = load_props(ctx.props_path(id));
    std::vector<std::string> skipped;
    std::vector<synth::CandidateStreamliner> templates =
        synth::synthesize_templates(ctx.problem.kind, catalog, p.stats,
                                    instance, id, &skipped);
    for (const std::string& s : skipped) {
      diagnostics.push_back("template[" + id + "]: " + s);
    }
    n_templates += templates.size();
    auto& bucket = per_instance[id];
    bucket.insert(bucket.end(), templates.begin(), templates.end());
  }

  // Per-instance dedup; cross-instance merging is the pool stage's job.
  std::vector<synth::CandidateStreamliner> all;
  for (const std::string& id : ctx.problem.training_instances) {
    auto it = per_instance.find(id);
    if (it == per_instance.end()) continue;
    const std::vector<synth::CandidateStreamliner> unique =
        synth::dedup(it->second);
    all.insert(all.end(), unique.begin(), unique.end());
  }
  synth::save_candidates(ctx.candidates_path().string(), all);

  std::ostringstream diag;
  for (const std::string& d : diagnostics) diag << d << "\n";
  write_text(ctx.synth_diag_path(), diag.str());

  StageOut out;
  out.outputs = ordered_json{{"candidates", all.size()},
                             {"from_stats", n_stats},
                             {"from_discovery", n_discovery},
                             {"from_templates", n_templates},
                             {"payloads_sent", payloads},
                             {"suppressed_payloads", suppressed},
                             {"diagnostics", diagnostics.size()}};
  out.message = std::to_string(all.size()) + " candidates (" +
                std::to_string(n_stats) + " stats, " +
                std::to_string(n_discovery) + " discovery, " +
                std::to_string(n_templates) + " template)";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: pool
// ---------------------------------------------------------------------------

StageOut stage_pool(const RunContext& ctx) {
  const std::vector<synth::CandidateStreamliner> candidates =
      synth::load_candidates(ctx.candidates_path().string());
  std::map<std::string, std::vector<synth::CandidateStreamliner>> per_instance;
  for (const synth::CandidateStreamliner& c : candidates) {
    per_instance[c.instance_id].push_back(c);
  }
  const std::vector<pool::PooledCandidate> pooled =
      pool::pool_across_instances(per_instance);

  auto llm = ctx.make_llm();
  pool::ClusterResult clustered;
  try {
    clustered = pool::cluster(pooled, llm.get());
  } catch (const std::exception& e) {
    clustered = pool::cluster(pooled, nullptr);
    clustered.diagnostics.push_back(
        std::string("clustering backend unavailable (") + e.what() +
        "); grouped by signature instead");
  }

  const std::map<std::string, props::Progression> progressions =
      load_progressions(ctx.progression_path());
  const auto progression_for =
      [&](const pool::SemanticCluster& cluster)
      -> std::optional<props::Progression> {
    for (const pool::PooledCandidate& member : cluster.members) {
      const std::string& prop = member.candidate.property_id;
      if (prop.empty()) continue;
      auto it = progressions.find(prop);
      if (it != progressions.end() && it->second.has_fit) return it->second;
    }
    return std::nullopt;
  };

  std::vector<pool::Representative> representatives;
  std::ostringstream report;
  for (const pool::SemanticCluster& cluster : clustered.clusters) {
    const std::optional<props::Progression> prog = progression_for(cluster);
    const std::vector<pool::Representative> reps =
        pool::expand_representatives(cluster, prog);
    representatives.insert(representatives.end(), reps.begin(), reps.end());
    report << pool::cluster_report({cluster}, prog);
  }
  if (!clustered.diagnostics.empty()) {
    report << "clustering notes:\n";
    for (const std::string& d : clustered.diagnostics) {
      report << "  " << d << "\n";
    }
  }

  std::vector<synth::CandidateStreamliner> flat;
  flat.reserve(representatives.size());
  for (const pool::Representative& r : representatives) {
    flat.push_back(r.candidate);
  }
  synth::save_candidates(ctx.representatives_path().string(), flat);
  write_text(ctx.pool_report_path(), report.str());

  StageOut out;
  out.outputs = ordered_json{{"candidates", candidates.size()},
                             {"pooled", pooled.size()},
                             {"clusters", clustered.clusters.size()},
                             {"representatives", representatives.size()},
                             {"diagnostics", clustered.diagnostics.size()}};
  out.message = std::to_string(pooled.size()) + " pooled into " +
                std::to_string(clustered.clusters.size()) + " clusters -> " +
                std::to_string(representatives.size()) + " representatives";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: validate
// ---------------------------------------------------------------------------

StageOut stage_validate(const RunContext& ctx) {
  const std::vector<synth::CandidateStreamliner> pool_cands =
      synth::load_candidates(ctx.representatives_path().string());
  corpus::BaselineCache cache(ctx.baselines_path().string());
  const std::map<std::string, double> train_baselines =
      baseline_map(ctx, cache, ctx.problem.training_instances);
  const std::map<std::string, double> test_baselines =
      baseline_map(ctx, cache, ctx.problem.test_instances);

  auto backend = ctx.make_backend();
  BackendCandidateSolver solver(ctx.problem, *backend, ctx.config.seed);
  fs::create_directories(ctx.train_records_path().parent_path());

  valid::ValidationConfig train_cfg;
  train_cfg.seed = ctx.config.seed;
  train_cfg.parallelism = ctx.config.validate_parallelism;
  train_cfg.checkpoint_path = ctx.train_records_path().string();
  const valid::TrainValidation train = valid::validate_phase_train(
      pool_cands, ctx.problem.training_instances, train_baselines, solver,
      train_cfg);

  valid::ValidationConfig test_cfg = train_cfg;
  test_cfg.checkpoint_path = ctx.test_records_path().string();
  const std::vector<valid::ValidationRecord> test_records =
      valid::validate_phase_test(train.survivors, ctx.problem.test_instances,
                                 test_baselines, solver, test_cfg);

  // Canonicalize both record files (the checkpoints list them in completion
  // order; the archive is candidate-major and byte-stable across re-runs).
  valid::save_records(ctx.train_records_path().string(), train.records);
  valid::save_records(ctx.test_records_path().string(), test_records);
  synth::save_candidates(ctx.survivors_path().string(), train.survivors);

  // Survivor ids under the full pool (training records) and under the
  // survivor-only pool (test records) can differ when descriptors collide;
  // the summary carries both so the race stage joins scores to test records.
  const std::vector<std::string> pool_ids = valid::candidate_ids(pool_cands);
  const std::vector<std::string> test_ids =
      valid::candidate_ids(train.survivors);
  std::vector<bool> used(pool_cands.size(), false);
  ordered_json survivors = ordered_json::array();
  for (std::size_t s = 0; s < train.survivors.size(); ++s) {
    std::size_t index = pool_cands.size();
    for (std::size_t i = 0; i < pool_cands.size(); ++i) {
      if (!used[i] && pool_cands[i] == train.survivors[s]) {
        index = i;
        break;
      }
    }
    if (index == pool_cands.size()) {
      throw PipelineError("survivor '" + test_ids[s] +
                          "' does not match any pooled candidate");
    }
    used[index] = true;
    const std::string& train_id = pool_ids[index];
    const auto score = train.scores.find(train_id);
    survivors.push_back(ordered_json{
        {"train_id", train_id},
        {"test_id", test_ids[s]},
        {"score", score == train.scores.end() ? 0.0 : score->second}});
  }
  write_text(ctx.validate_summary_path(),
             ordered_json{{"candidates", pool_cands.size()},
                          {"survivors", survivors}}
                     .dump(2) +
                 "\n");

  StageOut out;
  out.outputs = ordered_json{{"candidates", pool_cands.size()},
                             {"survivors", train.survivors.size()},
                             {"train_records", train.records.size()},
                             {"test_records", test_records.size()}};
  out.message = std::to_string(pool_cands.size()) + " candidates -> " +
                std::to_string(train.survivors.size()) +
                " survivors; " + std::to_string(test_records.size()) +
                " held-out records";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: race
// ---------------------------------------------------------------------------

std::vector<valid::ValidationRecord> load_records_or_empty(
    const fs::path& path) {
  if (!fs::exists(path)) return {};
  return valid::load_records(path.string());
}

StageOut stage_race(const RunContext& ctx) {
  const ordered_json summary = load_json(ctx.validate_summary_path());
  std::vector<portfolio::ScoredCandidate> scored;
  for (const ordered_json& s : summary.at("survivors")) {
    scored.push_back({s.at("test_id").get<std::string>(),
                      s.at("score").get<double>()});
  }
  const std::vector<valid::ValidationRecord> test_records =
      load_records_or_empty(ctx.test_records_path());
  const portfolio::RecordIndex index(test_records);

  corpus::BaselineCache cache(ctx.baselines_path().string());
  const std::map<std::string, double> baselines =
      baseline_map(ctx, cache, ctx.problem.test_instances);

  const portfolio::PortfolioPlan plan =
      portfolio::select_family_budget(scored, ctx.config.k, ctx.config.m);
  const std::vector<portfolio::RaceRow> rows = portfolio::race_all(
      plan, index, ctx.problem.test_instances, baselines);
  portfolio::Savings savings;
  if (!rows.empty()) savings = portfolio::portfolio_savings(rows);

  const std::vector<portfolio::SweepCell> sweep = portfolio::sweep_km(
      scored, index, ctx.problem.test_instances, baselines, {1, 2, 3},
      {1, 2, 3, 0});

  write_text(ctx.race_plan_path(), portfolio::plan_summary(plan));
  write_text(ctx.race_table_path(), portfolio::race_table(rows));
  write_text(ctx.sweep_table_path(), portfolio::sweep_table(sweep));
  write_text(ctx.savings_path(),
             ordered_json{{"k", ctx.config.k},
                          {"m", ctx.config.m},
                          {"lanes", plan.lanes.size()},
                          {"wall_clock", savings.wall_clock},
                          {"cpu_adjusted", savings.cpu_adjusted}}
                     .dump(2) +
                 "\n");

  StageOut out;
  out.outputs = ordered_json{{"k", ctx.config.k},
                             {"m", ctx.config.m},
                             {"lanes", plan.lanes.size()},
                             {"wall_clock", savings.wall_clock},
                             {"cpu_adjusted", savings.cpu_adjusted},
                             {"sweep_cells", sweep.size()}};
  out.message = "wall-clock savings " + fixed(savings.wall_clock, 4) +
                ", cpu-adjusted " + fixed(savings.cpu_adjusted, 4) + " over " +
                std::to_string(rows.size()) + " held-out instances";
  return out;
}

// ---------------------------------------------------------------------------
// Stage: report
// ---------------------------------------------------------------------------

StageOut stage_report(const RunContext& ctx) {
  const std::vector<valid::ValidationRecord> test_records =
      load_records_or_empty(ctx.test_records_path());
  corpus::BaselineCache cache(ctx.baselines_path().string());
  const std::map<std::string, double> baselines =
      baseline_map(ctx, cache, ctx.problem.test_instances);

  valid::MetricsReport metrics = valid::build_metrics(
      test_records, ctx.problem.test_instances, baselines);
  const ordered_json savings = load_json(ctx.savings_path());
  metrics.wall_clock_savings = savings.at("wall_clock").get<double>();
  metrics.cpu_adjusted_savings = savings.at("cpu_adjusted").get<double>();

  std::vector<cnn::FilterRecord> filters;
  for (const ordered_json& j : load_json(ctx.filters_path())) {
    filters.push_back(filter_record_from_json(j));
  }

  const fs::path dir = ctx.report_dir();
  write_text(dir / "metrics.txt", valid::metrics_table(metrics));
  write_text(dir / "records.tsv", valid::records_table(test_records));
  write_text(dir / "heatmap.tsv",
             heatmap_table(test_records, ctx.problem.test_instances,
                           baselines));
  write_text(dir / "activation_maps.txt", activation_map_grids(filters));
  write_text(dir / "portfolio.txt", read_text(ctx.race_plan_path()) + "\n" +
                                        read_text(ctx.race_table_path()) +
                                        "\n" +
                                        read_text(ctx.sweep_table_path()));

  StageOut out;
  out.outputs = ordered_json{
      {"files",
       {"metrics.txt", "records.tsv", "heatmap.tsv", "activation_maps.txt",
        "portfolio.txt"}}};
  out.message = "report written to " + dir.string();
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

StageOut dispatch(const RunContext& ctx, Stage stage) {
  switch (stage) {
    case Stage::Enumerate: return stage_enumerate(ctx);
    case Stage::Encode: return stage_encode(ctx);
    case Stage::Props: return stage_props(ctx);
    case Stage::Train: return stage_train(ctx);
    case Stage::Correlate: return stage_correlate(ctx);
    case Stage::Synth: return stage_synth(ctx);
    case Stage::Pool: return stage_pool(ctx);
    case Stage::Validate: return stage_validate(ctx);
    case Stage::Race: return stage_race(ctx);
    case Stage::Report: return stage_report(ctx);
  }
  throw PipelineError("unknown stage");
}

}  // namespace

StageResult run_stage(const RunConfig& config, Stage stage) {
  validate_config(config);
  const corpus::ProblemSpec* problem = find_problem(config.problem_id);
  RunContext ctx{config, *problem, fs::path(config.out_dir)};

  fs::create_directories(ctx.root / "stages");
  const std::string canonical = config_to_json(config);
  if (fs::exists(ctx.config_path())) {
    if (read_text(ctx.config_path()) != canonical) {
      throw PipelineError(
          "run directory '" + config.out_dir +
          "' was initialized with a different configuration; use a fresh "
          "directory or restore the original settings");
    }
  } else {
    write_text(ctx.config_path(), canonical);
  }

  StageResult result;
  result.stage = stage;
  if (fs::exists(ctx.manifest_path(stage))) {
    result.skipped = true;
    result.message = "artifacts already present";
    return result;
  }
  for (Stage pre : prerequisites(stage)) {
    if (!fs::exists(ctx.manifest_path(pre))) {
      throw PipelineError(std::string("stage '") + stage_name(stage) +
                          "' requires artifacts from stage '" +
                          stage_name(pre) + "'; run '" + stage_name(pre) +
                          "' first");
    }
  }

  const auto start = std::chrono::steady_clock::now();
  StageOut body = dispatch(ctx, stage);
  result.elapsed_s = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  result.message = body.message;

  write_text(ctx.manifest_path(stage),
             ordered_json{{"stage", stage_name(stage)},
                          {"elapsed_s", result.elapsed_s},
                          {"message", body.message},
                          {"outputs", body.outputs}}
                     .dump(2) +
                 "\n");
  return result;
}

std::vector<StageResult> run_all(const RunConfig& config) {
  std::vector<StageResult> results;
  for (Stage stage : stage_order()) {
    results.push_back(run_stage(config, stage));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

std::string heatmap_table(const std::vector<valid::ValidationRecord>& records,
                          const std::vector<std::string>& instance_ids,
                          const std::map<std::string, double>& baselines) {
  for (const std::string& id : instance_ids) {
    if (baselines.find(id) == baselines.end()) {
      throw PipelineError("no baseline for instance '" + id + "'");
    }
  }
  // Columns: instances by ascending baseline time.
  std::vector<std::string> columns = instance_ids;
  std::stable_sort(columns.begin(), columns.end(),
                   [&](const std::string& a, const std::string& b) {
                     return baselines.at(a) < baselines.at(b);
                   });

  // Rows: candidates by descending SAT-retention count, ties by id.
  std::vector<std::string> candidates;
  std::map<std::string, int> sat_count;
  std::map<std::string, const valid::ValidationRecord*> by_pair;
  for (const valid::ValidationRecord& r : records) {
    if (sat_count.find(r.candidate_id) == sat_count.end()) {
      candidates.push_back(r.candidate_id);
      sat_count[r.candidate_id] = 0;
    }
    if (r.status == valid::Status::Sat) ++sat_count[r.candidate_id];
    by_pair.emplace(r.candidate_id + "\t" + r.instance_id, &r);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](const std::string& a, const std::string& b) {
              if (sat_count[a] != sat_count[b]) {
                return sat_count[a] > sat_count[b];
              }
              return a < b;
            });

  std::ostringstream out;
  out << "candidate";
  for (const std::string& id : columns) out << "\t" << id;
  out << "\n";
  for (const std::string& cand : candidates) {
    out << cand;
    for (const std::string& id : columns) {
      out << "\t";
      auto it = by_pair.find(cand + "\t" + id);
      if (it == by_pair.end()) {
        out << "TIMEOUT";
        continue;
      }
      const valid::ValidationRecord& r = *it->second;
      if (r.status == valid::Status::Unsat) {
        out << "UNSAT";
        continue;
      }
      const std::optional<double> speedup = valid::per_instance_speedup(r);
      if (!speedup) {
        out << "TIMEOUT";
        continue;
      }
      out << fixed(std::log10(*speedup), 4);
    }
    out << "\n";
  }
  return out.str();
}

std::string activation_map_grids(
    const std::vector<cnn::FilterRecord>& records) {
  std::ostringstream out;
  out << "# corpus-average activation maps (post-ReLU)\n";
  for (const cnn::FilterRecord& r : records) {
    out << "seed " << r.seed << " layer " << r.layer << " filter " << r.filter
        << " (" << r.map_height << "x" << r.map_width << ")\n";
    for (int h = 0; h < r.map_height; ++h) {
      for (int w = 0; w < r.map_width; ++w) {
        if (w > 0) out << " ";
        out << fixed(
            r.mean_map[static_cast<std::size_t>(h) *
                           static_cast<std::size_t>(r.map_width) +
                       static_cast<std::size_t>(w)],
            4);
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace streamforge::cli

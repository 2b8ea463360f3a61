#include "streamforge/corpus/backend.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "streamforge/minicp/parse.hpp"
#include "streamforge/minicp/solve.hpp"
#include "streamforge/util/digest.hpp"
#include "subprocess.hpp"

namespace streamforge::corpus {

namespace {

/// Stand-in budget forwarded to the subprocess when no budget was given.
constexpr double kNoBudgetSeconds = 3600.0;

RunStatus from_minicp(minicp::SolveStatus status) {
  switch (status) {
    case minicp::SolveStatus::Sat: return RunStatus::Sat;
    case minicp::SolveStatus::Unsat: return RunStatus::Unsat;
    case minicp::SolveStatus::Timeout: return RunStatus::Timeout;
  }
  return RunStatus::Error;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

// ---- builtin ---------------------------------------------------------------

EnumerateOutcome BuiltinBackend::enumerate(const ProblemSpec& problem,
                                           const std::string& instance_id,
                                           std::size_t limit, double budget_s,
                                           unsigned seed) {
  EnumerateOutcome out;
  out.backend_id = id();
  out.seed = seed;
  minicp::SolveOptions options;
  options.solution_limit = limit;
  options.time_budget_s = budget_s;
  try {
    minicp::Instance instance = resolve_instance(problem, instance_id);
    minicp::SolveResult result = minicp::solve(instance, options);
    out.status = from_minicp(result.status);
    out.solutions = std::move(result.solutions);
    out.exhausted = result.exhausted;
    out.elapsed_s = result.elapsed_s;
  } catch (const std::exception& e) {
    out.status = RunStatus::Error;
    out.diagnostics = e.what();
  }
  return out;
}

SolveOutcome BuiltinBackend::solve_one(
    const ProblemSpec& problem, const std::string& instance_id,
    const std::vector<std::string>& extra_constraints, double budget_s,
    unsigned seed) {
  SolveOutcome out;
  out.backend_id = id();
  out.seed = seed;
  try {
    minicp::Instance instance = resolve_instance(problem, instance_id);
    minicp::SolveOptions options;
    options.solution_limit = 1;
    options.time_budget_s = budget_s;
    try {
      for (const std::string& text : extra_constraints) {
        options.extra_constraints.push_back(
            minicp::parse_constraint(text, instance));
      }
    } catch (const std::exception& e) {
      out.status = RunStatus::Error;
      out.diagnostics = e.what();
      return out;
    }
    minicp::SolveResult result = minicp::solve(instance, options);
    out.status = from_minicp(result.status);
    out.elapsed_s = result.elapsed_s;
    if (out.status == RunStatus::Sat) {
      out.solution = std::move(result.solutions.front());
    }
  } catch (const std::exception& e) {
    out.status = RunStatus::Error;
    out.diagnostics = e.what();
  }
  return out;
}

// ---- output parsing --------------------------------------------------------

namespace {

std::vector<long long> parse_int_list(const std::string& text,
                                      const std::string& context) {
  std::vector<long long> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    if (token == "true") {
      values.push_back(1);
    } else if (token == "false") {
      values.push_back(0);
    } else {
      try {
        values.push_back(std::stoll(token));
      } catch (const std::exception&) {
        throw CorpusError(CorpusError::Reason::BackendFailure,
                          "cannot parse solver value '" + token + "' in " + context);
      }
    }
  }
  return values;
}

std::pair<long long, long long> parse_range(const std::string& text,
                                            const std::string& context) {
  auto dots = text.find("..");
  if (dots == std::string::npos) {
    throw CorpusError(CorpusError::Reason::BackendFailure,
                      "expected an index range in " + context);
  }
  try {
    return {std::stoll(trim(text.substr(0, dots))),
            std::stoll(trim(text.substr(dots + 2)))};
  } catch (const std::exception&) {
    throw CorpusError(CorpusError::Reason::BackendFailure,
                      "cannot parse index range '" + text + "' in " + context);
  }
}

minicp::ValueArray parse_value(const std::string& raw, const std::string& name) {
  const std::string text = trim(raw);
  const std::string context = "assignment to '" + name + "'";
  if (text.rfind("array1d", 0) == 0 || text.rfind("array2d", 0) == 0) {
    auto open = text.find('(');
    auto bracket = text.find('[', open);
    auto close = text.rfind(']');
    if (open == std::string::npos || bracket == std::string::npos ||
        close == std::string::npos || close < bracket) {
      throw CorpusError(CorpusError::Reason::BackendFailure,
                        "malformed array literal in " + context);
    }
    std::vector<long long> values =
        parse_int_list(text.substr(bracket + 1, close - bracket - 1), context);
    std::string head = text.substr(open + 1, bracket - open - 1);
    std::vector<std::pair<long long, long long>> ranges;
    std::istringstream in(head);
    std::string part;
    while (std::getline(in, part, ',')) {
      part = trim(part);
      if (part.empty()) continue;
      ranges.push_back(parse_range(part, context));
    }
    minicp::ValueArray out;
    long long expected = 1;
    for (const auto& [lo, hi] : ranges) {
      out.dims.push_back(hi - lo + 1);
      expected *= hi - lo + 1;
    }
    if (expected != static_cast<long long>(values.size())) {
      throw CorpusError(CorpusError::Reason::BackendFailure,
                        "array shape does not match its element count in " + context);
    }
    out.data = std::move(values);
    return out;
  }
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') {
      throw CorpusError(CorpusError::Reason::BackendFailure,
                        "malformed array literal in " + context);
    }
    minicp::ValueArray out;
    out.data = parse_int_list(text.substr(1, text.size() - 2), context);
    out.dims = {static_cast<long long>(out.data.size())};
    return out;
  }
  if (text == "true") return minicp::ValueArray::scalar(1);
  if (text == "false") return minicp::ValueArray::scalar(0);
  try {
    return minicp::ValueArray::scalar(std::stoll(text));
  } catch (const std::exception&) {
    throw CorpusError(CorpusError::Reason::BackendFailure,
                      "cannot parse solver value '" + text + "' in " + context);
  }
}

}  // namespace

minicp::Solution parse_solution_block(const std::string& block) {
  minicp::Solution solution;
  std::istringstream in(block);
  std::string line;
  std::string pending;
  auto flush = [&](const std::string& statement) {
    const std::string s = trim(statement);
    if (s.empty() || s[0] == '%') return;
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw CorpusError(CorpusError::Reason::BackendFailure,
                        "cannot parse solver output line '" + s + "'");
    }
    std::string name = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (!value.empty() && value.back() == ';') value.pop_back();
    if (name.empty()) {
      throw CorpusError(CorpusError::Reason::BackendFailure,
                        "missing variable name in solver output line '" + s + "'");
    }
    solution[name] = parse_value(value, name);
  };
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '%') continue;
    pending += line;
    pending += '\n';
    // Statements end with ';'; array literals may span lines.
    if (t.back() == ';') {
      flush(pending);
      pending.clear();
    }
  }
  if (!trim(pending).empty()) flush(pending);
  return solution;
}

// ---- external --------------------------------------------------------------

namespace {

struct ParsedStream {
  std::vector<minicp::Solution> solutions;
  bool exhausted = false;
  bool unsat = false;
  bool error_marker = false;
  double reported_time = -1.0;
};

ParsedStream parse_output_stream(const std::string& text) {
  ParsedStream parsed;
  std::istringstream in(text);
  std::string line;
  std::string block;
  auto scan_time = [&](const std::string& t) {
    const std::string key = "% time elapsed:";
    auto pos = t.find(key);
    if (pos == std::string::npos) return;
    std::istringstream num(t.substr(pos + key.size()));
    double value = 0.0;
    if (num >> value) parsed.reported_time = value;
  };
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t == "----------") {
      parsed.solutions.push_back(parse_solution_block(block));
      block.clear();
      continue;
    }
    if (t == "==========") {
      parsed.exhausted = true;
      continue;
    }
    if (t == "=====UNSATISFIABLE=====") {
      parsed.unsat = true;
      continue;
    }
    if (t == "=====ERROR=====") {
      parsed.error_marker = true;
      continue;
    }
    if (t == "=====UNKNOWN=====") continue;
    if (!t.empty() && t[0] == '%') {
      scan_time(t);
      continue;
    }
    block += line;
    block += '\n';
  }
  return parsed;
}

std::string tail_of(const std::string& text, std::size_t limit = 500) {
  if (text.size() <= limit) return text;
  return "..." + text.substr(text.size() - limit);
}

}  // namespace

ExternalBackend::ExternalBackend(std::string solver_id, std::string work_dir)
    : solver_id_(std::move(solver_id)), work_dir_(std::move(work_dir)) {
  if (work_dir_.empty()) {
    work_dir_ = (std::filesystem::temp_directory_path() /
                 ("streamforge-mzn-" + util::hex_digest(solver_id_ + "|" +
                                                        std::to_string(getpid()))))
                    .string();
  }
  std::filesystem::create_directories(work_dir_);
}

std::string ExternalBackend::executable() {
  const char* env = std::getenv("STREAMFORGE_MZN");
  if (env != nullptr && *env != '\0') return env;
  return "minizinc";
}

namespace {

struct ExternalRun {
  SubprocessResult sub;
  ParsedStream parsed;
};

}  // namespace

EnumerateOutcome ExternalBackend::enumerate(const ProblemSpec& problem,
                                            const std::string& instance_id,
                                            std::size_t limit, double budget_s,
                                            unsigned seed) {
  EnumerateOutcome out;
  out.backend_id = id();
  out.seed = seed;
  SolveOutcome one = run_external(problem, instance_id, {}, budget_s, seed,
                                  /*all_solutions=*/true, &out.solutions,
                                  &out.exhausted);
  out.status = one.status;
  out.elapsed_s = one.elapsed_s;
  out.diagnostics = one.diagnostics;
  if (limit > 0 && out.solutions.size() > limit) {
    out.solutions.resize(limit);
  }
  if (!out.solutions.empty()) out.status = RunStatus::Sat;
  return out;
}

SolveOutcome ExternalBackend::solve_one(
    const ProblemSpec& problem, const std::string& instance_id,
    const std::vector<std::string>& extra_constraints, double budget_s,
    unsigned seed) {
  return run_external(problem, instance_id, extra_constraints, budget_s, seed,
                      /*all_solutions=*/false, nullptr, nullptr);
}

SolveOutcome ExternalBackend::run_external(
    const ProblemSpec& problem, const std::string& instance_id,
    const std::vector<std::string>& extra_constraints, double budget_s,
    unsigned seed, bool all_solutions,
    std::vector<minicp::Solution>* solutions_out, bool* exhausted_out) {
  SolveOutcome out;
  out.backend_id = id();
  out.seed = seed;
  if (!problem.external_model) {
    out.status = RunStatus::Error;
    out.diagnostics = "external backend requires an external model file";
    return out;
  }

  std::ifstream model_in(problem.model);
  if (!model_in) {
    out.status = RunStatus::Error;
    out.diagnostics = "cannot read model file '" + problem.model + "'";
    return out;
  }
  std::ostringstream model_text;
  model_text << model_in.rdbuf();
  for (const std::string& extra : extra_constraints) {
    model_text << "\nconstraint " << extra << ";\n";
  }

  const std::string stem =
      problem.id + "-" + instance_id + "-" +
      util::hex_digest(model_text.str() + "|" + std::to_string(seed));
  const std::string model_path =
      (std::filesystem::path(work_dir_) / (stem + ".mzn")).string();
  {
    std::ofstream model_copy(model_path);
    model_copy << model_text.str();
  }

  std::vector<std::string> argv = {executable(), "--solver", solver_id_};
  const double budget = budget_s > 0.0 ? budget_s : kNoBudgetSeconds;
  argv.push_back("--time-limit");
  argv.push_back(std::to_string(static_cast<long long>(budget * 1000.0)));
  argv.push_back("-r");
  argv.push_back(std::to_string(seed));
  if (all_solutions) argv.push_back("-a");
  argv.push_back(model_path);

  const std::string& data_text = problem.data_for(instance_id);
  std::string data_path;
  if (!trim(data_text).empty()) {
    data_path =
        (std::filesystem::path(work_dir_) / (stem + ".dzn")).string();
    std::ofstream data_file(data_path);
    data_file << data_text;
    argv.push_back(data_path);
  }

  SubprocessResult sub = run_subprocess(argv, budget + 5.0);
  if (sub.launch_failed) {
    throw CorpusError(CorpusError::Reason::BackendFailure,
                      "cannot launch solver executable '" + executable() +
                          "': " + sub.err);
  }

  ParsedStream parsed = parse_output_stream(sub.out);
  out.elapsed_s = parsed.reported_time >= 0.0 ? parsed.reported_time : sub.elapsed_s;

  if (solutions_out != nullptr) *solutions_out = parsed.solutions;
  if (exhausted_out != nullptr) *exhausted_out = parsed.exhausted;

  if (parsed.error_marker || (sub.exit_code != 0 && !sub.timed_out)) {
    out.status = RunStatus::Error;
    out.diagnostics = tail_of(sub.err.empty() ? sub.out : sub.err);
    return out;
  }
  if (parsed.unsat) {
    out.status = RunStatus::Unsat;
    return out;
  }
  if (!parsed.solutions.empty()) {
    out.status = RunStatus::Sat;
    out.solution = parsed.solutions.back();
    return out;
  }
  if (parsed.exhausted) {
    // Exhausted with no solutions and no explicit marker: unsatisfiable.
    out.status = RunStatus::Unsat;
    return out;
  }
  out.status = RunStatus::Timeout;
  return out;
}

}  // namespace streamforge::corpus

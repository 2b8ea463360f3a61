#include "streamforge/corpus/store.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>

#include "json.hpp"

namespace streamforge::corpus {

namespace {

using nlohmann::json;

json solution_to_json(const minicp::Solution& solution) {
  json vars = json::object();
  for (const auto& [name, value] : solution) {
    vars[name] = {{"dims", value.dims}, {"data", value.data}};
  }
  return vars;
}

minicp::Solution solution_from_json(const json& vars) {
  minicp::Solution solution;
  for (auto it = vars.begin(); it != vars.end(); ++it) {
    minicp::ValueArray value;
    value.dims = it.value().at("dims").get<std::vector<long long>>();
    value.data = it.value().at("data").get<std::vector<long long>>();
    solution[it.key()] = std::move(value);
  }
  return solution;
}

json outcome_to_json(const SolveOutcome& outcome) {
  json record = {
      {"status", run_status_name(outcome.status)},
      {"elapsed_s", outcome.elapsed_s},
      {"backend", outcome.backend_id},
      {"seed", outcome.seed},
      {"diagnostics", outcome.diagnostics},
  };
  if (outcome.solution.has_value()) {
    record["solution"] = solution_to_json(*outcome.solution);
  }
  return record;
}

SolveOutcome outcome_from_json(const json& record) {
  SolveOutcome outcome;
  outcome.status = run_status_from_name(record.at("status").get<std::string>());
  outcome.elapsed_s = record.at("elapsed_s").get<double>();
  outcome.backend_id = record.at("backend").get<std::string>();
  outcome.seed = record.at("seed").get<unsigned>();
  outcome.diagnostics = record.at("diagnostics").get<std::string>();
  if (record.contains("solution")) {
    outcome.solution = solution_from_json(record.at("solution"));
  }
  return outcome;
}

json parse_line(const std::string& line, const std::string& path) {
  json record = json::parse(line, nullptr, false);
  if (record.is_discarded()) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "corrupt record in '" + path + "': " + line);
  }
  return record;
}

}  // namespace

// ---- CorpusStore -----------------------------------------------------------

CorpusStore::CorpusStore(std::string root_dir) : root_(std::move(root_dir)) {
  std::filesystem::create_directories(root_);
}

std::string CorpusStore::file_path(const std::string& problem_id,
                                   const std::string& instance_id) const {
  return (std::filesystem::path(root_) / problem_id /
          (instance_id + ".solutions.jsonl"))
      .string();
}

void CorpusStore::append(const std::string& problem_id,
                         const std::string& instance_id,
                         const minicp::Solution& solution) {
  const std::string path = file_path(problem_id, instance_id);
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "cannot open corpus file '" + path + "' for append");
  }
  json record = {{"type", "solution"},
                 {"instance", instance_id},
                 {"vars", solution_to_json(solution)}};
  out << record.dump() << '\n';
}

void CorpusStore::mark_complete(const std::string& problem_id,
                                const std::string& instance_id,
                                bool exhausted) {
  const std::string path = file_path(problem_id, instance_id);
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::app);
  json record = {{"type", "complete"},
                 {"instance", instance_id},
                 {"exhausted", exhausted}};
  out << record.dump() << '\n';
}

bool CorpusStore::has_complete(const std::string& problem_id,
                               const std::string& instance_id) const {
  const std::string path = file_path(problem_id, instance_id);
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = parse_line(line, path);
    if (record.value("type", "") == "complete") return true;
  }
  return false;
}

bool CorpusStore::stored_exhausted(const std::string& problem_id,
                                   const std::string& instance_id) const {
  const std::string path = file_path(problem_id, instance_id);
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  bool exhausted = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = parse_line(line, path);
    if (record.value("type", "") == "complete") {
      exhausted = record.value("exhausted", false);
    }
  }
  return exhausted;
}

std::vector<minicp::Solution> CorpusStore::load(
    const std::string& problem_id, const std::string& instance_id) const {
  const std::string path = file_path(problem_id, instance_id);
  std::ifstream in(path);
  if (!in) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "no stored corpus at '" + path + "'");
  }
  std::vector<minicp::Solution> solutions;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = parse_line(line, path);
    if (record.value("type", "") == "solution") {
      solutions.push_back(solution_from_json(record.at("vars")));
    }
  }
  return solutions;
}

// ---- BaselineCache ---------------------------------------------------------

namespace {

std::string cache_key(const std::string& problem_id,
                      const std::string& instance_id) {
  return problem_id + '\x1f' + instance_id;
}

}  // namespace

BaselineCache::BaselineCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = parse_line(line, path_);
    entries_[cache_key(record.at("problem").get<std::string>(),
                       record.at("instance").get<std::string>())] =
        outcome_from_json(record.at("outcome"));
  }
}

std::optional<SolveOutcome> BaselineCache::find(
    const std::string& problem_id, const std::string& instance_id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(cache_key(problem_id, instance_id));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void BaselineCache::put(const std::string& problem_id,
                        const std::string& instance_id,
                        const SolveOutcome& outcome) {
  std::unique_lock lock(mutex_);
  const std::string key = cache_key(problem_id, instance_id);
  if (entries_.count(key) != 0) {
    throw std::logic_error("baseline already recorded for problem '" +
                           problem_id + "' instance '" + instance_id + "'");
  }
  entries_[key] = outcome;

  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "cannot open baseline cache '" + path_ + "' for append");
  }
  json record = {{"problem", problem_id},
                 {"instance", instance_id},
                 {"outcome", outcome_to_json(outcome)}};
  out << record.dump() << '\n';
  out.flush();
}

std::size_t BaselineCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace streamforge::corpus

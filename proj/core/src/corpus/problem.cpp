#include "streamforge/corpus/problem.hpp"

namespace streamforge::corpus {

const char* shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Matrix: return "matrix";
    case ShapeKind::Permutation: return "permutation";
    case ShapeKind::Assignment: return "assignment";
    case ShapeKind::PackingCoords: return "packing_coords";
  }
  return "matrix";
}

ShapeKind shape_kind_from_name(const std::string& name) {
  if (name == "matrix") return ShapeKind::Matrix;
  if (name == "permutation") return ShapeKind::Permutation;
  if (name == "assignment") return ShapeKind::Assignment;
  if (name == "packing_coords") return ShapeKind::PackingCoords;
  throw CorpusError(CorpusError::Reason::BadProblem,
                    "unknown shape kind '" + name + "'");
}

const std::string& ProblemSpec::data_for(const std::string& instance_id) const {
  auto it = instance_data.find(instance_id);
  if (it == instance_data.end()) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "problem '" + id + "' has no instance '" + instance_id + "'");
  }
  return it->second;
}

minicp::Instance resolve_instance(const ProblemSpec& problem,
                                  const std::string& instance_id) {
  if (problem.external_model) {
    throw CorpusError(CorpusError::Reason::BadProblem,
                      "problem '" + problem.id +
                          "' uses an external model and cannot be resolved in-process");
  }
  minicp::Model model = minicp::parse_model(problem.model);
  minicp::DataMap data = minicp::parse_data(problem.data_for(instance_id));
  return minicp::resolve(model, data);
}

const char* run_status_name(RunStatus status) {
  switch (status) {
    case RunStatus::Sat: return "SAT";
    case RunStatus::Unsat: return "UNSAT";
    case RunStatus::Timeout: return "TIMEOUT";
    case RunStatus::Error: return "ERROR";
  }
  return "ERROR";
}

RunStatus run_status_from_name(const std::string& name) {
  if (name == "SAT") return RunStatus::Sat;
  if (name == "UNSAT") return RunStatus::Unsat;
  if (name == "TIMEOUT") return RunStatus::Timeout;
  if (name == "ERROR") return RunStatus::Error;
  throw CorpusError(CorpusError::Reason::BadProblem,
                    "unknown run status '" + name + "'");
}

}  // namespace streamforge::corpus

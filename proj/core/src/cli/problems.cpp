#include "streamforge/cli/pipeline.hpp"

namespace streamforge::cli {

namespace {

/// Latin-square completion.  Hints pre-fill cells through three parallel
/// arrays so one model text serves both the free training instances and the
/// partially-filled held-out ones.
const char* kLatinModel = R"(% Latin-square completion with optional pre-filled cells.
param n;
param n_hints = 0;
param hr = [0];
param hc = [0];
param hv = [0];
var a[1..n, 1..n] in 1..n;
constraint forall(r in 1..n)(alldifferent([a[r, c] | c in 1..n]));
constraint forall(c in 1..n)(alldifferent([a[r, c] | r in 1..n]));
constraint forall(h in 1..n_hints)(a[hr[h], hc[h]] = hv[h]);
)";

const char* kQueensModel = R"(% Non-attacking queens, one per column.
param n;
var q[1..n] in 1..n;
constraint alldifferent(q);
constraint forall(i in 1..n, j in 1..n where i < j)(abs(q[i] - q[j]) != j - i);
)";

std::vector<corpus::ProblemSpec> make_problems() {
  std::vector<corpus::ProblemSpec> out;

  corpus::ProblemSpec latin;
  latin.id = "latin4";
  latin.kind = corpus::ShapeKind::Matrix;
  latin.model = kLatinModel;
  latin.training_instances = {"train4", "train5", "train6"};
  latin.test_instances = {"test6a", "test6b", "test7"};
  latin.instance_data = {
      {"train4", "n = 4;"},
      {"train5", "n = 5;"},
      {"train6", "n = 6;"},
      {"test6a", "n = 6;"},
      {"test6b", "n = 6;"},
      {"test7", "n = 7;"},
  };
  out.push_back(std::move(latin));

  corpus::ProblemSpec queens;
  queens.id = "queens";
  queens.kind = corpus::ShapeKind::Permutation;
  queens.model = kQueensModel;
  queens.training_instances = {"n6"};
  queens.test_instances = {"n7", "n8"};
  queens.instance_data = {
      {"n6", "n = 6;"},
      {"n7", "n = 7;"},
      {"n8", "n = 8;"},
  };
  out.push_back(std::move(queens));

  return out;
}

}  // namespace

const std::vector<corpus::ProblemSpec>& builtin_problems() {
  static const std::vector<corpus::ProblemSpec> problems = make_problems();
  return problems;
}

const corpus::ProblemSpec* find_problem(const std::string& id) {
  for (const corpus::ProblemSpec& p : builtin_problems()) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

}  // namespace streamforge::cli

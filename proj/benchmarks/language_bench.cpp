#include <benchmark/benchmark.h>

#include <string>

#include "streamforge/minicp/eval.hpp"
#include "streamforge/minicp/model.hpp"
#include "streamforge/minicp/parse.hpp"
#include "streamforge/minicp/solve.hpp"

namespace {

using namespace streamforge::minicp;

const char* kLatinModel = R"(
param n;
var a[1..n, 1..n] in 1..n;
constraint forall(r in 1..n)(alldifferent([a[r, c] | c in 1..n]));
constraint forall(c in 1..n)(alldifferent([a[r, c] | r in 1..n]));
)";

void BM_ParseRoundTrip(benchmark::State& state) {
  const std::string text =
      "forall(c1, c2 in Containers where c1 < c2 /\\ width[c1]=width[c2] /\\ "
      "length[c1]=length[c2] /\\ class[c1]=class[c2])(lex_lesseq([Left[c1], Bottom[c1]], "
      "[Left[c2], Bottom[c2]]))";
  for (auto _ : state) {
    ExprPtr ast = parse_expression(text);
    benchmark::DoNotOptimize(print(ast));
  }
}
BENCHMARK(BM_ParseRoundTrip);

void BM_EnumerateLatin(benchmark::State& state) {
  const int order = static_cast<int>(state.range(0));
  Instance inst = resolve(parse_model(kLatinModel),
                          parse_data("n = " + std::to_string(order) + ";"));
  SolveOptions opts;
  opts.solution_limit = 0;
  for (auto _ : state) {
    SolveResult res = solve(inst, opts);
    benchmark::DoNotOptimize(res.solutions.size());
  }
}
BENCHMARK(BM_EnumerateLatin)->Arg(3)->Arg(4);

void BM_EvalConstraint(benchmark::State& state) {
  Instance inst = resolve(parse_model(kLatinModel), parse_data("n = 4;"));
  SolveResult res = solve(inst);
  ExprPtr rows = inst.constraints[0];
  const std::vector<long long> cells = inst.flatten(res.solutions[0]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_constraint(rows, inst, cells));
  }
}
BENCHMARK(BM_EvalConstraint);

}  // namespace

BENCHMARK_MAIN();

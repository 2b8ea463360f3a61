#include <map>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "streamforge/minicp/eval.hpp"
#include "streamforge/minicp/model.hpp"
#include "streamforge/minicp/solve.hpp"
#include "streamforge/pool/pool.hpp"

using streamforge::pool::cluster;
using streamforge::pool::ClusterResult;
using streamforge::pool::expand_all;
using streamforge::pool::expand_representatives;
using streamforge::pool::pool_across_instances;
using streamforge::pool::PooledCandidate;
using streamforge::pool::PoolError;
using streamforge::pool::Representative;
using streamforge::pool::Role;
using streamforge::pool::SemanticCluster;
using streamforge::pool::signature_of;
using streamforge::synth::Aggressiveness;
using streamforge::synth::CandidateStreamliner;
using streamforge::synth::GenerationParams;
using streamforge::synth::Method;

namespace {

CandidateStreamliner make_candidate(const std::string& text,
                                    const std::string& descriptor,
                                    unsigned seed = 1) {
  CandidateStreamliner c;
  c.text = text;
  c.descriptor = descriptor;
  c.method = Method::LlmStats;
  c.seed = seed;
  return c;
}

std::vector<PooledCandidate> pile_top_pool() {
  return pool_across_instances(
      {{"bh-1",
        {make_candidate("y[layout[i, 1]] <= 25", "pile_top_early_25"),
         make_candidate("y[layout[i, 1]] <= 30", "pile_top_early_30"),
         make_candidate("y[layout[i, 1]] <= 35", "pile_top_early_35"),
         make_candidate("x[1] = 1", "first_pin")}}});
}

struct FakeBackend : streamforge::synth::LlmBackend {
  std::string response;
  explicit FakeBackend(std::string r) : response(std::move(r)) {}
  std::string id() const override { return "fake"; }
  std::string complete(const std::string&, const GenerationParams&) override {
    return response;
  }
};

streamforge::props::Progression fit(double slope, double intercept,
                                    std::vector<double> sizes) {
  streamforge::props::Progression p;
  for (double s : sizes) p.rows.push_back({s, 0.0, 0.0, 0.0});
  p.has_fit = true;
  p.slope = slope;
  p.intercept = intercept;
  return p;
}

}  // namespace

TEST_CASE("pooling unions candidates and merges provenance") {
  std::map<std::string, std::vector<CandidateStreamliner>> per_instance;
  per_instance["inst-a"] = {make_candidate("x[1] = 1", "from_a", 3)};
  per_instance["inst-b"] = {make_candidate("x[1]=1", "from_b", 5),
                            make_candidate("x[2] <= 4", "only_b", 5)};
  const auto pool = pool_across_instances(per_instance);
  REQUIRE(pool.size() == 2);
  CHECK(pool[0].candidate.descriptor == "from_a");  // first occurrence wins
  REQUIRE(pool[0].provenance.size() == 2);
  CHECK(pool[0].provenance[0].instance_id == "inst-a");
  CHECK(pool[0].provenance[0].seed == 3);
  CHECK(pool[0].provenance[1].instance_id == "inst-b");
  CHECK(pool[0].provenance[1].seed == 5);
  CHECK(pool[1].candidate.descriptor == "only_b");
  CHECK(pool[1].provenance.size() == 1);
}

TEST_CASE("disjoint candidate sets pool to the sum of sizes") {
  std::map<std::string, std::vector<CandidateStreamliner>> per_instance;
  per_instance["a"] = {make_candidate("x[1] = 1", "a1"),
                       make_candidate("x[2] = 2", "a2")};
  per_instance["b"] = {make_candidate("x[3] = 3", "b1")};
  CHECK(pool_across_instances(per_instance).size() == 3);
  CHECK(pool_across_instances({}).empty());

  // The same (instance, seed) pair contributes one provenance row only.
  std::map<std::string, std::vector<CandidateStreamliner>> repeated;
  repeated["a"] = {make_candidate("x[1] = 1", "t", 2),
                   make_candidate("x[1]  =  1", "t2", 2)};
  const auto pool = pool_across_instances(repeated);
  REQUIRE(pool.size() == 1);
  CHECK(pool[0].provenance.size() == 1);
}

TEST_CASE("signatures abstract integer literals to holes") {
  CHECK(signature_of("y[layout[i, 1]] <= 25") ==
        signature_of("y[layout[i,1]] <= 35"));
  CHECK(signature_of("y[layout[i, 1]] <= 25") ==
        "y [ layout [ i , _ ] ] <= _");
  // Literals in different positions are all holes.
  CHECK(signature_of("x[1] = 1") == signature_of("x[2]=1"));
  // Structure is preserved.
  CHECK(signature_of("x[1] = 1") != signature_of("x[1] <= 1"));
  CHECK(signature_of("forall(p in 1..5)(x[p+1] >= x[p])") ==
        "forall ( p in _ .. _ ) ( x [ p + _ ] >= x [ p ] )");
  CHECK_THROWS_AS(signature_of("x[1] = @@"), PoolError);
}

TEST_CASE("fallback clustering groups by signature, deterministically") {
  const auto pool = pile_top_pool();
  const ClusterResult first = cluster(pool);
  CHECK(first.diagnostics.empty());
  REQUIRE(first.clusters.size() == 2);
  CHECK(first.clusters[0].members.size() == 3);
  CHECK(first.clusters[0].signature == "y [ layout [ i , _ ] ] <= _");
  CHECK(first.clusters[1].members.size() == 1);
  CHECK(first.clusters[1].members[0].candidate.descriptor == "first_pin");

  const ClusterResult second = cluster(pool);
  REQUIRE(second.clusters.size() == first.clusters.size());
  for (std::size_t c = 0; c < first.clusters.size(); ++c) {
    CHECK(second.clusters[c].signature == first.clusters[c].signature);
    CHECK(second.clusters[c].members.size() ==
          first.clusters[c].members.size());
  }
  CHECK(cluster({}).clusters.empty());
}

TEST_CASE("the stub backend reproduces signature clustering") {
  const auto pool = pile_top_pool();
  streamforge::synth::StubLlmBackend stub;
  const ClusterResult result = cluster(pool, &stub);
  CHECK(result.diagnostics.empty());
  REQUIRE(result.clusters.size() == 2);
  CHECK(result.clusters[0].members.size() == 3);
  CHECK(result.clusters[1].members.size() == 1);
}

TEST_CASE("a double assignment keeps the first and leaves a diagnostic") {
  const auto pool = pile_top_pool();
  FakeBackend backend("[[1, 2, 3], [3, 4]]");
  const ClusterResult result = cluster(pool, &backend);
  REQUIRE(result.clusters.size() == 2);
  CHECK(result.clusters[0].members.size() == 3);
  CHECK(result.clusters[1].members.size() == 1);
  REQUIRE(result.diagnostics.size() == 1);
  CHECK(result.diagnostics[0].find("candidate 3") != std::string::npos);
  CHECK(result.diagnostics[0].find("first assignment") != std::string::npos);
}

TEST_CASE("out-of-range and missing candidates are repaired") {
  const auto pool = pile_top_pool();
  FakeBackend backend("[[1, 2, 9], [4]]");  // 3 never assigned, 9 invalid
  const ClusterResult result = cluster(pool, &backend);
  REQUIRE(result.clusters.size() == 3);
  CHECK(result.clusters[0].members.size() == 2);
  CHECK(result.clusters[1].members.size() == 1);
  CHECK(result.clusters[2].members.size() == 1);
  CHECK(result.clusters[2].members[0].candidate.descriptor ==
        "pile_top_early_35");
  REQUIRE(result.diagnostics.size() == 2);
  CHECK(result.diagnostics[0].find("out of range") != std::string::npos);
  CHECK(result.diagnostics[1].find("singleton") != std::string::npos);
}

TEST_CASE("groups mixing shapes are split by signature") {
  const auto pool = pile_top_pool();
  FakeBackend backend("[[1, 4, 2, 3]]");
  const ClusterResult result = cluster(pool, &backend);
  REQUIRE(result.clusters.size() == 2);
  CHECK(result.clusters[0].members.size() == 3);
  CHECK(result.clusters[1].members[0].candidate.descriptor == "first_pin");
  REQUIRE(result.diagnostics.size() == 1);
  CHECK(result.diagnostics[0].find("split by signature") != std::string::npos);
}

TEST_CASE("an unusable backend answer falls back to signature clustering") {
  const auto pool = pile_top_pool();
  FakeBackend backend("I grouped them mentally. The answer is clear.");
  const ClusterResult result = cluster(pool, &backend);
  REQUIRE(result.clusters.size() == 2);
  REQUIRE(result.diagnostics.size() == 1);
  CHECK(result.diagnostics[0].find("falling back") != std::string::npos);
}

TEST_CASE("pile-top cluster expands to tightest, loosest, and median") {
  const auto result = cluster(pile_top_pool());
  const auto reps = expand_representatives(result.clusters[0], std::nullopt);
  REQUIRE(reps.size() == 3);
  CHECK(reps[0].role == Role::Tightest);
  CHECK(reps[0].candidate.text == "y[layout[i, 1]] <= 25");
  CHECK(reps[1].role == Role::Loosest);
  CHECK(reps[1].candidate.text == "y[layout[i, 1]] <= 35");
  CHECK(reps[2].role == Role::ParametricMedian);
  CHECK(reps[2].candidate.text == "y[layout[i, 1]] <= 30");
}

TEST_CASE("a progression fit adds an extrapolated tightened variant") {
  const auto result = cluster(pile_top_pool());
  // Fit predicts 7*6 - 0.5 = 41.5 at the next size; <=-shape rounds down.
  const auto reps = expand_representatives(result.clusters[0],
                                           fit(7.0, -0.5, {4.0, 5.0}));
  REQUIRE(reps.size() == 4);
  CHECK(reps[3].role == Role::Extrapolated);
  CHECK(reps[3].candidate.text == "y[layout[i, 1]] <= 41");
  CHECK(reps[3].candidate.descriptor == "pile_top_early_25_extrapolated");
  CHECK(reps[3].candidate.aggressiveness == Aggressiveness::Aggressive);

  // A prediction landing on an unchosen member reuses that member.
  const auto wide = pool_across_instances(
      {{"bh-1",
        {make_candidate("y[layout[i, 1]] <= 25", "pile_25"),
         make_candidate("y[layout[i, 1]] <= 30", "pile_30"),
         make_candidate("y[layout[i, 1]] <= 35", "pile_35"),
         make_candidate("y[layout[i, 1]] <= 40", "pile_40")}}});
  // tightest 25, loosest 40, lower median 30; the fit predicts 35.
  const auto on_member = expand_representatives(
      cluster(wide).clusters[0], fit(6.0, -1.0, {4.0, 5.0}));
  REQUIRE(on_member.size() == 4);
  CHECK(on_member[3].role == Role::Extrapolated);
  CHECK(on_member[3].candidate.text == "y[layout[i, 1]] <= 35");
  CHECK(on_member[3].candidate.descriptor == "pile_35");

  // A prediction landing on an already-chosen value adds nothing.
  const auto chosen = expand_representatives(result.clusters[0],
                                             fit(4.3, 0.0, {4.0, 5.0}));
  CHECK(chosen.size() == 3);
}

TEST_CASE("lower-bound shapes tighten upward") {
  const auto pooled = pool_across_instances(
      {{"i",
        {make_candidate("sum(p in 1..4)(x[p]) >= 10", "floor_10"),
         make_candidate("sum(p in 1..4)(x[p]) >= 20", "floor_20"),
         make_candidate("sum(p in 1..4)(x[p]) >= 30", "floor_30")}}});
  const auto result = cluster(pooled);
  REQUIRE(result.clusters.size() == 1);
  // Fit predicts 5*4 + 3.4 = 23.4 at the next size; >=-shape rounds up.
  const auto reps = expand_representatives(result.clusters[0],
                                           fit(5.0, 3.4, {2.0, 3.0}));
  REQUIRE(reps.size() == 4);
  CHECK(reps[0].role == Role::Tightest);
  CHECK(reps[0].candidate.text == "sum(p in 1..4)(x[p]) >= 30");
  CHECK(reps[1].candidate.text == "sum(p in 1..4)(x[p]) >= 10");
  CHECK(reps[2].candidate.text == "sum(p in 1..4)(x[p]) >= 20");
  CHECK(reps[3].candidate.text == "sum(p in 1..4)(x[p]) >= 24");
}

TEST_CASE("directionless shapes keep only the parametric median") {
  const auto pooled = pool_across_instances(
      {{"i",
        {make_candidate("sum(p in 1..5)(bool2int(x[p+1] > x[p])) = 27", "a"),
         make_candidate("sum(p in 1..5)(bool2int(x[p+1] > x[p])) = 29", "b")}}});
  const auto result = cluster(pooled);
  REQUIRE(result.clusters.size() == 1);
  const auto reps =
      expand_representatives(result.clusters[0], fit(1.0, 0.0, {2.0, 3.0}));
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].role == Role::ParametricMedian);
  CHECK(reps[0].candidate.text.find("= 27") != std::string::npos);

  // A varying index position has no tightening direction either.
  const auto pins = pool_across_instances(
      {{"i",
        {make_candidate("x[1] = 1", "p1"), make_candidate("x[2] = 1", "p2")}}});
  const auto pin_reps =
      expand_all(cluster(pins).clusters, std::nullopt);
  REQUIRE(pin_reps.size() == 1);
  CHECK(pin_reps[0].role == Role::ParametricMedian);
  CHECK(pin_reps[0].candidate.text == "x[1] = 1");
}

TEST_CASE("clusters without a single varying literal pass through") {
  // Single member: kept as-is.
  const auto single = pool_across_instances(
      {{"i", {make_candidate("x[1] <= 5", "solo")}}});
  const auto solo_reps = expand_all(cluster(single).clusters, std::nullopt);
  REQUIRE(solo_reps.size() == 1);
  CHECK(solo_reps[0].role == Role::Member);
  CHECK(solo_reps[0].candidate.text == "x[1] <= 5");

  // No literals at all: kept as-is.
  const auto no_hole = pool_across_instances(
      {{"i", {make_candidate("x[n] = n", "pin_n")}}});
  const auto none = expand_all(cluster(no_hole).clusters, std::nullopt);
  REQUIRE(none.size() == 1);
  CHECK(none[0].role == Role::Member);

  // Two positions varying at once: no parameter is identifiable.
  const auto multi = pool_across_instances(
      {{"i",
        {make_candidate("x[1] <= 5", "a"), make_candidate("x[2] <= 7", "b")}}});
  const auto multi_reps = expand_all(cluster(multi).clusters, std::nullopt);
  REQUIRE(multi_reps.size() == 2);
  CHECK(multi_reps[0].role == Role::Member);
  CHECK(multi_reps[1].role == Role::Member);
}

TEST_CASE("representative sets respect the size bound") {
  const auto even = pool_across_instances(
      {{"i",
        {make_candidate("x[1] <= 25", "a"), make_candidate("x[1] <= 30", "b")}}});
  const auto reps = expand_all(cluster(even).clusters, std::nullopt);
  // tightest 25, loosest 30; lower median 25 collapses into tightest.
  REQUIRE(reps.size() == 2);
  CHECK(reps[0].role == Role::Tightest);
  CHECK(reps[1].role == Role::Loosest);
}

TEST_CASE("tightest solutions are a subset of loosest solutions") {
  const auto instance = streamforge::minicp::resolve(
      streamforge::minicp::parse_model("param n = 3;\nvar x[1..n] in 1..3;"));
  streamforge::minicp::SolveOptions options;
  options.solution_limit = 0;
  const auto solved = streamforge::minicp::solve(instance, options);
  REQUIRE(solved.solutions.size() == 27);

  const auto pooled = pool_across_instances(
      {{"i",
        {make_candidate("sum(p in 1..3)(x[p]) <= 5", "t"),
         make_candidate("sum(p in 1..3)(x[p]) <= 7", "l")}}});
  const auto reps = expand_all(cluster(pooled).clusters, std::nullopt);
  REQUIRE(reps.size() == 2);
  const auto tight = streamforge::minicp::parse_constraint(
      reps[0].candidate.text, instance);
  const auto loose = streamforge::minicp::parse_constraint(
      reps[1].candidate.text, instance);
  int tight_count = 0;
  int loose_count = 0;
  for (const auto& solution : solved.solutions) {
    const bool t = streamforge::minicp::eval_constraint(tight, instance, solution);
    const bool l = streamforge::minicp::eval_constraint(loose, instance, solution);
    tight_count += t;
    loose_count += l;
    if (t) CHECK(l);
  }
  CHECK(tight_count > 0);
  CHECK(loose_count > tight_count);
}

TEST_CASE("the cluster report names signatures, members, and roles") {
  const auto result = cluster(pile_top_pool());
  const std::string report =
      streamforge::pool::cluster_report(result.clusters, std::nullopt);
  CHECK(report.find("cluster 1 (3 members)") != std::string::npos);
  CHECK(report.find("signature: y [ layout [ i , _ ] ] <= _") !=
        std::string::npos);
  CHECK(report.find("member: pile_top_early_25") != std::string::npos);
  CHECK(report.find("representative[tightest]: y[layout[i, 1]] <= 25") !=
        std::string::npos);
  CHECK(report.find("cluster 2 (1 member)") != std::string::npos);
  CHECK(streamforge::pool::cluster_report({}, std::nullopt)
            .find("no clusters") != std::string::npos);
}

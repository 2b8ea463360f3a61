#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "streamforge/correlate/correlate.hpp"
#include "streamforge/minicp/model.hpp"
#include "streamforge/synth/synth.hpp"
#include "streamforge/util/digest.hpp"

using streamforge::cnn::ContrastPair;
using streamforge::cnn::FilterRecord;
using streamforge::correlate::CorrelationMatrix;
using streamforge::correlate::PropertyVector;
using streamforge::props::PropertyStats;
using streamforge::synth::Aggressiveness;
using streamforge::synth::CandidateStreamliner;
using streamforge::synth::GenerationParams;
using streamforge::synth::Method;
using streamforge::synth::SynthError;
using streamforge::synth::SyntacticForm;

namespace fs = std::filesystem;

namespace {

const char* kPermModel = R"(param n = 6;
var x[1..n] in 1..n;
constraint x[1] >= 1;
)";

const char* kGridModel = R"(param n = 4;
var a[1..n, 1..n] in 1..n;
constraint a[1, 1] >= 1;
)";

streamforge::minicp::Instance perm_instance() {
  return streamforge::minicp::resolve(
      streamforge::minicp::parse_model(kPermModel));
}

streamforge::minicp::Instance grid_instance() {
  return streamforge::minicp::resolve(
      streamforge::minicp::parse_model(kGridModel));
}

PropertyStats stats_at(double median, bool near_constant, bool constant = false) {
  PropertyStats s;
  s.mean = median;
  s.median = median;
  s.min = median - (constant ? 0.0 : 0.01);
  s.max = median + (constant ? 0.0 : 0.01);
  s.stddev = constant ? 0.0 : 0.005;
  s.constant = constant;
  s.near_constant = near_constant || constant;
  return s;
}

struct StatsFixture {
  CorrelationMatrix matrix;
  std::vector<streamforge::correlate::RankedProperty> ranking;
  std::vector<PropertyStats> stats;
};

StatsFixture make_stats_fixture() {
  FilterRecord f1;
  f1.seed = 1;
  f1.layer = 2;
  f1.filter = 7;
  f1.activations = {1, 2, 3, 4, 5, 6};
  FilterRecord f2;
  f2.seed = 2;
  f2.layer = 0;
  f2.filter = 3;
  f2.activations = {2, 1, 4, 3, 6, 5};
  StatsFixture fx;
  fx.matrix = streamforge::correlate::correlate(
      {f1, f2}, {
                    {"subsquare_2x2_sum_variance", {1.1, 2.0, 2.9, 4.2, 5.1, 5.8}},
                    {"total_sum", {10, 30, 20, 60, 40, 50}},
                    {"value_min", {1, 1, 1, 1, 1, 1}},
                });
  fx.stats = {stats_at(3.0, false), stats_at(35.0, false),
              stats_at(1.0, true, true)};
  fx.ranking = streamforge::correlate::rank_properties(fx.matrix, fx.stats);
  return fx;
}

}  // namespace

TEST_CASE("enum names round-trip") {
  using streamforge::synth::aggressiveness_from_name;
  using streamforge::synth::aggressiveness_name;
  using streamforge::synth::form_from_name;
  using streamforge::synth::form_name;
  using streamforge::synth::method_from_name;
  using streamforge::synth::method_name;
  for (Method m : {Method::LlmStats, Method::LlmDiscovery, Method::Template}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  for (Aggressiveness a : {Aggressiveness::Conservative, Aggressiveness::TightFit,
                           Aggressiveness::Aggressive}) {
    CHECK(aggressiveness_from_name(aggressiveness_name(a)) == a);
  }
  for (SyntacticForm f : {SyntacticForm::Existential, SyntacticForm::Universal,
                          SyntacticForm::Aggregate, SyntacticForm::Pairwise}) {
    CHECK(form_from_name(form_name(f)) == f);
  }
  CHECK_FALSE(method_from_name("bogus").has_value());
  CHECK_FALSE(aggressiveness_from_name("extreme").has_value());
  CHECK_FALSE(form_from_name("").has_value());
}

TEST_CASE("descriptors are short snake_case labels") {
  CHECK(streamforge::synth::valid_descriptor("pile_top_early_25"));
  CHECK(streamforge::synth::valid_descriptor("a"));
  CHECK_FALSE(streamforge::synth::valid_descriptor(""));
  CHECK_FALSE(streamforge::synth::valid_descriptor("Has_Caps"));
  CHECK_FALSE(streamforge::synth::valid_descriptor("with space"));
  CHECK_FALSE(streamforge::synth::valid_descriptor("dash-ed"));
}

TEST_CASE("stats payload ranks, caps samples, and is deterministic") {
  StatsFixture fx = make_stats_fixture();
  std::vector<std::string> samples;
  for (int i = 0; i < 7; ++i) {
    samples.push_back("x = [" + std::to_string(i) + "]\n");
  }
  GenerationParams params;
  const auto payload = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, samples, std::nullopt, kPermModel,
      params);

  // Highest-scoring property leads the ranked section.
  CHECK(payload.properties.front() == fx.ranking.front().id);
  const std::size_t first =
      payload.text.find("1. " + fx.ranking.front().id);
  REQUIRE(first != std::string::npos);
  CHECK(payload.text.find("2. ") > first);

  // Exactly five of the seven samples are serialized.
  CHECK(payload.text.find("### sample 5") != std::string::npos);
  CHECK(payload.text.find("### sample 6") == std::string::npos);
  CHECK(payload.text.find("x = [4]") != std::string::npos);
  CHECK(payload.text.find("x = [5]") == std::string::npos);

  // The constant property is marked implied; filters carry r values.
  CHECK(payload.text.find("class=constant (implied)") != std::string::npos);
  CHECK(payload.text.find("r=") != std::string::npos);
  CHECK(payload.text.find("## Task") != std::string::npos);
  CHECK(payload.text.find("about 8 candidates") != std::string::npos);

  const auto again = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, samples, std::nullopt, kPermModel,
      params);
  CHECK(again.text == payload.text);
  CHECK(again.digest == payload.digest);
  CHECK(payload.digest == streamforge::util::hex_digest(payload.text));
}

TEST_CASE("stats payload keeps an explicit empty near-constant section") {
  StatsFixture fx = make_stats_fixture();
  fx.stats[2] = stats_at(1.0, false);  // nothing near-constant any more
  fx.ranking = streamforge::correlate::rank_properties(fx.matrix, fx.stats);
  const auto payload = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, {}, std::nullopt, kPermModel, {});
  const std::size_t section =
      payload.text.find("## Near-constant properties");
  REQUIRE(section != std::string::npos);
  CHECK(payload.text.find("(none)", section) != std::string::npos);
}

TEST_CASE("stats payload includes the progression table when present") {
  StatsFixture fx = make_stats_fixture();
  streamforge::props::Progression progression;
  progression.rows = {{3, 6.0, 6.0, 6.0}, {4, 10.0, 10.0, 10.0}};
  progression.has_fit = true;
  progression.slope = 4.0;
  progression.intercept = -6.0;
  const auto payload = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, {}, progression, kPermModel, {});
  CHECK(payload.text.find("## Size progression") != std::string::npos);
  CHECK(payload.text.find("size\tmean\tmin\tmax") != std::string::npos);
  CHECK(payload.text.find("fit: max ~= 4*size + -6") != std::string::npos);

  const auto without = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, {}, std::nullopt, kPermModel, {});
  CHECK(without.text.find("## Size progression") == std::string::npos);
}

TEST_CASE("stats payload requires a ranking") {
  StatsFixture fx = make_stats_fixture();
  CHECK_THROWS_AS(streamforge::synth::build_stats_payload(
                      fx.matrix, {}, fx.stats, {}, std::nullopt, kPermModel, {}),
                  SynthError);
}

TEST_CASE("discovery payload carries labelled raw groups only") {
  ContrastPair pair;
  pair.seed = 1;
  pair.layer = 2;
  pair.filter = 4;
  pair.high_ids = {0, 2, 4};
  pair.low_ids = {1, 3, 5};
  std::vector<std::string> texts;
  for (int i = 0; i < 6; ++i) {
    texts.push_back("perm " + std::to_string(i) + "\n");
  }
  const auto payload = streamforge::synth::build_discovery_payload(
      pair, texts, kPermModel, {});
  CHECK_FALSE(payload.suppressed);
  CHECK(payload.text.find("### A1\nperm 0") != std::string::npos);
  CHECK(payload.text.find("### A3\nperm 4") != std::string::npos);
  CHECK(payload.text.find("### B1\nperm 1") != std::string::npos);
  CHECK(payload.text.find("Hypothesise") != std::string::npos);
  // Raw data only: no property vocabulary is injected.
  CHECK(payload.text.find("ascending") == std::string::npos);
  CHECK(payload.digest == streamforge::util::hex_digest(payload.text));

  const auto again = streamforge::synth::build_discovery_payload(
      pair, texts, kPermModel, {});
  CHECK(again.text == payload.text);
}

TEST_CASE("degenerate contrast pairs suppress the payload with a reason") {
  ContrastPair pair;
  pair.seed = 3;
  pair.layer = 1;
  pair.filter = 9;
  pair.degenerate = true;
  pair.high_ids = {0, 1, 2};
  pair.low_ids = {3, 4, 5};
  const auto payload =
      streamforge::synth::build_discovery_payload(pair, {}, kPermModel, {});
  CHECK(payload.suppressed);
  CHECK(payload.text.empty());
  CHECK(payload.reason.find("s3/L1/f9") != std::string::npos);
  CHECK(payload.reason.find("zero activation variance") != std::string::npos);
}

TEST_CASE("discovery payload validates group ids") {
  ContrastPair pair;
  pair.high_ids = {0, 7};
  pair.low_ids = {1};
  std::vector<std::string> texts{"a\n", "b\n"};
  CHECK_THROWS_AS(
      streamforge::synth::build_discovery_payload(pair, texts, kPermModel, {}),
      SynthError);
  ContrastPair empty;
  CHECK_THROWS_AS(
      streamforge::synth::build_discovery_payload(empty, texts, kPermModel, {}),
      SynthError);
}

TEST_CASE("candidate parsing extracts the array and drops bad entries") {
  const auto instance = perm_instance();
  const std::string response = R"(Looking at the data, rows like x[1] stand out.

Here is my proposal:
```json
[
  {"constraint": "x[1] = 1", "descriptor": "first_pin", "aggressiveness": "tight_fit", "form": "existential", "property": "first_value"},
  {"constraint": "sum(p in 1..5)(bool2int(x[p+1] > x[p])) = 3", "descriptor": "ascending_3", "aggressiveness": "conservative", "form": "aggregate"},
  {"constraint": "x[1] = ((", "descriptor": "broken", "aggressiveness": "tight_fit", "form": "existential"},
  {"constraint": "x[2] <= 3", "descriptor": "early_small", "aggressiveness": "aggressive", "form": "existential", "property": ""}
]
```
Those should help.)";
  const auto out = streamforge::synth::parse_candidates(
      response, instance, Method::LlmDiscovery, "perm-6", 42);
  REQUIRE(out.candidates.size() == 3);
  CHECK(out.diagnostics.size() == 1);
  CHECK(out.diagnostics[0].find("broken") != std::string::npos);
  CHECK(out.candidates[0].descriptor == "first_pin");
  CHECK(out.candidates[0].method == Method::LlmDiscovery);
  CHECK(out.candidates[0].property_id == "first_value");
  CHECK(out.candidates[0].instance_id == "perm-6");
  CHECK(out.candidates[0].seed == 42);
  CHECK(out.candidates[1].form == SyntacticForm::Aggregate);
  CHECK(out.candidates[2].aggressiveness == Aggressiveness::Aggressive);
}

TEST_CASE("unknown enum tokens drop the entry and name the token") {
  const auto instance = perm_instance();
  const std::string response = R"([
    {"constraint": "x[1] = 1", "descriptor": "ok", "aggressiveness": "extreme", "form": "existential"},
    {"constraint": "x[2] = 2", "descriptor": "ok2", "aggressiveness": "tight_fit", "form": "melodic"},
    {"constraint": "x[3] = 3", "descriptor": "Bad Label", "aggressiveness": "tight_fit", "form": "existential"}
  ])";
  const auto out = streamforge::synth::parse_candidates(
      response, instance, Method::LlmStats, "perm-6", 1);
  CHECK(out.candidates.empty());
  REQUIRE(out.diagnostics.size() == 4);  // 3 drops + empty-batch warning
  CHECK(out.diagnostics[0].find("\"extreme\"") != std::string::npos);
  CHECK(out.diagnostics[1].find("\"melodic\"") != std::string::npos);
  CHECK(out.diagnostics[2].find("descriptor") != std::string::npos);
  CHECK(out.diagnostics[3].find("warning") != std::string::npos);
}

TEST_CASE("responses without a candidate array yield a warning, not an error") {
  const auto instance = perm_instance();
  const auto out = streamforge::synth::parse_candidates(
      "I cannot propose anything today.", instance, Method::LlmStats, "i", 0);
  CHECK(out.candidates.empty());
  REQUIRE(!out.diagnostics.empty());
  CHECK(out.diagnostics[0].find("no candidate array") != std::string::npos);

  // Bracketed prose (like index expressions) must not be mistaken for the
  // candidate array.
  const auto prose = streamforge::synth::parse_candidates(
      "The cells x[1] and x[2] hold [1, 2] in most solutions.", instance,
      Method::LlmStats, "i", 0);
  CHECK(prose.candidates.empty());
}

TEST_CASE("permutation templates instantiate equality and ordering rules") {
  const auto instance = perm_instance();
  const std::vector<std::string> catalog{
      "ascending_pairs", "first_value",      "middle_value",
      "monotone_fraction", "displacement_mean", "inversion_count"};
  std::vector<PropertyStats> stats{
      stats_at(3.0, true),   stats_at(2.0, true),  stats_at(3.7, true),
      stats_at(0.4, true),   stats_at(2.0, true),  stats_at(7.0, false)};
  std::vector<std::string> skipped;
  const auto candidates = streamforge::synth::synthesize_templates(
      streamforge::corpus::ShapeKind::Permutation, catalog, stats, instance,
      "perm-6", &skipped);

  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0].text == "sum(p in 1..5)(bool2int(x[p+1] > x[p])) = 3");
  CHECK(candidates[0].descriptor == "ascending_pairs_eq_3");
  CHECK(candidates[0].method == Method::Template);
  CHECK(candidates[0].aggressiveness == Aggressiveness::TightFit);
  CHECK(candidates[0].form == SyntacticForm::Aggregate);
  CHECK(candidates[0].property_id == "ascending_pairs");
  CHECK(candidates[1].text == "x[1] = 2");

  REQUIRE(skipped.size() == 3);
  CHECK(skipped[0].find("middle_value") != std::string::npos);
  CHECK(skipped[0].find("not integral") != std::string::npos);
  CHECK(skipped[1].find("monotone_fraction") != std::string::npos);
  CHECK(skipped[2].find("displacement_mean") != std::string::npos);
  CHECK(skipped[2].find("no template rule") != std::string::npos);
}

TEST_CASE("monotone fraction at one becomes a universal ordering constraint") {
  const auto instance = perm_instance();
  const auto candidates = streamforge::synth::synthesize_templates(
      streamforge::corpus::ShapeKind::Permutation, {"monotone_fraction"},
      {stats_at(1.0, true)}, instance, "perm-6", nullptr);
  REQUIRE(candidates.size() == 1);
  CHECK(candidates[0].text == "forall(p in 1..5)(x[p+1] >= x[p])");
  CHECK(candidates[0].form == SyntacticForm::Universal);
}

TEST_CASE("grid templates cover sums, bounds, and pinned row sums") {
  const auto instance = grid_instance();
  const std::vector<std::string> catalog{"total_sum",    "main_diag_sum",
                                         "row_sums_std", "row_sums_mean",
                                         "value_min",    "argmax_row"};
  std::vector<PropertyStats> stats{
      stats_at(40.0, true),  stats_at(10.0, true), stats_at(0.0, true),
      stats_at(10.0, true),  stats_at(1.0, true),  stats_at(2.0, true)};
  std::vector<std::string> skipped;
  const auto candidates = streamforge::synth::synthesize_templates(
      streamforge::corpus::ShapeKind::Matrix, catalog, stats, instance, "g-4",
      &skipped);

  std::vector<std::string> texts;
  for (const auto& c : candidates) texts.push_back(c.text);
  REQUIRE(candidates.size() == 4);
  CHECK(texts[0] == "sum(r in 1..4, c in 1..4)(a[r, c]) = 40");
  CHECK(texts[1] == "sum(i in 1..4)(a[i, i]) = 10");
  CHECK(texts[2] == "forall(r in 1..4)(sum(c in 1..4)(a[r, c]) = 10)");
  CHECK(candidates[2].form == SyntacticForm::Universal);
  CHECK(texts[3] == "forall(r in 1..4, c in 1..4)(a[r, c] >= 1)");
  CHECK(candidates[3].descriptor == "value_min_floor_1");

  // row_sums_mean is consumed by the row_sums_std rule but has none of its
  // own; argmax locations cannot be written in the language at all.
  bool mean_skipped = false;
  bool argmax_skipped = false;
  for (const std::string& s : skipped) {
    if (s.find("row_sums_mean") != std::string::npos) mean_skipped = true;
    if (s.find("argmax_row") != std::string::npos) {
      argmax_skipped = true;
      CHECK(s.find("not expressible") != std::string::npos);
    }
  }
  CHECK(mean_skipped);
  CHECK(argmax_skipped);
}

TEST_CASE("dedup keeps the first occurrence under whitespace normalization") {
  CandidateStreamliner a;
  a.text = "x[1]=1";
  a.descriptor = "tight";
  a.method = Method::Template;
  CandidateStreamliner b;
  b.text = "x[1] = 1";
  b.descriptor = "from_llm";
  b.method = Method::LlmStats;
  CandidateStreamliner c;
  c.text = "x[2] = 1";
  c.descriptor = "other";
  const auto unique = streamforge::synth::dedup({a, b, c, a});
  REQUIRE(unique.size() == 2);
  CHECK(unique[0].descriptor == "tight");
  CHECK(unique[0].method == Method::Template);
  CHECK(unique[1].descriptor == "other");
}

TEST_CASE("candidates round-trip through the line-oriented pool file") {
  CandidateStreamliner a;
  a.text = "sum(p in 1..5)(x[p]) = 12";
  a.descriptor = "prefix_sum_12";
  a.method = Method::LlmStats;
  a.aggressiveness = Aggressiveness::Conservative;
  a.form = SyntacticForm::Aggregate;
  a.property_id = "prefix_half_sum";
  a.instance_id = "perm-6";
  a.seed = 5;
  CandidateStreamliner b;
  b.text = "x[1] = 1";
  b.descriptor = "first_pin";
  b.method = Method::Template;
  b.aggressiveness = Aggressiveness::TightFit;
  b.form = SyntacticForm::Existential;

  const std::string path = "synth_pool_roundtrip.jsonl";
  streamforge::synth::save_candidates(path, {a, b});
  const auto loaded = streamforge::synth::load_candidates(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == a);
  CHECK(loaded[1] == b);
  std::remove(path.c_str());

  const std::string bad = "synth_pool_bad.jsonl";
  {
    std::ofstream out(bad);
    out << "{not json}\n";
  }
  CHECK_THROWS_AS(streamforge::synth::load_candidates(bad), SynthError);
  std::remove(bad.c_str());
  CHECK_THROWS_AS(streamforge::synth::load_candidates("missing_pool.jsonl"),
                  SynthError);
}

TEST_CASE("the stub backend closes the loop without a network") {
  StatsFixture fx = make_stats_fixture();
  const auto payload = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, {"x = [1, 2, 3, 4, 5, 6]\n"},
      std::nullopt, kPermModel, {});
  streamforge::synth::StubLlmBackend stub;
  CHECK(stub.id() == "stub");
  const std::string response = stub.complete(payload.text, {});
  CHECK(response == stub.complete(payload.text, {}));

  const auto instance = perm_instance();
  const auto out = streamforge::synth::parse_candidates(
      response, instance, Method::LlmStats, "perm-6", 1);
  CHECK(out.candidates.size() >= 3);
  for (const auto& c : out.candidates) {
    CHECK(streamforge::synth::valid_descriptor(c.descriptor));
    CHECK(c.method == Method::LlmStats);
  }

  // Discovery payloads get a hypothesis line.
  ContrastPair pair;
  pair.high_ids = {0, 1, 2};
  pair.low_ids = {3, 4, 5};
  std::vector<std::string> texts(6, "x = [1, 2, 3, 4, 5, 6]\n");
  const auto discovery = streamforge::synth::build_discovery_payload(
      pair, texts, kPermModel, {});
  const std::string reply = stub.complete(discovery.text, {});
  CHECK(reply.find("Hypothesis:") != std::string::npos);

  // A 2-D model yields grid-shaped candidates.
  const auto grid_payload = streamforge::synth::build_stats_payload(
      fx.matrix, fx.ranking, fx.stats, {}, std::nullopt, kGridModel, {});
  const auto grid_out = streamforge::synth::parse_candidates(
      stub.complete(grid_payload.text, {}), grid_instance(), Method::LlmStats,
      "g-4", 1);
  CHECK(grid_out.candidates.size() >= 3);
}

TEST_CASE("the replay backend returns recorded bytes exactly") {
  const std::string dir = "synth_fixture_dir";
  fs::create_directories(dir);
  const std::string payload = "payload body\nwith two lines\n";
  const std::string digest = streamforge::util::hex_digest(payload);
  const std::string recorded = "recorded response\nwith \"quotes\"\n";
  {
    std::ofstream out(fs::path(dir) / (digest + ".response.txt"),
                      std::ios::binary);
    out << recorded;
  }
  streamforge::synth::ReplayLlmBackend replay(dir);
  CHECK(replay.id() == "replay");
  CHECK(replay.complete(payload, {}) == recorded);
  CHECK_THROWS_WITH_AS(replay.complete("some other payload", {}),
                       doctest::Contains("no recorded response"), SynthError);
  fs::remove_all(dir);
}

TEST_CASE("the live backend refuses to run without its key") {
  const std::string dir = "synth_live_fixture_dir";
  streamforge::synth::HttpLlmBackend live("http://localhost:1", dir,
                                          "STREAMFORGE_TEST_ABSENT_KEY");
  CHECK(live.id() == "http");
  CHECK_THROWS_WITH_AS(live.complete("payload", {}),
                       doctest::Contains("STREAMFORGE_TEST_ABSENT_KEY"),
                       SynthError);
  // The request fixture is still recorded for offline inspection.
  const std::string digest = streamforge::util::hex_digest("payload");
  CHECK(fs::exists(fs::path(dir) / (digest + ".request.json")));
  fs::remove_all(dir);
}

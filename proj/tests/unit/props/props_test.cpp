#include "streamforge/props/props.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "streamforge/encode/encode.hpp"
#include "streamforge/minicp/solve.hpp"

using streamforge::corpus::ShapeKind;
using streamforge::encode::SolutionTensor;
using streamforge::minicp::Instance;
using streamforge::minicp::Solution;
using streamforge::minicp::ValueArray;
using streamforge::props::PropertyStats;
using streamforge::props::PropsError;
using streamforge::props::catalog;
using streamforge::props::classify_properties;
using streamforge::props::compute_properties;
using streamforge::props::summarize;

namespace {

Instance make_instance(const std::string& model_text, const std::string& data_text) {
  return streamforge::minicp::resolve(streamforge::minicp::parse_model(model_text),
                                      streamforge::minicp::parse_data(data_text));
}

ValueArray vec(std::vector<long long> values) {
  ValueArray v;
  v.dims = {static_cast<long long>(values.size())};
  v.data = std::move(values);
  return v;
}

ValueArray mat(long long rows, long long cols, std::vector<long long> values) {
  ValueArray v;
  v.dims = {rows, cols};
  v.data = std::move(values);
  return v;
}

double prop(ShapeKind kind, const std::vector<double>& values, const std::string& id) {
  const auto& ids = catalog(kind);
  auto it = std::find(ids.begin(), ids.end(), id);
  REQUIRE(it != ids.end());
  return values[static_cast<std::size_t>(it - ids.begin())];
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9; }

const char* kPermutationModel = R"(
param n;
var x[1..n] in 1..n;
constraint alldifferent(x);
)";

const char* kLatinModel = R"(
param n;
set Cell = 1..n;
var grid[Cell, Cell] in 1..n;
constraint forall(r in Cell)(alldifferent([grid[r, c] | c in Cell]));
constraint forall(c in Cell)(alldifferent([grid[r, c] | r in Cell]));
)";

const char* kPackingModel = R"(
param n;
param deck_width;
param deck_length;
param width;
param length;
param class;
set Containers = 1..n;
var Left[Containers] in 0..deck_width - 1;
var Bottom[Containers] in 0..deck_length - 1;
var rotated[Containers] in bool;
)";

std::vector<double> permutation_props(const std::vector<long long>& x) {
  Instance inst = make_instance(kPermutationModel,
                                "n = " + std::to_string(x.size()) + ";");
  Solution sol;
  sol["x"] = vec(x);
  SolutionTensor t = streamforge::encode::encode(ShapeKind::Permutation, inst, sol);
  return compute_properties(t, inst, sol);
}

}  // namespace

TEST_CASE("every catalog has at least 25 distinct properties") {
  for (ShapeKind kind : {ShapeKind::Matrix, ShapeKind::Permutation,
                         ShapeKind::Assignment, ShapeKind::PackingCoords}) {
    const auto& ids = catalog(kind);
    CHECK(ids.size() >= 25);
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());
  }
  CHECK(catalog(ShapeKind::Matrix) == catalog(ShapeKind::Assignment));
}

TEST_CASE("matrix properties match hand-computed values") {
  Instance inst = make_instance(R"(
param n = 3;
var g[1..n, 1..n] in 1..9;
)",
                                "");
  Solution sol;
  sol["g"] = mat(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  SolutionTensor t = streamforge::encode::encode(ShapeKind::Matrix, inst, sol);
  std::vector<double> v = compute_properties(t, inst, sol);
  auto get = [&](const std::string& id) { return prop(ShapeKind::Matrix, v, id); };

  CHECK(close(get("row_sums_mean"), 15.0));
  CHECK(close(get("row_sums_std"), std::sqrt(54.0)));
  CHECK(close(get("row_sums_min"), 6.0));
  CHECK(close(get("row_sums_max"), 24.0));
  CHECK(close(get("col_sums_mean"), 15.0));
  CHECK(close(get("col_sums_std"), std::sqrt(6.0)));
  CHECK(close(get("main_diag_sum"), 15.0));
  CHECK(close(get("anti_diag_sum"), 15.0));
  CHECK(close(get("value_min"), 1.0));
  CHECK(close(get("value_max"), 9.0));
  CHECK(close(get("value_range"), 8.0));
  CHECK(close(get("value_mean"), 5.0));
  CHECK(close(get("value_std"), std::sqrt(60.0 / 9.0)));
  CHECK(close(get("row_monotone_fraction"), 1.0));
  CHECK(close(get("col_monotone_fraction"), 1.0));
  CHECK(close(get("horizontal_adjacency_diff"), 1.0));
  CHECK(close(get("vertical_adjacency_diff"), 3.0));
  CHECK(close(get("centroid_row"), 108.0 / 45.0));
  CHECK(close(get("centroid_col"), 96.0 / 45.0));
  CHECK(close(get("argmax_row"), 3.0));
  CHECK(close(get("argmax_col"), 3.0));
  CHECK(close(get("argmin_row"), 1.0));
  CHECK(close(get("argmin_col"), 1.0));
  CHECK(close(get("subsquare_2x2_sum_variance"), 40.0));
  CHECK(close(get("n_distinct_values"), 9.0));
  CHECK(close(get("total_sum"), 45.0));
}

TEST_CASE("order-4 Latin squares have constant row and column sums") {
  Instance inst = make_instance(kLatinModel, "n = 4;");
  streamforge::minicp::SolveOptions opts;
  opts.solution_limit = 0;
  auto result = streamforge::minicp::solve(inst, opts);
  REQUIRE(result.solutions.size() == 576);

  std::vector<std::vector<double>> vectors;
  for (const auto& sol : result.solutions) {
    SolutionTensor t = streamforge::encode::encode(ShapeKind::Matrix, inst, sol);
    std::vector<double> v = compute_properties(t, inst, sol);
    CHECK(close(prop(ShapeKind::Matrix, v, "row_sums_mean"), 10.0));
    CHECK(close(prop(ShapeKind::Matrix, v, "row_sums_std"), 0.0));
    CHECK(close(prop(ShapeKind::Matrix, v, "col_sums_min"), 10.0));
    CHECK(close(prop(ShapeKind::Matrix, v, "col_sums_max"), 10.0));
    vectors.push_back(std::move(v));
  }

  std::vector<PropertyStats> stats = classify_properties(vectors);
  const auto& ids = catalog(ShapeKind::Matrix);
  std::map<std::string, PropertyStats> by_id;
  for (std::size_t i = 0; i < ids.size(); ++i) by_id[ids[i]] = stats[i];

  CHECK(by_id["row_sums_mean"].constant);
  CHECK(by_id["row_sums_std"].constant);
  CHECK(by_id["col_sums_mean"].constant);
  CHECK(by_id["value_mean"].constant);
  CHECK(close(by_id["value_mean"].mean, 2.5));
  CHECK(close(by_id["total_sum"].mean, 40.0));
  // Diagonal sums genuinely vary across the corpus.
  CHECK_FALSE(by_id["main_diag_sum"].constant);
}

TEST_CASE("permutation properties match hand-computed values") {
  std::vector<double> identity = permutation_props({1, 2, 3, 4, 5, 6});
  auto get = [&](const std::string& id) {
    return prop(ShapeKind::Permutation, identity, id);
  };
  CHECK(close(get("ascending_pairs"), 5.0));
  CHECK(close(get("descending_pairs"), 0.0));
  CHECK(close(get("longest_ascending_run"), 6.0));
  CHECK(close(get("longest_descending_run"), 1.0));
  CHECK(close(get("max_adjacent_diff"), 1.0));
  CHECK(close(get("fixed_point_count"), 6.0));
  CHECK(close(get("inversion_count"), 0.0));
  CHECK(close(get("displacement_mean"), 0.0));
  CHECK(close(get("cycle_count"), 6.0));
  CHECK(close(get("first_value"), 1.0));
  CHECK(close(get("last_value"), 6.0));
  CHECK(close(get("middle_value"), 3.0));
  CHECK(close(get("monotone_fraction"), 1.0));
  CHECK(close(get("position_of_min"), 1.0));
  CHECK(close(get("position_of_max"), 6.0));
  CHECK(close(get("first_half_small_fraction"), 1.0));
  CHECK(close(get("prefix_half_sum"), 6.0));

  std::vector<double> reversed = permutation_props({6, 5, 4, 3, 2, 1});
  auto rget = [&](const std::string& id) {
    return prop(ShapeKind::Permutation, reversed, id);
  };
  CHECK(close(rget("ascending_pairs"), 0.0));
  CHECK(close(rget("descending_pairs"), 5.0));
  CHECK(close(rget("longest_descending_run"), 6.0));
  CHECK(close(rget("inversion_count"), 15.0));
  CHECK(close(rget("fixed_point_count"), 0.0));
  CHECK(close(rget("cycle_count"), 3.0));
  CHECK(close(rget("displacement_mean"), 3.0));
  CHECK(close(rget("monotone_fraction"), 0.0));

  std::vector<double> mixed = permutation_props({2, 4, 1, 5, 3});
  auto mget = [&](const std::string& id) {
    return prop(ShapeKind::Permutation, mixed, id);
  };
  CHECK(close(mget("ascending_pairs"), 2.0));
  CHECK(close(mget("peak_count"), 2.0));   // 4 and 5 are strict peaks
  CHECK(close(mget("valley_count"), 1.0)); // 1 is a strict valley
  CHECK(close(mget("adjacent_product_sum"), 2 * 4 + 4 * 1 + 1 * 5 + 5 * 3));
  CHECK(close(mget("centroid_ones_row"), 3.0));
  CHECK(close(mget("centroid_ones_col"), 3.0));
}

TEST_CASE("packing properties match a hand-computed layout") {
  Instance inst = make_instance(
      kPackingModel,
      "n = 3; deck_width = 6; deck_length = 4; "
      "width = [2, 2, 3]; length = [2, 1, 1]; class = [1, 2, 2];");
  Solution sol;
  sol["Left"] = vec({0, 0, 3});
  sol["Bottom"] = vec({0, 2, 0});
  sol["rotated"] = vec({0, 0, 0});
  SolutionTensor t = streamforge::encode::encode(ShapeKind::PackingCoords, inst, sol);
  std::vector<double> v = compute_properties(t, inst, sol);
  auto get = [&](const std::string& id) {
    return prop(ShapeKind::PackingCoords, v, id);
  };
  CHECK(close(get("left_mean"), 1.0));
  CHECK(close(get("left_std"), std::sqrt(2.0)));
  CHECK(close(get("bottom_mean"), 2.0 / 3.0));
  CHECK(close(get("right_edge_max"), 6.0));
  CHECK(close(get("top_edge_max"), 3.0));
  CHECK(close(get("rotated_fraction"), 0.0));
  CHECK(close(get("occupied_fraction"), 9.0 / 24.0));
  CHECK(close(get("n_boundaries"), 9.0));
  CHECK(close(get("bottom_even_fraction"), 1.0));
  CHECK(close(get("left_even_fraction"), 2.0 / 3.0));
  CHECK(close(get("class_left_range_max"), 3.0));
  CHECK(close(get("class_bottom_range_max"), 2.0));
  CHECK(close(get("class_centroid_spread_max"), std::sqrt(4.0625)));
  CHECK(close(get("class_centroid_spread_mean"), std::sqrt(4.0625) / 2.0));
  CHECK(close(get("empty_row_count"), 1.0));
  CHECK(close(get("empty_col_count"), 1.0));
  CHECK(close(get("effective_width_mean"), 7.0 / 3.0));
  CHECK(close(get("effective_length_mean"), 4.0 / 3.0));
  CHECK(close(get("corner_occupied"), 1.0));
  CHECK(close(get("column_height_mean"), 1.5));
}

TEST_CASE("summary statistics match a naive reimplementation") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (std::size_t n : {1u, 2u, 3u, 10u, 101u}) {
    std::vector<double> values(n);
    for (double& x : values) x = dist(rng);

    PropertyStats stats = summarize(values);

    double naive_mean = 0.0;
    for (double x : values) naive_mean += x;
    naive_mean /= static_cast<double>(n);
    double naive_var = 0.0;
    for (double x : values) naive_var += (x - naive_mean) * (x - naive_mean);
    naive_var /= static_cast<double>(n);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    CHECK(close(stats.mean, naive_mean));
    CHECK(close(stats.stddev, std::sqrt(naive_var)));
    CHECK(close(stats.min, sorted.front()));
    CHECK(close(stats.max, sorted.back()));
    CHECK(close(stats.median, sorted[(n - 1) / 2]));
  }
}

TEST_CASE("median takes the lower middle element") {
  CHECK(summarize({1, 2, 3, 4}).median == 2.0);
  CHECK(summarize({5, 1, 3}).median == 3.0);
  CHECK(summarize({7}).median == 7.0);
}

TEST_CASE("constant means exactly constant") {
  PropertyStats exact = summarize({2.0, 2.0, 2.0});
  CHECK(exact.constant);
  CHECK(exact.near_constant);

  PropertyStats wobble = summarize({2.0, 2.0, 2.0000001});
  CHECK_FALSE(wobble.constant);
  CHECK(wobble.near_constant);
}

TEST_CASE("near-constant uses a mean-scaled tolerance") {
  // Tight spread around 1.32: stddev well under 0.05.
  PropertyStats tight = summarize({1.311, 1.329, 1.320, 1.311, 1.329});
  CHECK(tight.stddev < 0.05);
  CHECK(tight.near_constant);
  CHECK_FALSE(tight.constant);

  // Same relative spread around a large mean passes the scaled threshold.
  PropertyStats large = summarize({99.1, 100.9, 100.0, 99.1, 100.9});
  CHECK(large.stddev > 0.05);
  CHECK(large.stddev <= 0.01 * (100.0 + 1.0));
  CHECK(large.near_constant);

  // A genuinely varying property fails both tests.
  PropertyStats loose = summarize({0.1, 0.9, 0.2, 0.8, 0.5});
  CHECK_FALSE(loose.near_constant);
  PropertyStats large_loose = summarize({95.0, 105.0, 98.0, 102.0, 100.0});
  CHECK_FALSE(large_loose.near_constant);
}

TEST_CASE("classification rejects empty and ragged input") {
  CHECK_THROWS_AS(classify_properties({}), PropsError);
  CHECK_THROWS_AS(classify_properties({{1.0, 2.0}, {1.0}}), PropsError);
  CHECK_THROWS_AS(summarize({}), PropsError);
}

TEST_CASE("progression sorts rows and fits the maxima") {
  auto stats_with = [](double mn, double mx) {
    PropertyStats s;
    s.mean = (mn + mx) / 2.0;
    s.min = mn;
    s.max = mx;
    return s;
  };
  // Deliberately unsorted input.
  streamforge::props::Progression p = streamforge::props::progression({
      {5.0, stats_with(0.0, 15.0)},
      {3.0, stats_with(0.0, 6.0)},
      {4.0, stats_with(0.0, 10.0)},
  });
  REQUIRE(p.rows.size() == 3);
  CHECK(p.rows[0].size == 3.0);
  CHECK(p.rows[1].size == 4.0);
  CHECK(p.rows[2].size == 5.0);
  CHECK(p.rows[0].max == 6.0);
  REQUIRE(p.has_fit);
  CHECK(close(p.slope, 4.5));
  CHECK(close(p.intercept, -23.0 / 3.0));
}

TEST_CASE("progression needs two sizes for a fit") {
  PropertyStats s;
  s.min = 1.0;
  s.max = 2.0;
  CHECK_FALSE(streamforge::props::progression({{4.0, s}}).has_fit);
  CHECK_FALSE(streamforge::props::progression({{4.0, s}, {4.0, s}}).has_fit);
  CHECK(streamforge::props::progression({}).rows.empty());
}

TEST_CASE("stats table lists one labelled row per property") {
  Instance inst = make_instance(kPermutationModel, "n = 4;");
  streamforge::minicp::SolveOptions opts;
  opts.solution_limit = 0;
  auto result = streamforge::minicp::solve(inst, opts);
  std::vector<std::vector<double>> vectors;
  for (const auto& sol : result.solutions) {
    SolutionTensor t = streamforge::encode::encode(ShapeKind::Permutation, inst, sol);
    vectors.push_back(compute_properties(t, inst, sol));
  }
  auto stats = classify_properties(vectors);
  std::string table =
      streamforge::props::stats_table(ShapeKind::Permutation, stats);
  CHECK(table.find("property\tmean") == 0);
  CHECK(table.find("ascending_pairs") != std::string::npos);
  // The ones-grid centroid never moves, so it must be labelled constant.
  CHECK(table.find("centroid_ones_row") != std::string::npos);
  std::istringstream lines(table);
  std::string line;
  int constant_rows = 0;
  while (std::getline(lines, line)) {
    if (line.find("centroid_ones") == 0) {
      CHECK(line.find("\tconstant") != std::string::npos);
      ++constant_rows;
    }
  }
  CHECK(constant_rows == 2);
}

#include "streamforge/props/props.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace streamforge::props {

namespace {

double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return xs.empty() ? 0.0 : total / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs, double mean) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

// ---- matrix / assignment ---------------------------------------------------

std::vector<double> matrix_properties(const std::vector<std::vector<double>>& g) {
  const int height = static_cast<int>(g.size());
  const int width = static_cast<int>(g[0].size());
  std::vector<double> out;
  out.reserve(28);

  std::vector<double> row_sums(height, 0.0), col_sums(width, 0.0);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      row_sums[r] += g[r][c];
      col_sums[c] += g[r][c];
      values.push_back(g[r][c]);
    }
  }

  const double row_mean = mean_of(row_sums);
  out.push_back(row_mean);
  out.push_back(population_std(row_sums, row_mean));
  out.push_back(*std::min_element(row_sums.begin(), row_sums.end()));
  out.push_back(*std::max_element(row_sums.begin(), row_sums.end()));
  const double col_mean = mean_of(col_sums);
  out.push_back(col_mean);
  out.push_back(population_std(col_sums, col_mean));
  out.push_back(*std::min_element(col_sums.begin(), col_sums.end()));
  out.push_back(*std::max_element(col_sums.begin(), col_sums.end()));

  const int diag_len = std::min(height, width);
  double main_diag = 0.0, anti_diag = 0.0;
  for (int i = 0; i < diag_len; ++i) {
    main_diag += g[i][i];
    anti_diag += g[i][width - 1 - i];
  }
  out.push_back(main_diag);
  out.push_back(anti_diag);

  const double vmin = *std::min_element(values.begin(), values.end());
  const double vmax = *std::max_element(values.begin(), values.end());
  const double vmean = mean_of(values);
  out.push_back(vmin);
  out.push_back(vmax);
  out.push_back(vmax - vmin);
  out.push_back(vmean);
  out.push_back(population_std(values, vmean));

  int monotone_rows = 0;
  for (int r = 0; r < height; ++r) {
    bool mono = true;
    for (int c = 0; c + 1 < width; ++c) {
      if (g[r][c] > g[r][c + 1]) { mono = false; break; }
    }
    if (mono) ++monotone_rows;
  }
  int monotone_cols = 0;
  for (int c = 0; c < width; ++c) {
    bool mono = true;
    for (int r = 0; r + 1 < height; ++r) {
      if (g[r][c] > g[r + 1][c]) { mono = false; break; }
    }
    if (mono) ++monotone_cols;
  }
  out.push_back(static_cast<double>(monotone_rows) / height);
  out.push_back(static_cast<double>(monotone_cols) / width);

  double hdiff = 0.0;
  int hpairs = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c + 1 < width; ++c) {
      hdiff += std::abs(g[r][c + 1] - g[r][c]);
      ++hpairs;
    }
  }
  out.push_back(hpairs == 0 ? 0.0 : hdiff / hpairs);
  double vdiff = 0.0;
  int vpairs = 0;
  for (int c = 0; c < width; ++c) {
    for (int r = 0; r + 1 < height; ++r) {
      vdiff += std::abs(g[r + 1][c] - g[r][c]);
      ++vpairs;
    }
  }
  out.push_back(vpairs == 0 ? 0.0 : vdiff / vpairs);

  double total = 0.0, wr = 0.0, wc = 0.0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      total += g[r][c];
      wr += (r + 1) * g[r][c];
      wc += (c + 1) * g[r][c];
    }
  }
  out.push_back(total == 0.0 ? (height + 1) / 2.0 : wr / total);
  out.push_back(total == 0.0 ? (width + 1) / 2.0 : wc / total);

  int max_r = 0, max_c = 0, min_r = 0, min_c = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (g[r][c] > g[max_r][max_c]) { max_r = r; max_c = c; }
      if (g[r][c] < g[min_r][min_c]) { min_r = r; min_c = c; }
    }
  }
  out.push_back(max_r + 1.0);
  out.push_back(max_c + 1.0);
  out.push_back(min_r + 1.0);
  out.push_back(min_c + 1.0);

  std::vector<double> block_sums;
  for (int r = 0; r + 1 < height; ++r) {
    for (int c = 0; c + 1 < width; ++c) {
      block_sums.push_back(g[r][c] + g[r][c + 1] + g[r + 1][c] + g[r + 1][c + 1]);
    }
  }
  if (block_sums.empty()) {
    out.push_back(0.0);
  } else {
    const double bmean = mean_of(block_sums);
    const double bstd = population_std(block_sums, bmean);
    out.push_back(bstd * bstd);
  }

  out.push_back(static_cast<double>(
      std::set<double>(values.begin(), values.end()).size()));
  out.push_back(total);
  return out;
}

// ---- permutation -----------------------------------------------------------

std::vector<double> permutation_properties(const std::vector<long long>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out;
  out.reserve(26);

  int ascending = 0, descending = 0;
  for (int p = 0; p + 1 < n; ++p) {
    if (x[p + 1] > x[p]) ++ascending;
    if (x[p + 1] < x[p]) ++descending;
  }
  out.push_back(ascending);
  out.push_back(descending);

  int longest_asc = n > 0 ? 1 : 0, longest_desc = n > 0 ? 1 : 0;
  int run_asc = 1, run_desc = 1;
  for (int p = 0; p + 1 < n; ++p) {
    run_asc = x[p + 1] > x[p] ? run_asc + 1 : 1;
    run_desc = x[p + 1] < x[p] ? run_desc + 1 : 1;
    longest_asc = std::max(longest_asc, run_asc);
    longest_desc = std::max(longest_desc, run_desc);
  }
  out.push_back(longest_asc);
  out.push_back(longest_desc);

  std::vector<double> diffs;
  for (int p = 0; p + 1 < n; ++p) {
    diffs.push_back(std::abs(static_cast<double>(x[p + 1] - x[p])));
  }
  if (diffs.empty()) {
    out.insert(out.end(), {0.0, 0.0, 0.0, 0.0});
  } else {
    const double dmean = mean_of(diffs);
    out.push_back(*std::max_element(diffs.begin(), diffs.end()));
    out.push_back(dmean);
    out.push_back(*std::min_element(diffs.begin(), diffs.end()));
    out.push_back(population_std(diffs, dmean));
  }

  int fixed_points = 0;
  for (int p = 0; p < n; ++p) {
    if (x[p] == p + 1) ++fixed_points;
  }
  out.push_back(fixed_points);

  int inversions = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (x[i] > x[j]) ++inversions;
    }
  }
  out.push_back(inversions);

  double disp_sum = 0.0, disp_max = 0.0;
  for (int p = 0; p < n; ++p) {
    const double d = std::abs(static_cast<double>(x[p] - (p + 1)));
    disp_sum += d;
    disp_max = std::max(disp_max, d);
  }
  out.push_back(n == 0 ? 0.0 : disp_sum / n);
  out.push_back(disp_max);

  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  int cycles = 0;
  for (int p = 0; p < n; ++p) {
    if (visited[static_cast<std::size_t>(p)]) continue;
    ++cycles;
    int q = p;
    while (!visited[static_cast<std::size_t>(q)]) {
      visited[static_cast<std::size_t>(q)] = true;
      q = static_cast<int>(x[static_cast<std::size_t>(q)]) - 1;
      if (q < 0 || q >= n) break;  // not a true permutation; stop the walk
    }
  }
  out.push_back(cycles);

  out.push_back(n == 0 ? 0.0 : static_cast<double>(x[0]));
  out.push_back(n == 0 ? 0.0 : static_cast<double>(x[static_cast<std::size_t>(n - 1)]));
  out.push_back(n == 0 ? 0.0
                       : static_cast<double>(x[static_cast<std::size_t>((n - 1) / 2)]));

  // Centroid of the ones in the position-by-value 0/1 grid.
  out.push_back((n + 1) / 2.0);
  double value_mean = 0.0;
  for (int p = 0; p < n; ++p) value_mean += static_cast<double>(x[p]);
  out.push_back(n == 0 ? 0.0 : value_mean / n);

  int pos_min = 0, pos_max = 0;
  for (int p = 1; p < n; ++p) {
    if (x[p] < x[pos_min]) pos_min = p;
    if (x[p] > x[pos_max]) pos_max = p;
  }
  out.push_back(pos_min + 1.0);
  out.push_back(pos_max + 1.0);

  const int half = n / 2;
  int small_in_front = 0;
  for (int p = 0; p < half; ++p) {
    if (x[p] <= half) ++small_in_front;
  }
  out.push_back(half == 0 ? 0.0 : static_cast<double>(small_in_front) / half);

  double adj_product = 0.0;
  for (int p = 0; p + 1 < n; ++p) {
    adj_product += static_cast<double>(x[p]) * static_cast<double>(x[p + 1]);
  }
  out.push_back(adj_product);

  int peaks = 0, valleys = 0;
  for (int p = 1; p + 1 < n; ++p) {
    if (x[p] > x[p - 1] && x[p] > x[p + 1]) ++peaks;
    if (x[p] < x[p - 1] && x[p] < x[p + 1]) ++valleys;
  }
  out.push_back(peaks);
  out.push_back(valleys);

  out.push_back(n < 2 ? 1.0 : static_cast<double>(ascending) / (n - 1));

  double prefix_sum = 0.0;
  for (int p = 0; p < half; ++p) prefix_sum += static_cast<double>(x[p]);
  out.push_back(prefix_sum);
  return out;
}

// ---- packing ---------------------------------------------------------------

std::vector<double> packing_properties(const encode::PackingView& view,
                                       const encode::SolutionTensor& raster) {
  std::vector<double> out;
  out.reserve(27);
  const int n = view.n_containers;

  std::vector<double> lefts, bottoms, rights, tops, widths, lengths;
  for (int i = 0; i < n; ++i) {
    lefts.push_back(static_cast<double>(view.left[static_cast<std::size_t>(i)]));
    bottoms.push_back(static_cast<double>(view.bottom[static_cast<std::size_t>(i)]));
    rights.push_back(static_cast<double>(view.left[static_cast<std::size_t>(i)] +
                                         view.width[static_cast<std::size_t>(i)]));
    tops.push_back(static_cast<double>(view.bottom[static_cast<std::size_t>(i)] +
                                       view.length[static_cast<std::size_t>(i)]));
    widths.push_back(static_cast<double>(view.width[static_cast<std::size_t>(i)]));
    lengths.push_back(static_cast<double>(view.length[static_cast<std::size_t>(i)]));
  }

  const double left_mean = mean_of(lefts);
  out.push_back(left_mean);
  out.push_back(population_std(lefts, left_mean));
  out.push_back(*std::min_element(lefts.begin(), lefts.end()));
  out.push_back(*std::max_element(lefts.begin(), lefts.end()));
  const double bottom_mean = mean_of(bottoms);
  out.push_back(bottom_mean);
  out.push_back(population_std(bottoms, bottom_mean));
  out.push_back(*std::min_element(bottoms.begin(), bottoms.end()));
  out.push_back(*std::max_element(bottoms.begin(), bottoms.end()));
  out.push_back(mean_of(rights));
  out.push_back(*std::max_element(rights.begin(), rights.end()));
  out.push_back(mean_of(tops));
  out.push_back(*std::max_element(tops.begin(), tops.end()));

  double rotated = 0.0;
  for (long long r : view.rotated) rotated += r != 0 ? 1.0 : 0.0;
  out.push_back(rotated / n);

  int occupied = 0;
  for (double v : raster.data) {
    if (v != 0.0) ++occupied;
  }
  out.push_back(static_cast<double>(occupied) / static_cast<double>(raster.size()));

  int boundaries = 0;
  for (int h = 0; h < raster.height; ++h) {
    for (int w = 0; w + 1 < raster.width; ++w) {
      if ((raster.at(0, h, w) == 0.0) != (raster.at(0, h, w + 1) == 0.0)) ++boundaries;
    }
  }
  for (int w = 0; w < raster.width; ++w) {
    for (int h = 0; h + 1 < raster.height; ++h) {
      if ((raster.at(0, h, w) == 0.0) != (raster.at(0, h + 1, w) == 0.0)) ++boundaries;
    }
  }
  out.push_back(boundaries);

  int bottom_even = 0, left_even = 0;
  for (int i = 0; i < n; ++i) {
    if (view.bottom[static_cast<std::size_t>(i)] % 2 == 0) ++bottom_even;
    if (view.left[static_cast<std::size_t>(i)] % 2 == 0) ++left_even;
  }
  out.push_back(static_cast<double>(bottom_even) / n);
  out.push_back(static_cast<double>(left_even) / n);

  std::map<long long, std::vector<int>> by_class;
  for (int i = 0; i < n; ++i) by_class[view.class_id[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<double> spreads;
  double left_range_max = 0.0, bottom_range_max = 0.0;
  for (const auto& [cls, members] : by_class) {
    double cx = 0.0, cy = 0.0;
    double lmin = lefts[static_cast<std::size_t>(members[0])], lmax = lmin;
    double bmin = bottoms[static_cast<std::size_t>(members[0])], bmax = bmin;
    for (int i : members) {
      cx += lefts[static_cast<std::size_t>(i)] + widths[static_cast<std::size_t>(i)] / 2.0;
      cy += bottoms[static_cast<std::size_t>(i)] + lengths[static_cast<std::size_t>(i)] / 2.0;
      lmin = std::min(lmin, lefts[static_cast<std::size_t>(i)]);
      lmax = std::max(lmax, lefts[static_cast<std::size_t>(i)]);
      bmin = std::min(bmin, bottoms[static_cast<std::size_t>(i)]);
      bmax = std::max(bmax, bottoms[static_cast<std::size_t>(i)]);
    }
    cx /= static_cast<double>(members.size());
    cy /= static_cast<double>(members.size());
    double spread = 0.0;
    for (int i : members) {
      const double dx = lefts[static_cast<std::size_t>(i)] +
                        widths[static_cast<std::size_t>(i)] / 2.0 - cx;
      const double dy = bottoms[static_cast<std::size_t>(i)] +
                        lengths[static_cast<std::size_t>(i)] / 2.0 - cy;
      spread += std::sqrt(dx * dx + dy * dy);
    }
    spreads.push_back(spread / static_cast<double>(members.size()));
    left_range_max = std::max(left_range_max, lmax - lmin);
    bottom_range_max = std::max(bottom_range_max, bmax - bmin);
  }
  out.push_back(mean_of(spreads));
  out.push_back(*std::max_element(spreads.begin(), spreads.end()));
  out.push_back(left_range_max);
  out.push_back(bottom_range_max);

  int empty_rows = 0;
  for (int h = 0; h < raster.height; ++h) {
    bool any = false;
    for (int w = 0; w < raster.width; ++w) {
      if (raster.at(0, h, w) != 0.0) { any = true; break; }
    }
    if (!any) ++empty_rows;
  }
  int empty_cols = 0;
  for (int w = 0; w < raster.width; ++w) {
    bool any = false;
    for (int h = 0; h < raster.height; ++h) {
      if (raster.at(0, h, w) != 0.0) { any = true; break; }
    }
    if (!any) ++empty_cols;
  }
  out.push_back(empty_rows);
  out.push_back(empty_cols);

  out.push_back(mean_of(widths));
  out.push_back(mean_of(lengths));
  out.push_back(raster.at(0, 0, 0) != 0.0 ? 1.0 : 0.0);

  double height_sum = 0.0;
  for (int w = 0; w < raster.width; ++w) {
    int top = 0;
    for (int h = raster.height - 1; h >= 0; --h) {
      if (raster.at(0, h, w) != 0.0) { top = h + 1; break; }
    }
    height_sum += top;
  }
  out.push_back(height_sum / raster.width);
  return out;
}

std::vector<std::vector<double>> raw_grid(const minicp::Instance& instance,
                                          const minicp::Solution& solution) {
  const minicp::VarInfo& var = encode::grid_var(instance);
  auto extents = var.extents();
  const int height = static_cast<int>(extents[0]);
  const int width = static_cast<int>(extents[1]);
  auto it = solution.find(var.name);
  if (it == solution.end()) {
    throw PropsError("solution has no values for variable '" + var.name + "'");
  }
  std::vector<std::vector<double>> g(static_cast<std::size_t>(height),
                                     std::vector<double>(static_cast<std::size_t>(width)));
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      g[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
          static_cast<double>(it->second.at(r + 1, c + 1));
    }
  }
  return g;
}

}  // namespace

const std::vector<std::string>& catalog(corpus::ShapeKind kind) {
  static const std::vector<std::string> grid_catalog = {
      "row_sums_mean", "row_sums_std", "row_sums_min", "row_sums_max",
      "col_sums_mean", "col_sums_std", "col_sums_min", "col_sums_max",
      "main_diag_sum", "anti_diag_sum",
      "value_min", "value_max", "value_range", "value_mean", "value_std",
      "row_monotone_fraction", "col_monotone_fraction",
      "horizontal_adjacency_diff", "vertical_adjacency_diff",
      "centroid_row", "centroid_col",
      "argmax_row", "argmax_col", "argmin_row", "argmin_col",
      "subsquare_2x2_sum_variance", "n_distinct_values", "total_sum",
  };
  static const std::vector<std::string> permutation_catalog = {
      "ascending_pairs", "descending_pairs",
      "longest_ascending_run", "longest_descending_run",
      "max_adjacent_diff", "mean_adjacent_diff", "min_adjacent_diff",
      "adjacent_diff_std",
      "fixed_point_count", "inversion_count",
      "displacement_mean", "displacement_max", "cycle_count",
      "first_value", "last_value", "middle_value",
      "centroid_ones_row", "centroid_ones_col",
      "position_of_min", "position_of_max",
      "first_half_small_fraction", "adjacent_product_sum",
      "peak_count", "valley_count", "monotone_fraction", "prefix_half_sum",
  };
  static const std::vector<std::string> packing_catalog = {
      "left_mean", "left_std", "left_min", "left_max",
      "bottom_mean", "bottom_std", "bottom_min", "bottom_max",
      "right_edge_mean", "right_edge_max", "top_edge_mean", "top_edge_max",
      "rotated_fraction", "occupied_fraction", "n_boundaries",
      "bottom_even_fraction", "left_even_fraction",
      "class_centroid_spread_mean", "class_centroid_spread_max",
      "class_left_range_max", "class_bottom_range_max",
      "empty_row_count", "empty_col_count",
      "effective_width_mean", "effective_length_mean",
      "corner_occupied", "column_height_mean",
  };
  switch (kind) {
    case corpus::ShapeKind::Matrix:
    case corpus::ShapeKind::Assignment:
      return grid_catalog;
    case corpus::ShapeKind::Permutation:
      return permutation_catalog;
    case corpus::ShapeKind::PackingCoords:
      return packing_catalog;
  }
  return grid_catalog;
}

std::vector<double> compute_properties(const encode::SolutionTensor& tensor,
                                       const minicp::Instance& instance,
                                       const minicp::Solution& solution) {
  std::vector<double> out;
  switch (tensor.kind) {
    case corpus::ShapeKind::Matrix:
    case corpus::ShapeKind::Assignment:
      out = matrix_properties(raw_grid(instance, solution));
      break;
    case corpus::ShapeKind::Permutation: {
      const minicp::VarInfo& var = encode::permutation_var(instance);
      auto it = solution.find(var.name);
      if (it == solution.end()) {
        throw PropsError("solution has no values for variable '" + var.name + "'");
      }
      out = permutation_properties(it->second.data);
      break;
    }
    case corpus::ShapeKind::PackingCoords:
      out = packing_properties(encode::packing_view(instance, solution), tensor);
      break;
  }
  const auto& ids = catalog(tensor.kind);
  if (out.size() != ids.size()) {
    throw PropsError("property vector does not cover the catalog");
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw PropsError("non-finite property value");
  }
  return out;
}

PropertyStats summarize(const std::vector<double>& values) {
  if (values.empty()) {
    throw PropsError("cannot summarize an empty value list");
  }
  PropertyStats stats;
  stats.mean = mean_of(values);
  stats.stddev = population_std(values, stats.mean);
  stats.min = *std::min_element(values.begin(), values.end());
  stats.max = *std::max_element(values.begin(), values.end());
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  stats.median = sorted[(sorted.size() - 1) / 2];
  stats.constant = stats.max == stats.min;
  stats.near_constant =
      stats.stddev <= std::max(0.05, 0.01 * (std::abs(stats.mean) + 1.0));
  return stats;
}

std::vector<PropertyStats> classify_properties(
    const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) {
    throw PropsError("cannot classify an empty corpus");
  }
  const std::size_t n_props = vectors[0].size();
  for (const auto& row : vectors) {
    if (row.size() != n_props) {
      throw PropsError("property vectors have inconsistent lengths");
    }
  }
  std::vector<PropertyStats> out;
  out.reserve(n_props);
  std::vector<double> column(vectors.size());
  for (std::size_t p = 0; p < n_props; ++p) {
    for (std::size_t s = 0; s < vectors.size(); ++s) column[s] = vectors[s][p];
    out.push_back(summarize(column));
  }
  return out;
}

Progression progression(
    const std::vector<std::pair<double, PropertyStats>>& per_size) {
  Progression result;
  for (const auto& [size, stats] : per_size) {
    result.rows.push_back({size, stats.mean, stats.min, stats.max});
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const ProgressionRow& a, const ProgressionRow& b) {
              return a.size < b.size;
            });
  if (result.rows.size() < 2) return result;

  double sx = 0.0, sy = 0.0;
  for (const auto& row : result.rows) {
    sx += row.size;
    sy += row.max;
  }
  const double n = static_cast<double>(result.rows.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& row : result.rows) {
    sxx += (row.size - mx) * (row.size - mx);
    sxy += (row.size - mx) * (row.max - my);
  }
  if (sxx == 0.0) return result;  // all sizes identical: no line to fit
  result.has_fit = true;
  result.slope = sxy / sxx;
  result.intercept = my - result.slope * mx;
  return result;
}

std::string stats_table(corpus::ShapeKind kind,
                        const std::vector<PropertyStats>& stats) {
  const auto& ids = catalog(kind);
  if (stats.size() != ids.size()) {
    throw PropsError("stats rows do not cover the catalog");
  }
  std::ostringstream out;
  out.precision(6);
  out << "property\tmean\tstd\tmin\tmax\tmedian\tclass\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const PropertyStats& s = stats[i];
    const char* label = s.constant ? "constant"
                        : s.near_constant ? "near_constant"
                                          : "varying";
    out << ids[i] << '\t' << s.mean << '\t' << s.stddev << '\t' << s.min
        << '\t' << s.max << '\t' << s.median << '\t' << label << '\n';
  }
  return out.str();
}

}  // namespace streamforge::props

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "streamforge/corpus/problem.hpp"
#include "streamforge/encode/encode.hpp"
#include "streamforge/minicp/model.hpp"

namespace streamforge::props {

class PropsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered property ids for a shape kind.  The order is fixed: property
/// vectors, stats rows and correlation tables all align with it.
const std::vector<std::string>& catalog(corpus::ShapeKind kind);

/// Computes every catalog property of one solution.  Scalar statistics
/// (sums, extrema, centroids) are taken over the raw integer values;
/// raster-based packing properties (occupancy, boundaries) read the tensor.
/// Returns one finite value per catalog entry, in catalog order.
std::vector<double> compute_properties(const encode::SolutionTensor& tensor,
                                       const minicp::Instance& instance,
                                       const minicp::Solution& solution);

/// Distribution of one property across a solution corpus.
struct PropertyStats {
  double mean = 0.0;
  double stddev = 0.0;  ///< population standard deviation
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;  ///< lower middle element for even counts
  bool constant = false;       ///< max == min exactly
  bool near_constant = false;  ///< stddev <= max(0.05, 0.01 * (|mean| + 1))
};

/// Stats for one property's values across solutions.  Throws on empty input.
PropertyStats summarize(const std::vector<double>& values);

/// Stats for every property: `vectors` holds one property vector per
/// solution, all aligned with the same catalog.  Throws on empty input or
/// ragged rows.
std::vector<PropertyStats> classify_properties(
    const std::vector<std::vector<double>>& vectors);

struct ProgressionRow {
  double size = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// How one property's distribution moves with instance size, plus a
/// least-squares line fitted to the per-size maxima (only when at least two
/// sizes are present).
struct Progression {
  std::vector<ProgressionRow> rows;  ///< sorted by ascending size
  bool has_fit = false;
  double slope = 0.0;
  double intercept = 0.0;
};

Progression progression(
    const std::vector<std::pair<double, PropertyStats>>& per_size);

/// Plain-text table of per-property stats, one row per catalog entry.
std::string stats_table(corpus::ShapeKind kind,
                        const std::vector<PropertyStats>& stats);

}  // namespace streamforge::props

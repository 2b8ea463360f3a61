#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/cnn/cnn.hpp"
#include "streamforge/props/props.hpp"

namespace streamforge::correlate {

class CorrelateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One structural property's value per solution, aligned with the corpus.
struct PropertyVector {
  std::string id;
  std::vector<double> values;
};

/// Pearson product-moment correlation, two-pass. Returns 0 for vectors
/// without variance; callers are expected to check for that case first.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct CorrelationMatrix {
  struct FilterKey {
    unsigned seed = 0;
    int layer = 0;
    int filter = 0;
  };

  std::vector<FilterKey> filters;        ///< row per retained filter
  std::vector<std::string> properties;   ///< column per property
  std::vector<std::vector<double>> r;    ///< [filter][property], in [-1, 1]
  /// r is undefined when either vector has zero variance; such cells are
  /// flagged false here (and hold 0 in `r`) rather than pretending to be
  /// uncorrelated.
  std::vector<std::vector<char>> defined;
  std::vector<char> filter_constant;    ///< activation vector has no variance
  std::vector<char> property_constant;  ///< value vector has no variance
  std::size_t corpus_size = 0;

  /// Indices of the rows most correlated with one property: |r| descending,
  /// ties by (seed, layer, filter); undefined cells excluded. At most `k`.
  std::vector<int> top_filters(std::size_t property_index, int k = 3) const;
};

/// Correlates every retained filter's activation vector with every property's
/// value vector. All vectors must cover the same corpus of at least three
/// solutions.
CorrelationMatrix correlate(const std::vector<cnn::FilterRecord>& filters,
                            const std::vector<PropertyVector>& properties);

struct RankedProperty {
  std::string id;
  double score = 0.0;  ///< max |r| over all retained filters, 0 if undefined
  bool implied = false;  ///< constant across the corpus; cannot discriminate
};

/// Orders properties by how strongly any retained filter tracks them (max
/// |r| across the ensemble, descending). Constant properties go to the
/// bottom tagged "implied". With no retained filters the ordering falls back
/// to near-constant-first, which is the natural streamlining priority.
/// `stats` must align with `matrix.properties`.
std::vector<RankedProperty> rank_properties(
    const CorrelationMatrix& matrix,
    const std::vector<props::PropertyStats>& stats);

/// Tab-separated matrix rendering: one row per filter, one column per
/// property, undefined cells printed as "undef".
std::string matrix_table(const CorrelationMatrix& matrix);

}  // namespace streamforge::correlate

#include "streamforge/correlate/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace streamforge::correlate {

namespace {

bool is_constant(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return 0.0;
  const double r = cov / std::sqrt(var_a * var_b);
  return std::clamp(r, -1.0, 1.0);
}

CorrelationMatrix correlate(const std::vector<cnn::FilterRecord>& filters,
                            const std::vector<PropertyVector>& properties) {
  std::size_t corpus = 0;
  if (!filters.empty()) {
    corpus = filters.front().activations.size();
  } else if (!properties.empty()) {
    corpus = properties.front().values.size();
  }
  if (corpus < 3) {
    throw CorrelateError("correlation needs at least three solutions");
  }
  for (const cnn::FilterRecord& f : filters) {
    if (f.activations.size() != corpus) {
      throw CorrelateError(
          "filter activation vectors cover different solution sets");
    }
  }
  for (const PropertyVector& p : properties) {
    if (p.values.size() != corpus) {
      throw CorrelateError("property \"" + p.id +
                           "\" covers a different solution set");
    }
  }

  CorrelationMatrix m;
  m.corpus_size = corpus;
  m.filters.reserve(filters.size());
  m.filter_constant.reserve(filters.size());
  for (const cnn::FilterRecord& f : filters) {
    m.filters.push_back({f.seed, f.layer, f.filter});
    m.filter_constant.push_back(is_constant(f.activations) ? 1 : 0);
  }
  m.properties.reserve(properties.size());
  m.property_constant.reserve(properties.size());
  for (const PropertyVector& p : properties) {
    m.properties.push_back(p.id);
    m.property_constant.push_back(is_constant(p.values) ? 1 : 0);
  }

  m.r.assign(filters.size(), std::vector<double>(properties.size(), 0.0));
  m.defined.assign(filters.size(), std::vector<char>(properties.size(), 0));
  for (std::size_t fi = 0; fi < filters.size(); ++fi) {
    for (std::size_t pi = 0; pi < properties.size(); ++pi) {
      if (m.filter_constant[fi] || m.property_constant[pi]) continue;
      m.r[fi][pi] = pearson(filters[fi].activations, properties[pi].values);
      m.defined[fi][pi] = 1;
    }
  }
  return m;
}

std::vector<int> CorrelationMatrix::top_filters(std::size_t property_index,
                                                int k) const {
  std::vector<int> rows;
  for (std::size_t fi = 0; fi < filters.size(); ++fi) {
    if (defined[fi][property_index]) rows.push_back(static_cast<int>(fi));
  }
  std::sort(rows.begin(), rows.end(), [&](int a, int b) {
    const double ra = std::fabs(r[static_cast<std::size_t>(a)][property_index]);
    const double rb = std::fabs(r[static_cast<std::size_t>(b)][property_index]);
    if (ra != rb) return ra > rb;
    const FilterKey& fa = filters[static_cast<std::size_t>(a)];
    const FilterKey& fb = filters[static_cast<std::size_t>(b)];
    if (fa.seed != fb.seed) return fa.seed < fb.seed;
    if (fa.layer != fb.layer) return fa.layer < fb.layer;
    return fa.filter < fb.filter;
  });
  if (rows.size() > static_cast<std::size_t>(k)) {
    rows.resize(static_cast<std::size_t>(k));
  }
  return rows;
}

std::vector<RankedProperty> rank_properties(
    const CorrelationMatrix& matrix,
    const std::vector<props::PropertyStats>& stats) {
  if (stats.size() != matrix.properties.size()) {
    throw CorrelateError("property statistics do not align with the matrix");
  }

  struct Entry {
    std::size_t index;
    double score;
    bool scored;
    bool implied;
    bool near_constant;
  };
  std::vector<Entry> entries;
  entries.reserve(matrix.properties.size());
  for (std::size_t pi = 0; pi < matrix.properties.size(); ++pi) {
    Entry e{pi, 0.0, false, matrix.property_constant[pi] != 0,
            stats[pi].near_constant};
    if (stats[pi].constant) e.implied = true;
    for (std::size_t fi = 0; fi < matrix.filters.size(); ++fi) {
      if (!matrix.defined[fi][pi]) continue;
      e.score = std::max(e.score, std::fabs(matrix.r[fi][pi]));
      e.scored = true;
    }
    entries.push_back(e);
  }

  const bool no_filters = matrix.filters.empty();
  std::stable_sort(entries.begin(), entries.end(),
                   [&](const Entry& a, const Entry& b) {
                     if (a.implied != b.implied) return !a.implied;
                     if (a.implied) return false;  // keep catalog order below
                     if (no_filters) {
                       if (a.near_constant != b.near_constant) {
                         return a.near_constant;
                       }
                       return false;
                     }
                     if (a.score != b.score) return a.score > b.score;
                     return false;
                   });

  std::vector<RankedProperty> ranked;
  ranked.reserve(entries.size());
  for (const Entry& e : entries) {
    ranked.push_back({matrix.properties[e.index], e.score, e.implied});
  }
  return ranked;
}

std::string matrix_table(const CorrelationMatrix& matrix) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "filter";
  for (const std::string& p : matrix.properties) out << "\t" << p;
  out << "\n";
  for (std::size_t fi = 0; fi < matrix.filters.size(); ++fi) {
    const CorrelationMatrix::FilterKey& key = matrix.filters[fi];
    out << "s" << key.seed << "/L" << key.layer << "/f" << key.filter;
    for (std::size_t pi = 0; pi < matrix.properties.size(); ++pi) {
      out << "\t";
      if (matrix.defined[fi][pi]) {
        out << matrix.r[fi][pi];
      } else {
        out << "undef";
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace streamforge::correlate

#include <cmath>
#include <sstream>
#include <string>

#include "streamforge/encode/encode.hpp"
#include "streamforge/synth/synth.hpp"

namespace streamforge::synth {

namespace {

/// Near-constant observed values are usable only when integral: the
/// constraint language is integer-valued.
bool integral(double v, long long& out) {
  const double rounded = std::round(v);
  if (std::fabs(v - rounded) > 1e-9) return false;
  out = static_cast<long long>(rounded);
  return true;
}

std::string number_token(long long v) {
  if (v < 0) return "m" + std::to_string(-v);
  return std::to_string(v);
}

struct TemplateSink {
  std::vector<CandidateStreamliner> candidates;
  std::vector<std::string>* skipped;
  const minicp::Instance& instance;
  const std::string& instance_id;

  void skip(const std::string& property, const std::string& why) {
    if (skipped) skipped->push_back(property + ": " + why);
  }

  void emit(const std::string& property, const std::string& descriptor,
            const std::string& text, SyntacticForm form) {
    try {
      minicp::parse_constraint(text, instance);
    } catch (const std::exception& e) {
      skip(property, std::string("generated text does not parse: ") + e.what());
      return;
    }
    CandidateStreamliner c;
    c.text = text;
    c.descriptor = descriptor;
    c.method = Method::Template;
    c.aggressiveness = Aggressiveness::TightFit;
    c.form = form;
    c.property_id = property;
    c.instance_id = instance_id;
    candidates.push_back(std::move(c));
  }
};

/// True when a monotone-fraction property sits at (essentially) one.
bool at_one(const props::PropertyStats& st) { return st.median >= 0.95; }

void permutation_templates(const std::vector<std::string>& catalog,
                           const std::vector<props::PropertyStats>& stats,
                           TemplateSink& sink) {
  const minicp::VarInfo& var = encode::permutation_var(sink.instance);
  const std::string& x = var.name;
  const long long n = var.extents().at(0);
  const long long lo = var.dom_lo;
  const long long hi = var.dom_hi;

  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const std::string& id = catalog[i];
    const props::PropertyStats& st = stats[i];
    if (!st.near_constant && !st.constant) continue;

    if (id == "monotone_fraction") {
      if (at_one(st)) {
        std::ostringstream text;
        text << "forall(p in 1.." << (n - 1) << ")(" << x << "[p+1] >= " << x
             << "[p])";
        sink.emit(id, "ascending_order", text.str(), SyntacticForm::Universal);
      } else {
        sink.skip(id, "monotone fraction is not at one");
      }
      continue;
    }

    long long k = 0;
    if (!integral(st.median, k)) {
      sink.skip(id, "observed value is not integral");
      continue;
    }
    std::ostringstream text;
    if (id == "ascending_pairs") {
      text << "sum(p in 1.." << (n - 1) << ")(bool2int(" << x << "[p+1] > " << x
           << "[p])) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "descending_pairs") {
      text << "sum(p in 1.." << (n - 1) << ")(bool2int(" << x << "[p+1] < " << x
           << "[p])) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "fixed_point_count") {
      text << "sum(p in 1.." << n << ")(bool2int(" << x << "[p] = p)) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "inversion_count") {
      text << "sum(i in 1.." << n << ", j in 1.." << n << " where i < j)"
           << "(bool2int(" << x << "[i] > " << x << "[j])) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Pairwise);
    } else if (id == "first_value") {
      text << x << "[1] = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Existential);
    } else if (id == "last_value") {
      text << x << "[" << n << "] = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Existential);
    } else if (id == "middle_value") {
      text << x << "[" << (n + 1) / 2 << "] = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Existential);
    } else if (id == "prefix_half_sum") {
      text << "sum(p in 1.." << n / 2 << ")(" << x << "[p]) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "peak_count") {
      text << "sum(p in 2.." << (n - 1) << ")(bool2int(" << x << "[p] > " << x
           << "[p-1] /\\ " << x << "[p] > " << x << "[p+1])) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "valley_count") {
      text << "sum(p in 2.." << (n - 1) << ")(bool2int(" << x << "[p] < " << x
           << "[p-1] /\\ " << x << "[p] < " << x << "[p+1])) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "position_of_min") {
      text << x << "[" << k << "] = " << lo;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Existential);
    } else if (id == "position_of_max") {
      text << x << "[" << k << "] = " << hi;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Existential);
    } else {
      sink.skip(id, "no template rule for this property");
    }
  }
}

void grid_templates(const std::vector<std::string>& catalog,
                    const std::vector<props::PropertyStats>& stats,
                    TemplateSink& sink) {
  const minicp::VarInfo& var = encode::grid_var(sink.instance);
  const std::string& a = var.name;
  const long long h = var.extents().at(0);
  const long long w = var.extents().at(1);

  // Row/column sums become a universal constraint only when both the spread
  // is pinned at zero and the common value is integral.
  auto stat_of = [&](const std::string& id) -> const props::PropertyStats* {
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      if (catalog[i] == id) return &stats[i];
    }
    return nullptr;
  };

  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const std::string& id = catalog[i];
    const props::PropertyStats& st = stats[i];
    if (!st.near_constant && !st.constant) continue;

    if (id == "row_monotone_fraction" || id == "col_monotone_fraction") {
      if (!at_one(st)) {
        sink.skip(id, "monotone fraction is not at one");
        continue;
      }
      std::ostringstream text;
      if (id == "row_monotone_fraction") {
        text << "forall(r in 1.." << h << ", c in 1.." << (w - 1) << ")(" << a
             << "[r, c+1] >= " << a << "[r, c])";
      } else {
        text << "forall(r in 1.." << (h - 1) << ", c in 1.." << w << ")(" << a
             << "[r+1, c] >= " << a << "[r, c])";
      }
      sink.emit(id, id == "row_monotone_fraction" ? "rows_ascending"
                                                  : "columns_ascending",
                text.str(), SyntacticForm::Universal);
      continue;
    }

    if (id == "row_sums_std" || id == "col_sums_std") {
      if (std::fabs(st.median) > 0.05) {
        sink.skip(id, "sum spread is not pinned at zero");
        continue;
      }
      const bool rows = id == "row_sums_std";
      const props::PropertyStats* mean_st =
          stat_of(rows ? "row_sums_mean" : "col_sums_mean");
      long long k = 0;
      if (!mean_st || !integral(mean_st->median, k)) {
        sink.skip(id, "common sum value is not integral");
        continue;
      }
      std::ostringstream text;
      if (rows) {
        text << "forall(r in 1.." << h << ")(sum(c in 1.." << w << ")(" << a
             << "[r, c]) = " << k << ")";
      } else {
        text << "forall(c in 1.." << w << ")(sum(r in 1.." << h << ")(" << a
             << "[r, c]) = " << k << ")";
      }
      sink.emit(id, rows ? "row_sums_eq_" + number_token(k)
                         : "col_sums_eq_" + number_token(k),
                text.str(), SyntacticForm::Universal);
      continue;
    }

    long long k = 0;
    if (!integral(st.median, k)) {
      sink.skip(id, "observed value is not integral");
      continue;
    }
    std::ostringstream text;
    if (id == "total_sum") {
      text << "sum(r in 1.." << h << ", c in 1.." << w << ")(" << a
           << "[r, c]) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "main_diag_sum") {
      if (h != w) {
        sink.skip(id, "grid is not square");
        continue;
      }
      text << "sum(i in 1.." << h << ")(" << a << "[i, i]) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "anti_diag_sum") {
      if (h != w) {
        sink.skip(id, "grid is not square");
        continue;
      }
      text << "sum(i in 1.." << h << ")(" << a << "[i, " << (h + 1)
           << " - i]) = " << k;
      sink.emit(id, id + "_eq_" + number_token(k), text.str(),
                SyntacticForm::Aggregate);
    } else if (id == "value_min") {
      text << "forall(r in 1.." << h << ", c in 1.." << w << ")(" << a
           << "[r, c] >= " << k << ")";
      sink.emit(id, id + "_floor_" + number_token(k), text.str(),
                SyntacticForm::Universal);
    } else if (id == "value_max") {
      text << "forall(r in 1.." << h << ", c in 1.." << w << ")(" << a
           << "[r, c] <= " << k << ")";
      sink.emit(id, id + "_ceiling_" + number_token(k), text.str(),
                SyntacticForm::Universal);
    } else if (id == "argmax_row" || id == "argmax_col" || id == "argmin_row" ||
               id == "argmin_col") {
      sink.skip(id, "not expressible over the declared variables");
    } else {
      sink.skip(id, "no template rule for this property");
    }
  }
}

}  // namespace

std::vector<CandidateStreamliner> synthesize_templates(
    corpus::ShapeKind kind, const std::vector<std::string>& catalog,
    const std::vector<props::PropertyStats>& stats,
    const minicp::Instance& instance, const std::string& instance_id,
    std::vector<std::string>* skipped) {
  if (catalog.size() != stats.size()) {
    throw SynthError("property catalog and statistics are misaligned");
  }
  TemplateSink sink{{}, skipped, instance, instance_id};
  switch (kind) {
    case corpus::ShapeKind::Permutation:
      permutation_templates(catalog, stats, sink);
      break;
    case corpus::ShapeKind::Matrix:
    case corpus::ShapeKind::Assignment:
      grid_templates(catalog, stats, sink);
      break;
    case corpus::ShapeKind::PackingCoords:
      for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (stats[i].near_constant || stats[i].constant) {
          sink.skip(catalog[i], "no template rule for this property");
        }
      }
      break;
  }
  return sink.candidates;
}

}  // namespace streamforge::synth

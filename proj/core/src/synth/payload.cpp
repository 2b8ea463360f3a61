#include <iomanip>
#include <map>
#include <sstream>

#include "streamforge/synth/synth.hpp"
#include "streamforge/util/digest.hpp"

namespace streamforge::synth {

namespace {

std::string format_value(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

void append_model(std::ostringstream& out, const std::string& model_text) {
  out << "## Problem model\n```\n" << model_text;
  if (model_text.empty() || model_text.back() != '\n') out << "\n";
  out << "```\n\n";
}

void append_task(std::ostringstream& out, const GenerationParams& params,
                 bool discovery) {
  out << "## Task\n";
  if (discovery) {
    out << "Hypothesise what structural pattern distinguishes group A from "
           "group B. State the hypothesis in one line, then propose "
           "streamlining constraints that capture it.\n";
  } else {
    out << "Propose streamlining constraints: additional constraints that "
           "structured solutions of this model are likely to satisfy and "
           "that restrict the search space.\n";
  }
  out << "Respond with a JSON array; each element must have exactly this "
         "shape:\n"
      << "{\"constraint\": \"<boolean expression over the declared "
         "variables>\", \"descriptor\": \"<short snake_case label>\", "
         "\"aggressiveness\": \"conservative|tight_fit|aggressive\", "
         "\"form\": \"existential|universal|aggregate|pairwise\", "
         "\"property\": \"<originating property id, or empty>\"}\n"
      << "Propose about " << params.candidates_per_call
      << " candidates, sampling multiple (form, aggressiveness) "
         "combinations.\n";
}

}  // namespace

StatsPayload build_stats_payload(
    const correlate::CorrelationMatrix& matrix,
    const std::vector<correlate::RankedProperty>& ranking,
    const std::vector<props::PropertyStats>& stats,
    const std::vector<std::string>& sample_solutions,
    const std::optional<props::Progression>& progression,
    const std::string& model_text, const GenerationParams& params) {
  if (ranking.empty()) {
    throw SynthError("cannot build a statistics payload from an empty ranking");
  }
  if (stats.size() != matrix.properties.size()) {
    throw SynthError("property statistics do not align with the matrix");
  }
  std::map<std::string, std::size_t> column;
  for (std::size_t pi = 0; pi < matrix.properties.size(); ++pi) {
    column[matrix.properties[pi]] = pi;
  }

  std::ostringstream out;
  out << "# Constraint synthesis request: statistics path\n\n";
  append_model(out, model_text);

  out << "## Ranked structural properties\n";
  int rank = 0;
  for (const correlate::RankedProperty& rp : ranking) {
    const auto it = column.find(rp.id);
    if (it == column.end()) {
      throw SynthError("ranked property \"" + rp.id +
                       "\" is missing from the matrix");
    }
    const std::size_t pi = it->second;
    const props::PropertyStats& st = stats[pi];
    const char* klass = st.constant ? "constant"
                        : st.near_constant ? "near_constant"
                                           : "varying";
    out << ++rank << ". " << rp.id << "  score=" << format_value(rp.score)
        << " class=" << klass;
    if (rp.implied) out << " (implied)";
    out << "\n   stats: mean=" << format_value(st.mean)
        << " std=" << format_value(st.stddev) << " min=" << format_value(st.min)
        << " max=" << format_value(st.max)
        << " median=" << format_value(st.median) << "\n";
    const auto top = matrix.top_filters(pi, 3);
    out << "   filters:";
    if (top.empty()) {
      out << " (none)";
    } else {
      for (std::size_t i = 0; i < top.size(); ++i) {
        const auto& key = matrix.filters[static_cast<std::size_t>(top[i])];
        out << (i == 0 ? " " : "; ") << "s" << key.seed << "/L" << key.layer
            << "/f" << key.filter << " r="
            << format_value(matrix.r[static_cast<std::size_t>(top[i])][pi]);
      }
    }
    out << "\n";
  }
  out << "\n";

  out << "## Near-constant properties (observed values)\n";
  bool any_near = false;
  for (const correlate::RankedProperty& rp : ranking) {
    const props::PropertyStats& st = stats[column.at(rp.id)];
    if (st.near_constant && !st.constant) {
      out << rp.id << " = " << format_value(st.median) << "\n";
      any_near = true;
    }
  }
  if (!any_near) out << "(none)\n";
  out << "\n";

  out << "## Sample solutions\n";
  const std::size_t n_samples = std::min<std::size_t>(5, sample_solutions.size());
  for (std::size_t i = 0; i < n_samples; ++i) {
    out << "### sample " << (i + 1) << "\n" << sample_solutions[i];
    if (sample_solutions[i].empty() || sample_solutions[i].back() != '\n') {
      out << "\n";
    }
  }
  if (n_samples == 0) out << "(none)\n";
  out << "\n";

  if (progression) {
    out << "## Size progression\n";
    out << "size\tmean\tmin\tmax\n";
    for (const props::ProgressionRow& row : progression->rows) {
      out << row.size << "\t" << format_value(row.mean) << "\t"
          << format_value(row.min) << "\t" << format_value(row.max) << "\n";
    }
    if (progression->has_fit) {
      out << "fit: max ~= " << format_value(progression->slope) << "*size + "
          << format_value(progression->intercept) << "\n";
    }
    out << "\n";
  }

  append_task(out, params, /*discovery=*/false);

  StatsPayload payload;
  payload.text = out.str();
  payload.digest = util::hex_digest(payload.text);
  for (const correlate::RankedProperty& rp : ranking) {
    payload.properties.push_back(rp.id);
  }
  return payload;
}

DiscoveryPayload build_discovery_payload(
    const cnn::ContrastPair& pair,
    const std::vector<std::string>& solution_texts,
    const std::string& model_text, const GenerationParams& params) {
  DiscoveryPayload payload;
  if (pair.degenerate) {
    payload.suppressed = true;
    std::ostringstream reason;
    reason << "filter s" << pair.seed << "/L" << pair.layer << "/f"
           << pair.filter
           << " has zero activation variance across the corpus";
    payload.reason = reason.str();
    return payload;
  }
  if (pair.high_ids.empty() || pair.low_ids.empty()) {
    throw SynthError("contrast pair groups must not be empty");
  }
  auto solution = [&](int id) -> const std::string& {
    if (id < 0 || static_cast<std::size_t>(id) >= solution_texts.size()) {
      throw SynthError("contrast pair references solution " +
                       std::to_string(id) + " outside the corpus");
    }
    return solution_texts[static_cast<std::size_t>(id)];
  };

  std::ostringstream out;
  out << "# Constraint synthesis request: discovery path\n\n";
  append_model(out, model_text);

  out << "## Group A (solutions where one learned filter activates strongly)\n";
  for (std::size_t i = 0; i < pair.high_ids.size(); ++i) {
    out << "### A" << (i + 1) << "\n" << solution(pair.high_ids[i]);
    if (solution(pair.high_ids[i]).empty() ||
        solution(pair.high_ids[i]).back() != '\n') {
      out << "\n";
    }
  }
  out << "\n## Group B (solutions where the same filter activates weakly)\n";
  for (std::size_t i = 0; i < pair.low_ids.size(); ++i) {
    out << "### B" << (i + 1) << "\n" << solution(pair.low_ids[i]);
    if (solution(pair.low_ids[i]).empty() ||
        solution(pair.low_ids[i]).back() != '\n') {
      out << "\n";
    }
  }
  out << "\n";
  append_task(out, params, /*discovery=*/true);

  payload.text = out.str();
  payload.digest = util::hex_digest(payload.text);
  return payload;
}

}  // namespace streamforge::synth

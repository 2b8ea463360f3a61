#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "streamforge/minicp/errors.hpp"
#include "streamforge/synth/synth.hpp"

namespace streamforge::synth {

namespace {

/// Finds the first JSON array whose elements are all objects, tolerating
/// surrounding prose and code fences.
std::optional<nlohmann::json> extract_candidate_array(const std::string& text) {
  for (std::size_t start = text.find('['); start != std::string::npos;
       start = text.find('[', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char ch = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (ch == '\\') {
          escaped = true;
        } else if (ch == '"') {
          in_string = false;
        }
        continue;
      }
      if (ch == '"') {
        in_string = true;
      } else if (ch == '[' || ch == '{') {
        ++depth;
      } else if (ch == ']' || ch == '}') {
        --depth;
        if (depth == 0) {
          const std::string body = text.substr(start, i - start + 1);
          nlohmann::json parsed =
              nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
          if (!parsed.is_discarded() && parsed.is_array()) {
            const bool all_objects =
                std::all_of(parsed.begin(), parsed.end(),
                            [](const nlohmann::json& e) { return e.is_object(); });
            if (all_objects) return parsed;
          }
          break;  // unbalanced or not our array; try the next '['
        }
      }
    }
  }
  return std::nullopt;
}

std::string strip_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) out.push_back(ch);
  }
  return out;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::LlmStats: return "llm_stats";
    case Method::LlmDiscovery: return "llm_discovery";
    case Method::Template: return "template";
  }
  return "unknown";
}

const char* aggressiveness_name(Aggressiveness a) {
  switch (a) {
    case Aggressiveness::Conservative: return "conservative";
    case Aggressiveness::TightFit: return "tight_fit";
    case Aggressiveness::Aggressive: return "aggressive";
  }
  return "unknown";
}

const char* form_name(SyntacticForm f) {
  switch (f) {
    case SyntacticForm::Existential: return "existential";
    case SyntacticForm::Universal: return "universal";
    case SyntacticForm::Aggregate: return "aggregate";
    case SyntacticForm::Pairwise: return "pairwise";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "llm_stats") return Method::LlmStats;
  if (name == "llm_discovery") return Method::LlmDiscovery;
  if (name == "template") return Method::Template;
  return std::nullopt;
}

std::optional<Aggressiveness> aggressiveness_from_name(const std::string& name) {
  if (name == "conservative") return Aggressiveness::Conservative;
  if (name == "tight_fit") return Aggressiveness::TightFit;
  if (name == "aggressive") return Aggressiveness::Aggressive;
  return std::nullopt;
}

std::optional<SyntacticForm> form_from_name(const std::string& name) {
  if (name == "existential") return SyntacticForm::Existential;
  if (name == "universal") return SyntacticForm::Universal;
  if (name == "aggregate") return SyntacticForm::Aggregate;
  if (name == "pairwise") return SyntacticForm::Pairwise;
  return std::nullopt;
}

bool valid_descriptor(const std::string& descriptor) {
  if (descriptor.empty()) return false;
  return std::all_of(descriptor.begin(), descriptor.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_';
  });
}

ParsedCandidates parse_candidates(const std::string& response,
                                  const minicp::Instance& instance,
                                  Method method, const std::string& instance_id,
                                  unsigned seed) {
  ParsedCandidates out;
  const auto array = extract_candidate_array(response);
  if (!array) {
    out.diagnostics.push_back("no candidate array found in response");
    return out;
  }

  int index = 0;
  for (const nlohmann::json& entry : *array) {
    ++index;
    const std::string label = "entry " + std::to_string(index);
    if (!entry.contains("constraint") || !entry["constraint"].is_string()) {
      out.diagnostics.push_back(label + ": missing constraint text");
      continue;
    }
    CandidateStreamliner candidate;
    candidate.text = entry["constraint"].get<std::string>();
    candidate.method = method;
    candidate.instance_id = instance_id;
    candidate.seed = seed;

    if (!entry.contains("descriptor") || !entry["descriptor"].is_string() ||
        !valid_descriptor(entry["descriptor"].get<std::string>())) {
      out.diagnostics.push_back(label + ": missing or invalid descriptor");
      continue;
    }
    candidate.descriptor = entry["descriptor"].get<std::string>();

    const std::string aggr =
        entry.contains("aggressiveness") && entry["aggressiveness"].is_string()
            ? entry["aggressiveness"].get<std::string>()
            : "";
    const auto aggressiveness = aggressiveness_from_name(aggr);
    if (!aggressiveness) {
      out.diagnostics.push_back(label + ": unknown aggressiveness token \"" +
                                aggr + "\"");
      continue;
    }
    candidate.aggressiveness = *aggressiveness;

    const std::string form_token =
        entry.contains("form") && entry["form"].is_string()
            ? entry["form"].get<std::string>()
            : "";
    const auto form = form_from_name(form_token);
    if (!form) {
      out.diagnostics.push_back(label + ": unknown form token \"" + form_token +
                                "\"");
      continue;
    }
    candidate.form = *form;

    if (entry.contains("property") && entry["property"].is_string()) {
      candidate.property_id = entry["property"].get<std::string>();
    }

    try {
      minicp::parse_constraint(candidate.text, instance);
    } catch (const std::exception& e) {
      out.diagnostics.push_back(label + " (\"" + candidate.descriptor +
                                "\"): constraint does not parse: " + e.what());
      continue;
    }
    out.candidates.push_back(std::move(candidate));
  }
  if (out.candidates.empty()) {
    out.diagnostics.push_back("warning: no parseable candidates in response");
  }
  return out;
}

std::vector<CandidateStreamliner> dedup(
    const std::vector<CandidateStreamliner>& candidates) {
  std::vector<CandidateStreamliner> unique;
  std::set<std::string> seen;
  for (const CandidateStreamliner& c : candidates) {
    if (seen.insert(strip_whitespace(c.text)).second) {
      unique.push_back(c);
    }
  }
  return unique;
}

void save_candidates(const std::string& path,
                     const std::vector<CandidateStreamliner>& candidates) {
  std::ofstream out(path);
  if (!out) throw SynthError("cannot open candidate file for writing: " + path);
  for (const CandidateStreamliner& c : candidates) {
    nlohmann::ordered_json record{
        {"text", c.text},
        {"descriptor", c.descriptor},
        {"method", method_name(c.method)},
        {"aggressiveness", aggressiveness_name(c.aggressiveness)},
        {"form", form_name(c.form)},
        {"property", c.property_id},
        {"instance", c.instance_id},
        {"seed", c.seed},
    };
    out << record.dump() << "\n";
  }
  if (!out) throw SynthError("failed to write candidate file: " + path);
}

std::vector<CandidateStreamliner> load_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SynthError("cannot open candidate file: " + path);
  std::vector<CandidateStreamliner> candidates;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record =
        nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      throw SynthError("malformed candidate record at " + path + ":" +
                       std::to_string(line_no));
    }
    CandidateStreamliner c;
    c.text = record.at("text").get<std::string>();
    c.descriptor = record.at("descriptor").get<std::string>();
    const auto method = method_from_name(record.at("method").get<std::string>());
    const auto aggressiveness =
        aggressiveness_from_name(record.at("aggressiveness").get<std::string>());
    const auto form = form_from_name(record.at("form").get<std::string>());
    if (!method || !aggressiveness || !form) {
      throw SynthError("malformed candidate record at " + path + ":" +
                       std::to_string(line_no));
    }
    c.method = *method;
    c.aggressiveness = *aggressiveness;
    c.form = *form;
    c.property_id = record.value("property", std::string{});
    c.instance_id = record.value("instance", std::string{});
    c.seed = record.value("seed", 0u);
    candidates.push_back(std::move(c));
  }
  return candidates;
}

}  // namespace streamforge::synth

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "streamforge/synth/synth.hpp"
#include "streamforge/util/digest.hpp"

namespace streamforge::synth {

namespace {

namespace fs = std::filesystem;

std::mutex fixture_mutex;

void write_file(const fs::path& path, const std::string& content) {
  std::lock_guard<std::mutex> lock(fixture_mutex);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw SynthError("cannot write fixture file: " + path.string());
  }
  out << content;
}

/// The model block travels inside the payload between code fences.
std::string extract_model_block(const std::string& payload) {
  const std::string open = "## Problem model\n```\n";
  const std::size_t start = payload.find(open);
  if (start == std::string::npos) return {};
  const std::size_t body = start + open.size();
  const std::size_t stop = payload.find("\n```", body);
  if (stop == std::string::npos) return {};
  return payload.substr(body, stop - body);
}

std::string trim_copy(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

/// One index set of a declared array: the raw generator source ("1..n" or a
/// named set) plus its first and last index tokens when they are visible.
struct DimRef {
  std::string range;
  std::string first;
  std::string last;
};

struct DeclaredVar {
  std::string name;
  std::string lo;
  std::string hi;
  std::vector<DimRef> dims;
};

DimRef parse_dim(const std::string& text) {
  DimRef dim;
  dim.range = trim_copy(text);
  const std::size_t dots = dim.range.find("..");
  if (dots != std::string::npos) {
    dim.first = trim_copy(dim.range.substr(0, dots));
    dim.last = trim_copy(dim.range.substr(dots + 2));
  }
  return dim;
}

/// First integer array declaration in the model block; domain bounds and
/// index sets are kept as raw tokens (they may be parameter expressions).
std::optional<DeclaredVar> first_int_var(const std::string& model) {
  static const std::regex decl(
      R"(var\s+([A-Za-z_][A-Za-z0-9_]*)\s*\[([^\]]*)\]\s*in\s*([^;]+);)");
  for (auto it = std::sregex_iterator(model.begin(), model.end(), decl);
       it != std::sregex_iterator(); ++it) {
    const std::smatch& match = *it;
    const std::string domain = trim_copy(match[3].str());
    if (domain == "bool") continue;
    const std::size_t dots = domain.find("..");
    if (dots == std::string::npos) continue;
    DeclaredVar var;
    var.name = match[1].str();
    var.lo = trim_copy(domain.substr(0, dots));
    var.hi = trim_copy(domain.substr(dots + 2));
    std::string token;
    for (char ch : match[2].str() + ",") {
      if (ch == ',') {
        if (!trim_copy(token).empty()) var.dims.push_back(parse_dim(token));
        token.clear();
      } else {
        token.push_back(ch);
      }
    }
    if (!var.dims.empty()) return var;
  }
  return std::nullopt;
}

}  // namespace

// ---- HTTP ------------------------------------------------------------------

HttpLlmBackend::HttpLlmBackend(std::string host, std::string fixtures_dir,
                               std::string key_env)
    : host_(std::move(host)),
      fixtures_dir_(std::move(fixtures_dir)),
      key_env_(std::move(key_env)) {}

std::string HttpLlmBackend::complete(const std::string& payload,
                                     const GenerationParams& params) {
  const std::string digest = util::hex_digest(payload);
  fs::create_directories(fixtures_dir_);

  nlohmann::ordered_json request{
      {"model", params.model},
      {"max_tokens", params.max_tokens},
      {"temperature", params.temperature},
      {"messages",
       nlohmann::ordered_json::array(
           {{{"role", "user"}, {"content", payload}}})},
  };
  write_file(fs::path(fixtures_dir_) / (digest + ".request.json"),
             request.dump(2) + "\n");

  const char* key = std::getenv(key_env_.c_str());
  if (key == nullptr || *key == '\0') {
    throw SynthError("environment variable " + key_env_ +
                     " is not set; cannot reach the live backend");
  }

  httplib::Client client(host_);
  client.set_read_timeout(300, 0);
  client.set_connection_timeout(30, 0);
  const httplib::Headers headers{{"x-api-key", key}};
  auto res = client.Post("/v1/messages", headers, request.dump(),
                         "application/json");
  if (!res) {
    throw SynthError("no response from LLM endpoint " + host_);
  }
  if (res->status != 200) {
    throw SynthError("LLM endpoint returned status " +
                     std::to_string(res->status) + ": " + res->body);
  }

  std::string text = res->body;
  nlohmann::json parsed =
      nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded() && parsed.contains("content") &&
      parsed["content"].is_array()) {
    std::string joined;
    for (const nlohmann::json& part : parsed["content"]) {
      if (part.contains("text") && part["text"].is_string()) {
        joined += part["text"].get<std::string>();
      }
    }
    if (!joined.empty()) text = joined;
  }
  write_file(fs::path(fixtures_dir_) / (digest + ".response.txt"), text);
  return text;
}

// ---- replay ----------------------------------------------------------------

ReplayLlmBackend::ReplayLlmBackend(std::string fixtures_dir)
    : fixtures_dir_(std::move(fixtures_dir)) {}

std::string ReplayLlmBackend::complete(const std::string& payload,
                                       const GenerationParams&) {
  const std::string digest = util::hex_digest(payload);
  const fs::path path = fs::path(fixtures_dir_) / (digest + ".response.txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw SynthError("no recorded response for payload digest " + digest +
                     " under " + fixtures_dir_);
  }
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

// ---- stub ------------------------------------------------------------------

namespace {

/// Crude shape key: identifiers kept, every standalone number replaced by a
/// hole, whitespace dropped. Mirrors signature clustering closely enough for
/// an offline grouping answer.
std::string stub_shape_key(const std::string& text) {
  std::string key;
  std::size_t i = 0;
  const auto alpha = [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || ch == '_';
  };
  const auto digit = [](char ch) { return ch >= '0' && ch <= '9'; };
  while (i < text.size()) {
    const char ch = text[i];
    if (alpha(ch)) {
      while (i < text.size() && (alpha(text[i]) || digit(text[i]))) {
        key.push_back(text[i++]);
      }
    } else if (digit(ch)) {
      while (i < text.size() && digit(text[i])) ++i;
      key.push_back('_');
    } else {
      if (!std::isspace(static_cast<unsigned char>(ch))) key.push_back(ch);
      ++i;
    }
  }
  return key;
}

std::string stub_cluster_answer(const std::string& payload) {
  std::vector<std::string> groups_order;
  std::map<std::string, std::vector<int>> groups;
  std::istringstream in(payload);
  std::string line;
  bool in_candidates = false;
  while (std::getline(in, line)) {
    if (line.rfind("## Candidates", 0) == 0) {
      in_candidates = true;
      continue;
    }
    if (line.rfind("## ", 0) == 0) in_candidates = false;
    if (!in_candidates) continue;
    const std::size_t dot = line.find(". ");
    if (dot == std::string::npos) continue;
    int id = 0;
    try {
      id = std::stoi(line.substr(0, dot));
    } catch (const std::exception&) {
      continue;
    }
    const std::string key = stub_shape_key(line.substr(dot + 2));
    if (groups.find(key) == groups.end()) groups_order.push_back(key);
    groups[key].push_back(id);
  }
  nlohmann::ordered_json array = nlohmann::ordered_json::array();
  for (const std::string& key : groups_order) {
    array.push_back(groups[key]);
  }
  std::ostringstream out;
  out << "Grouped by constraint shape.\n\n```json\n" << array.dump(2)
      << "\n```\n";
  return out.str();
}

}  // namespace

std::string StubLlmBackend::complete(const std::string& payload,
                                     const GenerationParams&) {
  if (payload.rfind("# Semantic clustering request", 0) == 0) {
    return stub_cluster_answer(payload);
  }
  const bool discovery =
      payload.find("discovery path") != std::string::npos;
  const auto var = first_int_var(extract_model_block(payload));

  std::ostringstream out;
  if (discovery) {
    out << "Hypothesis: the two groups differ in where small values sit.\n\n";
  } else {
    out << "Here are candidate streamliners for this model.\n\n";
  }
  out << "```json\n";
  nlohmann::ordered_json array = nlohmann::ordered_json::array();
  if (var) {
    auto add = [&](const std::string& text, const std::string& descriptor,
                   const char* aggressiveness, const char* form) {
      array.push_back({{"constraint", text},
                       {"descriptor", descriptor},
                       {"aggressiveness", aggressiveness},
                       {"form", form},
                       {"property", ""}});
    };
    const std::string& v = var->name;
    if (var->dims.size() == 1) {
      const DimRef& d = var->dims[0];
      if (!d.first.empty()) {
        add(v + "[" + d.first + "] >= " + var->lo, "stub_first_floor",
            "conservative", "existential");
        add(v + "[" + d.first + "] = " + var->lo, "stub_first_pin", "tight_fit",
            "existential");
      }
      add("forall(i in " + d.range + ")(" + v + "[i] >= " + var->lo + ")",
          "stub_all_floor", "conservative", "universal");
      if (!d.last.empty()) {
        add(v + "[" + d.last + "] = " + var->hi, "stub_last_pin", "aggressive",
            "existential");
      }
    } else if (var->dims.size() == 2) {
      const DimRef& dr = var->dims[0];
      const DimRef& dc = var->dims[1];
      if (!dr.first.empty() && !dc.first.empty()) {
        add(v + "[" + dr.first + ", " + dc.first + "] >= " + var->lo,
            "stub_corner_floor", "conservative", "existential");
        add(v + "[" + dr.first + ", " + dc.first + "] = " + var->lo,
            "stub_corner_pin", "tight_fit", "existential");
      }
      add("forall(r in " + dr.range + ", c in " + dc.range + ")(" + v +
              "[r, c] >= " + var->lo + ")",
          "stub_all_floor", "conservative", "universal");
      if (!dr.last.empty() && !dc.last.empty()) {
        add(v + "[" + dr.last + ", " + dc.last + "] = " + var->hi,
            "stub_far_corner_pin", "aggressive", "existential");
      }
    }
  }
  out << array.dump(2) << "\n```\n";
  return out.str();
}

}  // namespace streamforge::synth

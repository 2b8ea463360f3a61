#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/cnn/cnn.hpp"
#include "streamforge/corpus/problem.hpp"
#include "streamforge/correlate/correlate.hpp"
#include "streamforge/minicp/model.hpp"
#include "streamforge/props/props.hpp"

namespace streamforge::synth {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { LlmStats, LlmDiscovery, Template };
enum class Aggressiveness { Conservative, TightFit, Aggressive };
enum class SyntacticForm { Existential, Universal, Aggregate, Pairwise };

const char* method_name(Method m);
const char* aggressiveness_name(Aggressiveness a);
const char* form_name(SyntacticForm f);
std::optional<Method> method_from_name(const std::string& name);
std::optional<Aggressiveness> aggressiveness_from_name(const std::string& name);
std::optional<SyntacticForm> form_from_name(const std::string& name);

/// One proposed streamlining constraint with full provenance.
struct CandidateStreamliner {
  std::string text;        ///< boolean constraint over the model's variables
  std::string descriptor;  ///< short snake_case label, [a-z0-9_]+
  Method method = Method::Template;
  Aggressiveness aggressiveness = Aggressiveness::TightFit;
  SyntacticForm form = SyntacticForm::Aggregate;
  std::string property_id;  ///< originating property, empty when none
  std::string instance_id;  ///< originating training instance
  unsigned seed = 0;

  bool operator==(const CandidateStreamliner&) const = default;
};

/// True when `descriptor` is a non-empty [a-z0-9_]+ label.
bool valid_descriptor(const std::string& descriptor);

// ---- payloads --------------------------------------------------------------

/// How many candidates one call asks for and how the responder should sample.
struct GenerationParams {
  int candidates_per_call = 8;
  double temperature = 0.7;
  int max_tokens = 4000;
  std::string model = "default";
};

struct StatsPayload {
  std::string text;    ///< complete serialized request body
  std::string digest;  ///< content digest, keys recorded fixtures
  std::vector<std::string> properties;  ///< ranked ids included, in order
};

struct DiscoveryPayload {
  std::string text;
  std::string digest;
  bool suppressed = false;    ///< degenerate pair; no request should be made
  std::string reason;         ///< why it was suppressed
};

/// Serializes the statistics path: ranked properties with their summary
/// statistics and top-3 filter correlations, the near-constant shortlist, up
/// to five raw sample solutions, the size progression when present, and the
/// model itself. Byte-deterministic for identical inputs.
StatsPayload build_stats_payload(
    const correlate::CorrelationMatrix& matrix,
    const std::vector<correlate::RankedProperty>& ranking,
    const std::vector<props::PropertyStats>& stats,
    const std::vector<std::string>& sample_solutions,
    const std::optional<props::Progression>& progression,
    const std::string& model_text, const GenerationParams& params);

/// Serializes one contrast pair as labelled raw data: the high-activation
/// group and the low-activation group, no interpretation attached.
/// Degenerate pairs produce a suppressed payload with a reason.
DiscoveryPayload build_discovery_payload(
    const cnn::ContrastPair& pair,
    const std::vector<std::string>& solution_texts,
    const std::string& model_text, const GenerationParams& params);

// ---- response parsing ------------------------------------------------------

struct ParsedCandidates {
  std::vector<CandidateStreamliner> candidates;
  std::vector<std::string> diagnostics;  ///< one line per dropped entry
};

/// Extracts the first JSON array of candidate objects from `response`
/// (tolerant of surrounding prose), validates each entry against the model,
/// and drops invalid entries with a diagnostic instead of aborting.
ParsedCandidates parse_candidates(const std::string& response,
                                  const minicp::Instance& instance,
                                  Method method, const std::string& instance_id,
                                  unsigned seed);

// ---- mechanical templates --------------------------------------------------

/// Deterministic candidates from near-constant, monotone, and
/// extremum-location properties whose values are expressible in the
/// constraint language. Inexpressible signals are skipped with a reason.
std::vector<CandidateStreamliner> synthesize_templates(
    corpus::ShapeKind kind, const std::vector<std::string>& catalog,
    const std::vector<props::PropertyStats>& stats,
    const minicp::Instance& instance, const std::string& instance_id,
    std::vector<std::string>* skipped = nullptr);

// ---- dedup and persistence -------------------------------------------------

/// First occurrence wins; equality is exact text up to whitespace.
std::vector<CandidateStreamliner> dedup(
    const std::vector<CandidateStreamliner>& candidates);

/// One JSON record per line.
void save_candidates(const std::string& path,
                     const std::vector<CandidateStreamliner>& candidates);
std::vector<CandidateStreamliner> load_candidates(const std::string& path);

// ---- LLM backends ----------------------------------------------------------

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string id() const = 0;
  /// Sends one payload and returns the raw response text.
  virtual std::string complete(const std::string& payload,
                               const GenerationParams& params) = 0;
};

/// Live HTTP client against a messages-style endpoint. Every exchange is
/// recorded under `fixtures_dir` as <digest>.request.json and
/// <digest>.response.txt so later runs can replay it.
class HttpLlmBackend : public LlmBackend {
 public:
  HttpLlmBackend(std::string host, std::string fixtures_dir,
                 std::string key_env = "STREAMFORGE_LLM_KEY");
  std::string id() const override { return "http"; }
  std::string complete(const std::string& payload,
                       const GenerationParams& params) override;

 private:
  std::string host_;
  std::string fixtures_dir_;
  std::string key_env_;
};

/// Byte-deterministic replay of recorded fixtures, keyed by payload digest.
class ReplayLlmBackend : public LlmBackend {
 public:
  explicit ReplayLlmBackend(std::string fixtures_dir);
  std::string id() const override { return "replay"; }
  std::string complete(const std::string& payload,
                       const GenerationParams& params) override;

 private:
  std::string fixtures_dir_;
};

/// Rule-based offline responder: proposes simple bound and pin constraints
/// read off the model's variable declarations. Deterministic; keeps the
/// whole pipeline network-free in tests.
class StubLlmBackend : public LlmBackend {
 public:
  std::string id() const override { return "stub"; }
  std::string complete(const std::string& payload,
                       const GenerationParams& params) override;
};

}  // namespace streamforge::synth

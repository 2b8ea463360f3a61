#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/props/props.hpp"
#include "streamforge/synth/synth.hpp"

namespace streamforge::pool {

class PoolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One contributing source of a pooled constraint.
struct Provenance {
  std::string instance_id;
  unsigned seed = 0;

  bool operator==(const Provenance&) const = default;
};

/// A deduplicated constraint with every (instance, seed) that proposed it.
struct PooledCandidate {
  synth::CandidateStreamliner candidate;  ///< first-seen variant
  std::vector<Provenance> provenance;
};

/// Union of per-instance candidate sets. Two candidates are the same entry
/// when their texts match up to whitespace; the first occurrence (instances
/// in key order) supplies the stored metadata, and every contributing
/// (instance, seed) pair is kept as provenance.
std::vector<PooledCandidate> pool_across_instances(
    const std::map<std::string, std::vector<synth::CandidateStreamliner>>&
        per_instance);

/// Constraint shape with every integer literal abstracted to a hole:
/// the token stream joined by single spaces, literals printed as `_`.
/// Whitespace-insensitive; throws PoolError when the text does not lex.
std::string signature_of(const std::string& text);

/// Candidates that differ only in numeric parameter values.
struct SemanticCluster {
  std::string signature;
  std::vector<PooledCandidate> members;
};

struct ClusterResult {
  std::vector<SemanticCluster> clusters;
  std::vector<std::string> diagnostics;
};

/// The grouping request sent to an LLM backend: a numbered candidate list
/// and instructions to answer with a JSON array of index groups.
std::string build_cluster_payload(const std::vector<PooledCandidate>& pool);

/// Groups parametrically-equivalent candidates. With a backend, the grouping
/// is asked for and then repaired: out-of-range indices are dropped, a
/// candidate assigned twice keeps its first assignment, candidates missing
/// from the answer become singletons, and groups mixing distinct shapes are
/// split by signature — each repair leaves a diagnostic. Without a backend
/// (or when the answer is unusable) candidates are grouped by signature
/// directly. Both paths are deterministic and partition-complete.
ClusterResult cluster(const std::vector<PooledCandidate>& pool,
                      synth::LlmBackend* backend = nullptr);

enum class Role { Tightest, Loosest, ParametricMedian, Extrapolated, Member };

const char* role_name(Role role);

/// One candidate chosen from a cluster for validation.
struct Representative {
  synth::CandidateStreamliner candidate;
  Role role = Role::Member;
  std::vector<Provenance> provenance;
};

/// Expands a cluster into at most four representatives. When exactly one
/// literal position varies across members and the comparison direction is
/// readable from the constraint, the tightest, loosest, and parametric-median
/// members are chosen, plus an extrapolated variant predicted from the size
/// progression's linear fit (rounded toward the tighter side). Directionless
/// shapes keep only the median; clusters without a single varying literal
/// pass through unchanged. Duplicate picks collapse, first role wins.
std::vector<Representative> expand_representatives(
    const SemanticCluster& cluster,
    const std::optional<props::Progression>& progression);

/// `expand_representatives` over every cluster, concatenated in cluster
/// order. This is the validation candidate set.
std::vector<Representative> expand_all(
    const std::vector<SemanticCluster>& clusters,
    const std::optional<props::Progression>& progression);

/// Plain-text cluster report: one block per cluster with its signature,
/// members, and chosen representatives.
std::string cluster_report(const std::vector<SemanticCluster>& clusters,
                           const std::optional<props::Progression>& progression);

}  // namespace streamforge::pool

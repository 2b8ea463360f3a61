#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "streamforge/corpus/problem.hpp"

namespace streamforge::corpus {

/// Append-only solution store: one JSON record per line, one file per
/// (problem, instance).  Solutions are checkpointed as they are found; a
/// final marker line records that enumeration finished, and only marked
/// files are reused on replay.
class CorpusStore {
 public:
  explicit CorpusStore(std::string root_dir);

  const std::string& root() const { return root_; }
  std::string file_path(const std::string& problem_id,
                        const std::string& instance_id) const;

  /// Appends one solution record.
  void append(const std::string& problem_id, const std::string& instance_id,
              const minicp::Solution& solution);

  /// Appends the completion marker.
  void mark_complete(const std::string& problem_id,
                     const std::string& instance_id, bool exhausted);

  /// True when a completed enumeration is stored for this key.
  bool has_complete(const std::string& problem_id,
                    const std::string& instance_id) const;

  /// True when the stored (complete) enumeration explored the whole space.
  bool stored_exhausted(const std::string& problem_id,
                        const std::string& instance_id) const;

  /// Loads every stored solution, in append order.
  std::vector<minicp::Solution> load(const std::string& problem_id,
                                     const std::string& instance_id) const;

 private:
  std::string root_;
};

/// Persistent write-once map (problem, instance) -> SolveOutcome holding the
/// unstreamlined reference solve for each instance.  Safe for concurrent
/// readers; writers are serialized.
class BaselineCache {
 public:
  explicit BaselineCache(std::string path);

  const std::string& path() const { return path_; }

  std::optional<SolveOutcome> find(const std::string& problem_id,
                                   const std::string& instance_id) const;

  /// Records a baseline.  A second write to the same key is a contract
  /// violation and throws.
  void put(const std::string& problem_id, const std::string& instance_id,
           const SolveOutcome& outcome);

  std::size_t size() const;

 private:
  std::string path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, SolveOutcome> entries_;
};

}  // namespace streamforge::corpus

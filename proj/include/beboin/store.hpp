#pragma once

// File-backed persistence for live trials.
//
// Layout under the store root, one directory per trial:
//   <id>/config.json     design config, written once at creation
//   <id>/events.ndjson   append-only log, one line per accepted mutation:
//                        {"version": v, "events": [...]}
//   <id>/snapshot.json   {"version": v, "state": <trial-state document>},
//                        rewritten every `snapshot_every` versions
//
// A trial is created at version 1 and every mutation adds exactly one log
// line. Loading starts from the snapshot (if any) and replays the log lines
// past it. A torn final line left by a crash mid-write is discarded.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "beboin/core.hpp"

namespace beboin {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoredTrial {
  std::string id;
  std::int64_t version = 0;
  TrialState state;
};

class TrialStore {
 public:
  explicit TrialStore(std::filesystem::path root, int snapshot_every = 16);

  const std::filesystem::path& root() const { return root_; }

  // Creates the trial directory; fails if the id is taken.
  StoredTrial create(const std::string& id, const DesignConfig& config);

  // Appends the events of one mutation. `state_after` must be the result of
  // applying them and `version` must be the previous version plus one.
  void append(const std::string& id, std::int64_t version, const std::vector<TrialEvent>& events,
              const TrialState& state_after);

  StoredTrial load(const std::string& id) const;

  // Every trial under the root, sorted by id.
  std::vector<StoredTrial> load_all() const;

 private:
  std::filesystem::path dir(const std::string& id) const;
  void write_snapshot(const std::string& id, std::int64_t version, const TrialState& state) const;

  std::filesystem::path root_;
  int snapshot_every_;
};

}  // namespace beboin

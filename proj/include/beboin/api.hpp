#pragma once

// Trial-conduct service. TrialService holds the request logic and is
// transport-agnostic; serve() binds it to an HTTP listener.
//
// Routes:
//   POST /trials                      {config}                     -> 201 {trial_id, version}
//   GET  /trials/{id}                                              -> 200 {trial_id, version, state}
//   POST /trials/{id}/patients        {dose?, origin?, enroll_time?, patient_id?, version?}
//   POST /trials/{id}/outcomes        {patient_id, tox_status?, response_status?, time, version?}
//   GET  /trials/{id}/decision?at=now|<months>
//   POST /trials/{id}/advance         {accept_decision, at?, version?} or {clock_months, version?}
//   GET  /trials/{id}/selection
//   GET  /decision-table?phi=&cohort=&nmax=&format=
//   POST /simulations                 {config?, scenario, mode, reps, seed} -> 202 {job_id}
//   GET  /simulations/{job_id}                                     -> 200 result or 202 pending
//
// Mutations accept an expected version in the body or in an If-Match header;
// a stale one is rejected with 409. Status codes: 400 malformed or invalid
// input, 404 unknown id, 409 version or phase conflict, 422 a request the
// design rules reject.

#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "beboin/document.hpp"
#include "beboin/store.hpp"

namespace beboin {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::optional<std::int64_t> if_match;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::optional<std::int64_t> version;  // sent as ETag when present

  Json json() const { return parse_json(body); }
};

class TrialService {
 public:
  // Loads every trial found under data_dir by replaying its event log.
  explicit TrialService(std::filesystem::path data_dir, int snapshot_every = 16);
  ~TrialService();

  TrialService(const TrialService&) = delete;
  TrialService& operator=(const TrialService&) = delete;

  ApiResponse handle(const ApiRequest& request);

  // Blocks until every submitted simulation job has finished.
  void wait_for_jobs();

 private:
  struct Snapshot {
    std::int64_t version = 0;
    TrialState state;
  };
  struct Entry {
    std::mutex write;  // serializes mutations of this trial
    std::shared_ptr<const Snapshot> snapshot;
    std::shared_ptr<const Snapshot> load() const { return std::atomic_load(&snapshot); }
  };
  struct Job {
    std::shared_future<Json> result;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::shared_ptr<const Snapshot> read(const std::string& id) const;

  ApiResponse create_trial(const Json& body);
  ApiResponse get_trial(const std::string& id);
  ApiResponse add_patient(const std::string& id, const Json& body, std::optional<std::int64_t> if_match);
  ApiResponse record_outcome(const std::string& id, const Json& body, std::optional<std::int64_t> if_match);
  ApiResponse get_decision(const std::string& id, const std::map<std::string, std::string>& query);
  ApiResponse advance_trial(const std::string& id, const Json& body, std::optional<std::int64_t> if_match);
  ApiResponse get_selection(const std::string& id);
  ApiResponse decision_table(const std::map<std::string, std::string>& query);
  ApiResponse submit_simulation(const Json& body);
  ApiResponse get_simulation(const std::string& job_id);

  // Runs `mutate` under the trial's write lock: checks the expected version,
  // applies the returned events, persists them and publishes the new state.
  template <class Fn>
  ApiResponse mutate(const std::string& id, const Json& body, std::optional<std::int64_t> if_match,
                     Fn&& fn);

  TrialStore store_;
  mutable std::shared_mutex trials_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> trials_;
  std::int64_t next_trial_ = 1;

  std::mutex jobs_mutex_;
  std::map<std::string, Job> jobs_;
  std::int64_t next_job_ = 1;
};

// HTTP transport for a TrialService. Every method is forwarded, so unsupported
// ones get the service's 405 rather than a bare 404.
class HttpServer {
 public:
  explicit HttpServer(TrialService& service);
  ~HttpServer();

  // Binds without accepting yet. Port 0 picks a free port. Returns the bound
  // port, or -1 on failure.
  int bind(const std::string& host, int port);

  // Accepts connections until stop() is called from another thread.
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves `service` over HTTP until the process is stopped.
int serve(TrialService& service, const std::string& host, int port);

}  // namespace beboin

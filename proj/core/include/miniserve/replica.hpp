// Copyright 2026 The miniserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MINISERVE_REPLICA_HPP_
#define MINISERVE_REPLICA_HPP_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "miniserve/batcher.hpp"
#include "miniserve/breaker.hpp"
#include "miniserve/clock.hpp"
#include "miniserve/event_log.hpp"
#include "miniserve/predictor.hpp"
#include "miniserve/request.hpp"
#include "miniserve/spec.hpp"
#include "miniserve/storage.hpp"

namespace miniserve {

enum class ReplicaState { kPending, kInitializing, kReady, kDraining, kStopped };
std::string_view StateName(ReplicaState state);

struct ReplicaConfig {
  int container_concurrency = 1;
  int queue_capacity = 10;
  BatcherConfig batching;
  StorageOptions storage;
  Duration fetch_extra{0};           // simulated transfer delay
  std::filesystem::path model_dir;   // fetch destination
  std::uint64_t seed = 0;
  const PredictorRegistry* predictors = nullptr;  // default registry if null
};

// Snapshot of a replica's admission state. in_flight/queued count breaker
// units; `requests` counts individual requests admitted but unfinished,
// including ones waiting in an open batch.
struct StatSample {
  std::string replica;
  RevisionId revision;
  Timestamp timestamp{0};
  int in_flight = 0;
  int queued = 0;
  int pending_batch = 0;
  int requests = 0;

  int load() const { return in_flight + queued + pending_batch; }
};

struct DrainResult {
  enum class Kind { kCompleted, kTimedOut };
  Kind kind = Kind::kCompleted;
  int remaining = 0;
  Timestamp finished_at{0};
};

struct ReplicaCounters {
  std::uint64_t offered = 0;    // requests handed to the breaker
  std::uint64_t completed = 0;  // answered by the predictor (ok or error)
  std::uint64_t rejected = 0;   // refused with kOverloaded
  std::uint64_t aborted = 0;    // failed with kReplicaStopped
};

struct BatchRecord {
  std::size_t size = 0;
  std::vector<Duration> waits;  // execution start - enqueue, per request
};

struct ReplicaHooks {
  std::function<void(ReplicaState)> on_state;
  std::function<void()> on_load;  // admitted-request count or capacity changed
  std::function<void(const BatchRecord&)> on_batch;
};

// One model-server instance: fetch -> load -> ready lifecycle, a breaker in
// front of the predictor, optional dynamic batching, and draining.
// All methods must be called on the owning clock's task thread.
class Replica : public std::enable_shared_from_this<Replica> {
 public:
  // Returns in Pending; initialization continues on the clock.
  static std::shared_ptr<Replica> Start(std::string id, Revision revision,
                                        ReplicaConfig config, Clock& clock,
                                        EventLog& log, ReplicaHooks hooks = {});
  ~Replica();

  void HandleRequest(RequestEnvelope request, ResponseCallback done);
  StatSample ReportStats(Timestamp now) const;
  // Stops admitting; reports once in-flight and queued work reaches zero or
  // at the deadline, whichever comes first. The replica then stops.
  void Drain(Duration deadline, std::function<void(DrainResult)> done = {});
  // Immediate stop; unfinished requests fail with kReplicaStopped.
  void Stop(const std::string& cause);

  const std::string& id() const { return id_; }
  const Revision& revision() const { return revision_; }
  ReplicaState state() const { return state_; }
  const std::string& failure() const { return failure_; }
  Timestamp started_at() const { return started_at_; }
  std::optional<Timestamp> ready_at() const { return ready_at_; }
  const Breaker& breaker() const { return breaker_; }
  const ReplicaCounters& counters() const { return counters_; }
  const std::optional<ArtifactManifest>& manifest() const { return manifest_; }
  int outstanding() const { return requests_; }
  bool HasCapacity() const {
    return state_ == ReplicaState::kReady && breaker_.HasCapacity();
  }

 private:
  struct Unit {
    std::uint64_t seq = 0;
    PendingBatch batch;
    std::vector<ResponseCallback> callbacks;
    PredictOutcome outcome;
    TimerId completion = 0;
  };

  Replica(std::string id, Revision revision, ReplicaConfig config, Clock& clock,
          EventLog& log, ReplicaHooks hooks);

  void Initialize();
  void FinishFetch();
  void FinishLoad();
  void Transition(ReplicaState next, const std::string& detail = {});
  void Admit(Unit unit);
  void StartUnit(Unit unit);
  void FinishUnit(std::uint64_t seq);
  void FlushBatch();
  void MaybeFinishDrain();
  void FailUnit(Unit& unit, ResponseStatus status, const std::string& message);
  void Log(const std::string& event, const std::string& detail = {},
           std::int64_t size = 0);
  void NotifyLoad();

  std::string id_;
  Revision revision_;
  ReplicaConfig config_;
  Clock& clock_;
  EventLog& log_;
  ReplicaHooks hooks_;
  Rng rng_;

  ReplicaState state_ = ReplicaState::kPending;
  std::string failure_;
  Timestamp started_at_{0};
  std::optional<Timestamp> ready_at_;
  std::optional<ArtifactManifest> manifest_;
  std::unique_ptr<Predictor> predictor_;
  std::vector<TimerId> startup_timers_;

  Breaker breaker_;
  Batcher batcher_;
  std::vector<ResponseCallback> batch_callbacks_;
  TimerId batch_timer_ = 0;
  std::deque<Unit> queue_;
  std::vector<Unit> executing_;
  std::uint64_t next_unit_seq_ = 1;
  int requests_ = 0;
  ReplicaCounters counters_;

  bool draining_ = false;
  TimerId drain_timer_ = 0;
  std::function<void(DrainResult)> drain_done_;
};

}  // namespace miniserve

#endif  // MINISERVE_REPLICA_HPP_

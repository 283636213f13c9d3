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

#include "miniserve/replica.hpp"

#include <algorithm>
#include <utility>

#include "miniserve/error.hpp"

namespace miniserve {

std::string_view StateName(ReplicaState state) {
  switch (state) {
    case ReplicaState::kPending: return "Pending";
    case ReplicaState::kInitializing: return "Initializing";
    case ReplicaState::kReady: return "Ready";
    case ReplicaState::kDraining: return "Draining";
    case ReplicaState::kStopped: return "Stopped";
  }
  return "Unknown";
}

Replica::Replica(std::string id, Revision revision, ReplicaConfig config, Clock& clock,
                 EventLog& log, ReplicaHooks hooks)
    : id_(std::move(id)),
      revision_(std::move(revision)),
      config_(std::move(config)),
      clock_(clock),
      log_(log),
      hooks_(std::move(hooks)),
      rng_(config_.seed),
      breaker_(config_.container_concurrency, config_.queue_capacity),
      batcher_(config_.batching) {}

Replica::~Replica() = default;

std::shared_ptr<Replica> Replica::Start(std::string id, Revision revision,
                                        ReplicaConfig config, Clock& clock,
                                        EventLog& log, ReplicaHooks hooks) {
  std::shared_ptr<Replica> r(new Replica(std::move(id), std::move(revision),
                                         std::move(config), clock, log,
                                         std::move(hooks)));
  r->started_at_ = clock.Now();
  r->Log(std::string(StateName(ReplicaState::kPending)));
  std::weak_ptr<Replica> weak = r;
  r->startup_timers_.push_back(clock.Post(
      [weak] {
        if (auto self = weak.lock()) self->Initialize();
      },
      EventPriority::kLifecycle));
  return r;
}

void Replica::Log(const std::string& event, const std::string& detail,
                  std::int64_t size) {
  EventRecord r;
  r.t = clock_.Now();
  r.replica = id_;
  r.revision = revision_.id.ToString();
  r.service = revision_.service;
  r.event = event;
  r.detail = detail;
  r.size = size;
  log_.Append(std::move(r));
}

void Replica::Transition(ReplicaState next, const std::string& detail) {
  state_ = next;
  Log(std::string(StateName(next)), detail);
  if (hooks_.on_state) hooks_.on_state(next);
}

void Replica::NotifyLoad() {
  if (hooks_.on_load) hooks_.on_load();
}

void Replica::Initialize() {
  if (state_ != ReplicaState::kPending) return;
  auto self = shared_from_this();
  Transition(ReplicaState::kInitializing);
  if (state_ != ReplicaState::kInitializing) return;
  try {
    manifest_ = Fetch(revision_.predictor.storage_uri, config_.model_dir, clock_,
                      config_.storage, config_.fetch_extra);
  } catch (const Error& e) {
    Stop(std::string("StartupFailed: ") + e.what());
    return;
  }
  std::weak_ptr<Replica> weak = self;
  startup_timers_.push_back(clock_.ScheduleAfter(
      manifest_->simulated_transfer,
      [weak] {
        if (auto s = weak.lock()) s->FinishFetch();
      },
      EventPriority::kLifecycle));
}

void Replica::FinishFetch() {
  if (state_ != ReplicaState::kInitializing) return;
  auto self = shared_from_this();
  if (!Verify(*manifest_)) {
    Stop("StartupFailed: ChecksumMismatch: artifacts changed after fetch");
    return;
  }
  const PredictorRegistry& registry =
      config_.predictors ? *config_.predictors : PredictorRegistry::Default();
  try {
    predictor_ = registry.Load(revision_.predictor.runtime_kind, config_.model_dir);
  } catch (const Error& e) {
    Stop(std::string("StartupFailed: ") + e.what());
    return;
  }
  std::weak_ptr<Replica> weak = self;
  startup_timers_.push_back(clock_.ScheduleAfter(
      predictor_->load_time(),
      [weak] {
        if (auto s = weak.lock()) s->FinishLoad();
      },
      EventPriority::kLifecycle));
}

void Replica::FinishLoad() {
  if (state_ != ReplicaState::kInitializing) return;
  auto self = shared_from_this();
  startup_timers_.clear();
  ready_at_ = clock_.Now();
  Transition(ReplicaState::kReady);
  NotifyLoad();
}

void Replica::HandleRequest(RequestEnvelope request, ResponseCallback done) {
  auto self = shared_from_this();
  if (state_ != ReplicaState::kReady) {
    InferenceResponse resp;
    resp.request_id = request.id;
    resp.status = ResponseStatus::kNotReady;
    resp.message = "replica " + id_ + " is " + std::string(StateName(state_));
    resp.replica = id_;
    done(std::move(resp));
    return;
  }
  ++counters_.offered;
  ++requests_;
  const Timestamp now = clock_.Now();
  BatchEntry entry{request.id, std::move(request.payload), now};

  if (config_.batching.enabled) {
    auto submitted = batcher_.Submit(std::move(entry), now);
    batch_callbacks_.push_back(std::move(done));
    if (submitted.action.execute_now()) {
      FlushBatch();
    } else if (submitted.opened) {
      std::weak_ptr<Replica> weak = self;
      const auto seq = submitted.ticket.batch_seq;
      batch_timer_ = clock_.ScheduleAt(
          submitted.action.until,
          [weak, seq] {
            auto s = weak.lock();
            if (!s || s->batcher_.batch_seq() != seq) return;
            s->batch_timer_ = 0;
            s->FlushBatch();
          },
          EventPriority::kCompletion);
    }
  } else {
    Unit unit;
    unit.batch.opened_at = now;
    unit.batch.entries.push_back(std::move(entry));
    unit.callbacks.push_back(std::move(done));
    Admit(std::move(unit));
  }
  NotifyLoad();
}

void Replica::FlushBatch() {
  if (!batcher_.has_pending()) return;
  if (batch_timer_ != 0) {
    clock_.Cancel(batch_timer_);
    batch_timer_ = 0;
  }
  Unit unit;
  unit.batch = batcher_.TakeBatch();
  unit.callbacks = std::move(batch_callbacks_);
  batch_callbacks_.clear();
  Admit(std::move(unit));
}

void Replica::Admit(Unit unit) {
  switch (breaker_.Admit()) {
    case Breaker::Admission::kExecute:
      StartUnit(std::move(unit));
      break;
    case Breaker::Admission::kQueued:
      queue_.push_back(std::move(unit));
      break;
    case Breaker::Admission::kRejected:
      counters_.rejected += unit.callbacks.size();
      FailUnit(unit, ResponseStatus::kOverloaded, "breaker queue full on " + id_);
      break;
  }
}

void Replica::FailUnit(Unit& unit, ResponseStatus status, const std::string& message) {
  requests_ -= static_cast<int>(unit.callbacks.size());
  for (std::size_t i = 0; i < unit.callbacks.size(); ++i) {
    InferenceResponse resp;
    resp.request_id = unit.batch.entries[i].request_id;
    resp.status = status;
    resp.message = message;
    resp.served_revision = revision_.id;
    resp.replica = id_;
    unit.callbacks[i](std::move(resp));
  }
}

void Replica::StartUnit(Unit unit) {
  unit.seq = next_unit_seq_++;
  const Timestamp now = clock_.Now();
  Instances flat;
  BatchRecord record;
  record.size = unit.batch.entries.size();
  for (const auto& e : unit.batch.entries) {
    flat.insert(flat.end(), e.instances.begin(), e.instances.end());
    record.waits.push_back(now - e.enqueued);
  }
  if (config_.batching.enabled && hooks_.on_batch) hooks_.on_batch(record);
  Log("ExecStart", {}, static_cast<std::int64_t>(record.size));

  unit.outcome = predictor_->Predict(flat, rng_);
  const Duration exec = predictor_->ExecutionTime(flat.size(), rng_);
  std::weak_ptr<Replica> weak = weak_from_this();
  const auto seq = unit.seq;
  unit.completion = clock_.ScheduleAfter(
      exec,
      [weak, seq] {
        if (auto s = weak.lock()) s->FinishUnit(seq);
      },
      EventPriority::kCompletion);
  executing_.push_back(std::move(unit));
}

void Replica::FinishUnit(std::uint64_t seq) {
  auto it = std::find_if(executing_.begin(), executing_.end(),
                         [seq](const Unit& u) { return u.seq == seq; });
  if (it == executing_.end()) return;
  auto self = shared_from_this();
  Unit unit = std::move(*it);
  executing_.erase(it);
  Log("ExecEnd", {}, static_cast<std::int64_t>(unit.batch.entries.size()));

  if (breaker_.Release()) {
    Unit next = std::move(queue_.front());
    queue_.pop_front();
    StartUnit(std::move(next));
  }

  const auto n = unit.callbacks.size();
  requests_ -= static_cast<int>(n);
  counters_.completed += n;
  const Timestamp now = clock_.Now();
  std::vector<SplitResponse> split;
  std::string error = unit.outcome.error;
  if (unit.outcome.ok) {
    try {
      split = SplitResponses(unit.outcome.outputs, unit.batch, now);
    } catch (const Error& e) {
      error = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    InferenceResponse resp;
    resp.request_id = unit.batch.entries[i].request_id;
    resp.served_revision = revision_.id;
    resp.replica = id_;
    if (!split.empty()) {
      resp.outputs = std::move(split[i].outputs);
    } else {
      resp.status = ResponseStatus::kPredictorError;
      resp.stage = "predictor";
      resp.message = error;
    }
    unit.callbacks[i](std::move(resp));
  }
  MaybeFinishDrain();
  NotifyLoad();
}

StatSample Replica::ReportStats(Timestamp now) const {
  StatSample s;
  s.replica = id_;
  s.revision = revision_.id;
  s.timestamp = now;
  s.in_flight = breaker_.in_flight();
  s.queued = breaker_.queued();
  s.pending_batch = static_cast<int>(batcher_.pending_size());
  s.requests = requests_;
  return s;
}

void Replica::Drain(Duration deadline, std::function<void(DrainResult)> done) {
  auto self = shared_from_this();
  if (state_ == ReplicaState::kStopped) {
    if (done) done({DrainResult::Kind::kCompleted, 0, clock_.Now()});
    return;
  }
  if (state_ == ReplicaState::kPending || state_ == ReplicaState::kInitializing) {
    Stop("stopped before ready");
    if (done) done({DrainResult::Kind::kCompleted, 0, clock_.Now()});
    return;
  }
  if (state_ == ReplicaState::kReady) {
    Transition(ReplicaState::kDraining);
    drain_done_ = std::move(done);
    FlushBatch();
    if (requests_ > 0) {
      std::weak_ptr<Replica> weak = self;
      drain_timer_ = clock_.ScheduleAfter(
          deadline,
          [weak] {
            auto s = weak.lock();
            if (!s || s->state_ != ReplicaState::kDraining) return;
            s->drain_timer_ = 0;
            const int remaining = s->requests_;
            auto cb = std::move(s->drain_done_);
            s->Stop("drain timed out");
            if (cb) cb({DrainResult::Kind::kTimedOut, remaining, s->clock_.Now()});
          },
          EventPriority::kLifecycle);
    }
    MaybeFinishDrain();
    NotifyLoad();
    return;
  }
  // Already draining: chain the extra observer onto the running drain.
  if (done) {
    auto prev = std::move(drain_done_);
    drain_done_ = [prev = std::move(prev), done = std::move(done)](DrainResult r) {
      if (prev) prev(r);
      done(r);
    };
  }
}

void Replica::MaybeFinishDrain() {
  if (state_ != ReplicaState::kDraining || requests_ > 0) return;
  if (drain_timer_ != 0) {
    clock_.Cancel(drain_timer_);
    drain_timer_ = 0;
  }
  auto cb = std::move(drain_done_);
  drain_done_ = nullptr;
  Stop("drained");
  if (cb) cb({DrainResult::Kind::kCompleted, 0, clock_.Now()});
}

void Replica::Stop(const std::string& cause) {
  if (state_ == ReplicaState::kStopped) return;
  auto self = shared_from_this();
  for (TimerId t : startup_timers_) clock_.Cancel(t);
  startup_timers_.clear();
  if (batch_timer_ != 0) clock_.Cancel(batch_timer_);
  batch_timer_ = 0;
  if (drain_timer_ != 0) clock_.Cancel(drain_timer_);
  drain_timer_ = 0;
  if (cause.rfind("StartupFailed", 0) == 0) failure_ = cause;

  // Anything still unfinished fails now.
  std::vector<Unit> doomed;
  if (batcher_.has_pending()) {
    Unit u;
    u.batch = batcher_.TakeBatch();
    u.callbacks = std::move(batch_callbacks_);
    batch_callbacks_.clear();
    doomed.push_back(std::move(u));
  }
  while (!queue_.empty()) {
    breaker_.DropQueued();
    doomed.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
  for (auto& u : executing_) {
    clock_.Cancel(u.completion);
    Log("ExecEnd", "aborted", static_cast<std::int64_t>(u.batch.entries.size()));
    breaker_.Release();
    doomed.push_back(std::move(u));
  }
  executing_.clear();

  Transition(ReplicaState::kStopped, cause);
  for (auto& u : doomed) {
    counters_.aborted += u.callbacks.size();
    FailUnit(u, ResponseStatus::kReplicaStopped, "replica " + id_ + " stopped: " + cause);
  }
  NotifyLoad();
}

}  // namespace miniserve

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

#ifndef MINISERVE_PLATFORM_HPP_
#define MINISERVE_PLATFORM_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miniserve/autoscaler.hpp"
#include "miniserve/clock.hpp"
#include "miniserve/event_log.hpp"
#include "miniserve/gateway.hpp"
#include "miniserve/pipeline.hpp"
#include "miniserve/reconciler.hpp"
#include "miniserve/replica.hpp"
#include "miniserve/request.hpp"
#include "miniserve/spec.hpp"
#include "miniserve/storage.hpp"
#include "miniserve/telemetry.hpp"

namespace miniserve {

enum class PayloadSinkKind { kNone, kMemory, kFile, kStalled };

struct PlatformOptions {
  StorageOptions storage;
  // Replica model directories are created below this path.
  std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "miniserve";
  std::uint64_t seed = 0;
  bool record_exec = true;
  PayloadSinkKind payload_sink = PayloadSinkKind::kMemory;
  std::filesystem::path payload_path;  // kFile
  std::size_t payload_capacity = 1024;
  Duration payload_drain_interval = std::chrono::milliseconds(10);
  int max_reconcile_rounds = 16;
  const PredictorRegistry* predictors = nullptr;
  const ComponentRegistry* components = nullptr;
};

struct ApplyResult {
  std::uint64_t generation = 0;
  bool changed = false;
  std::size_t actions = 0;  // actions executed while converging this apply
  std::vector<std::string> changes;
};

struct ControlEvent {
  Timestamp t{0};
  std::string service;
  std::string kind;  // SpecApplied, RolloutStarted, RolloutCompleted, ...
  std::string detail;
};

struct BatchStats {
  std::map<std::size_t, std::uint64_t> sizes;  // batch size -> batches
  Duration total_wait{0};
  std::uint64_t waits = 0;  // requests that went through a batch
};

struct ShadowStats {
  std::uint64_t ok = 0;
  std::uint64_t failed = 0;
};

// The whole serving platform in one object: control plane (apply, promote,
// delete, reconcile), data plane (route, shadow, activate, dispatch) and
// telemetry. Not thread-safe; every call must run on the clock's task thread.
class Platform {
 public:
  Platform(Clock& clock, PlatformOptions options = {});
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  // Throws Error{kInvalidArgument} listing violations, or
  // Error{kUnknownComponent}.
  ApplyResult Apply(const InferenceServiceSpec& spec);
  // Throws Error{kUnknownService | kNoCanary}.
  ApplyResult Promote(const std::string& service);
  // Throws Error{kUnknownService}.
  void Delete(const std::string& service);

  bool Has(const std::string& service) const;
  std::vector<std::string> Services() const;
  const InferenceServiceSpec& SpecOf(const std::string& service) const;
  std::uint64_t GenerationOf(const std::string& service) const;
  nlohmann::json Status(const std::string& service) const;
  ObservedService Observe(const std::string& service) const;
  int ReadyReplicas(const std::string& service) const;

  // Client entry point. `done` runs exactly once, possibly synchronously.
  void Submit(RequestEnvelope env, ResponseCallback done);
  std::uint64_t NextRequestId() { return next_request_id_++; }

  // Stops every replica and autoscaler; pending requests fail.
  void Shutdown();
  // Writes whatever the payload sink accepts right now.
  void FlushPayloads();

  Clock& clock() { return clock_; }
  EventLog& events() { return events_; }
  const EventLog& events() const { return events_; }
  MetricsRegistry& metrics() { return *metrics_; }
  PayloadLogger* payload_logger() { return payload_logger_.get(); }
  MemoryPayloadSink* memory_sink() { return memory_sink_; }
  const std::vector<ControlEvent>& control_events() const { return control_events_; }
  std::vector<DecisionRecord> Decisions(const std::string& service) const;
  BatchStats batch_stats(const std::string& service) const;
  ShadowStats shadow_stats(const std::string& service) const;
  std::uint64_t actions_applied() const { return actions_applied_; }

 private:
  struct RevisionRuntime;
  struct ServiceRuntime;

  ServiceRuntime* FindService(const std::string& name);
  const ServiceRuntime* FindService(const std::string& name) const;
  ServiceRuntime& ServiceOrThrow(const std::string& name);
  const ServiceRuntime& ServiceOrThrow(const std::string& name) const;
  RevisionRuntime* FindRevision(const std::string& service, RevisionId rev);

  void Configure(ServiceRuntime& svc);
  std::size_t RunReconcile(const std::string& service);
  void ScheduleReconcile(const std::string& service);
  void ApplyPlan(ServiceRuntime& svc, const ActionPlan& plan);
  void RegisterRevision(ServiceRuntime& svc, const Action& action);
  void RemoveRevision(ServiceRuntime& svc, RevisionId rev);
  void StartReplica(ServiceRuntime& svc, RevisionRuntime& rt);
  void PublishRoutes();

  void OnScaleCommand(const std::string& service, const ScaleCommand& cmd);
  void OnReplicaState(const std::string& service, RevisionId rev, const std::string& id,
                      ReplicaState state);
  void OnReplicaLoad(const std::string& service, RevisionId rev, const std::string& id);
  void OnActivatorChange(const std::string& service, RevisionId rev, int buffered);
  void ScheduleRelease(const std::string& service, RevisionId rev);
  void Release(const std::string& service, RevisionId rev);

  void Dispatch(const std::string& service, RevisionId rev, RequestEnvelope env,
                ResponseCallback done);
  void Reroute(const std::string& service, RequestEnvelope env, ResponseCallback done);
  void Mirror(ServiceRuntime& svc, RevisionId shadow, const RequestEnvelope& env);
  void SchedulePayloadDrain();
  void Event(const std::string& service, const std::string& kind, const std::string& detail);
  void UpdateReadyGauge(const std::string& service, const RevisionRuntime& rt);

  Clock& clock_;
  PlatformOptions options_;
  EventLog events_;
  std::unique_ptr<MetricsRegistry> metrics_;
  MemoryPayloadSink* memory_sink_ = nullptr;
  std::unique_ptr<PayloadLogger> payload_logger_;
  bool payload_drain_scheduled_ = false;
  Router router_;
  std::map<std::string, std::unique_ptr<ServiceRuntime>> services_;
  std::vector<std::shared_ptr<Replica>> retiring_;
  // Replica ordinals per service and revision prefix; never reset, so ids stay unique.
  std::map<std::string, int> replica_ordinals_;
  std::map<std::string, std::vector<DecisionRecord>> retired_decisions_;
  std::map<std::string, BatchStats> batch_stats_;
  std::map<std::string, ShadowStats> shadow_stats_;
  std::vector<ControlEvent> control_events_;
  std::uint64_t next_request_id_ = 1;
  std::uint64_t actions_applied_ = 0;
  bool shutting_down_ = false;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace miniserve

#endif  // MINISERVE_PLATFORM_HPP_

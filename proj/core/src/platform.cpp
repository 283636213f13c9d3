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

#include "miniserve/platform.hpp"

#include <algorithm>
#include <sstream>

#include "miniserve/error.hpp"

namespace miniserve {

struct Platform::RevisionRuntime {
  Revision revision;
  std::vector<std::shared_ptr<Replica>> replicas;  // live and draining
  std::unique_ptr<Autoscaler> autoscaler;
  std::unique_ptr<ActivatorQueue> activator;
  bool ever_ready = false;
  int consecutive_failures = 0;
  bool scaled_to_zero = false;
  std::size_t rr_cursor = 0;
  bool release_pending = false;

  int Count(std::initializer_list<ReplicaState> states) const {
    return static_cast<int>(std::count_if(replicas.begin(), replicas.end(), [&](const auto& r) {
      return std::find(states.begin(), states.end(), r->state()) != states.end();
    }));
  }
  Replica* Find(const std::string& id) const {
    for (const auto& r : replicas) {
      if (r->id() == id) return r.get();
    }
    return nullptr;
  }
};

struct Platform::ServiceRuntime {
  InferenceServiceSpec spec;
  std::uint64_t generation = 0;
  std::map<RevisionId, std::unique_ptr<RevisionRuntime>> revisions;
  std::optional<ServiceRoute> route;
  std::optional<RolloutState> rollout;
  std::optional<RevisionId> failed_target;
  std::optional<ComponentSpec> transformer;
  std::optional<ComponentSpec> explainer;
  Pipeline pipeline;
  bool reconcile_pending = false;

  // Derived from annotations on every apply.
  AutoscalerConfig autoscaling;
  int container_concurrency = 1;
  int queue_capacity = 10;
  BatcherConfig batching;
  ActivatorOptions activator;
  Duration drain_deadline = std::chrono::seconds(30);
  bool payload_log = false;
};

namespace {

std::uint64_t MixSeed(std::uint64_t seed, const std::string& id) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

InferenceResponse Failure(std::uint64_t id, ResponseStatus status, std::string message) {
  InferenceResponse r;
  r.request_id = id;
  r.status = status;
  r.message = std::move(message);
  return r;
}

nlohmann::json InstancesJson(const Instances& xs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& x : xs) j.push_back(x);
  return j;
}

}  // namespace

Platform::Platform(Clock& clock, PlatformOptions options)
    : clock_(clock),
      options_(std::move(options)),
      events_(options_.record_exec),
      metrics_(MetricsRegistry::WithPlatformMetrics()) {
  std::unique_ptr<PayloadSink> sink;
  switch (options_.payload_sink) {
    case PayloadSinkKind::kNone:
      break;
    case PayloadSinkKind::kMemory: {
      auto m = std::make_unique<MemoryPayloadSink>();
      memory_sink_ = m.get();
      sink = std::move(m);
      break;
    }
    case PayloadSinkKind::kFile:
      sink = std::make_unique<FilePayloadSink>(options_.payload_path);
      break;
    case PayloadSinkKind::kStalled:
      sink = std::make_unique<StalledPayloadSink>();
      break;
  }
  if (sink) {
    payload_logger_ = std::make_unique<PayloadLogger>(std::move(sink), options_.payload_capacity,
                                                      metrics_.get());
    if (!clock_.IsVirtual()) payload_logger_->StartBackgroundDrainer();
  }
}

Platform::~Platform() {
  Shutdown();
  *alive_ = false;
}

void Platform::Shutdown() {
  if (shutting_down_) return;
  shutting_down_ = true;
  for (auto& [name, svc] : services_) {
    for (auto& [id, rt] : svc->revisions) {
      rt->autoscaler->Stop();
      for (auto& e : rt->activator->TakeAll()) {
        e.done(Failure(e.env.id, ResponseStatus::kNotReady, "platform shutting down"));
      }
      for (auto& r : rt->replicas) r->Stop("shutdown");
    }
  }
  for (auto& r : retiring_) r->Stop("shutdown");
  if (payload_logger_) payload_logger_->StopBackgroundDrainer();
}

Platform::ServiceRuntime* Platform::FindService(const std::string& name) {
  auto it = services_.find(name);
  return it == services_.end() ? nullptr : it->second.get();
}

const Platform::ServiceRuntime* Platform::FindService(const std::string& name) const {
  auto it = services_.find(name);
  return it == services_.end() ? nullptr : it->second.get();
}

Platform::ServiceRuntime& Platform::ServiceOrThrow(const std::string& name) {
  auto* s = FindService(name);
  if (!s) throw Error(Errc::kUnknownService, name);
  return *s;
}

const Platform::ServiceRuntime& Platform::ServiceOrThrow(const std::string& name) const {
  const auto* s = FindService(name);
  if (!s) throw Error(Errc::kUnknownService, name);
  return *s;
}

Platform::RevisionRuntime* Platform::FindRevision(const std::string& service, RevisionId rev) {
  auto* s = FindService(service);
  if (!s) return nullptr;
  auto it = s->revisions.find(rev);
  return it == s->revisions.end() ? nullptr : it->second.get();
}

void Platform::Event(const std::string& service, const std::string& kind,
                     const std::string& detail) {
  control_events_.push_back({clock_.Now(), service, kind, detail});
}

bool Platform::Has(const std::string& service) const { return FindService(service) != nullptr; }

std::vector<std::string> Platform::Services() const {
  std::vector<std::string> out;
  for (const auto& [name, svc] : services_) out.push_back(name);
  return out;
}

const InferenceServiceSpec& Platform::SpecOf(const std::string& service) const {
  return ServiceOrThrow(service).spec;
}

std::uint64_t Platform::GenerationOf(const std::string& service) const {
  return ServiceOrThrow(service).generation;
}

void Platform::Configure(ServiceRuntime& svc) {
  const auto& a = svc.spec.annotations;
  svc.autoscaling = AutoscalerConfig::FromAnnotations(a);
  int cc = static_cast<int>(AnnotationDouble(a, "autoscaling.containerConcurrency", 1));
  const auto& res = svc.spec.default_predictor.resources;
  if (res && res->container_concurrency) cc = *res->container_concurrency;
  svc.container_concurrency = cc;
  svc.queue_capacity = static_cast<int>(AnnotationDouble(a, "queue.capacity", 10));
  svc.batching = {};
  if (a.count("batching.maxSize")) {
    svc.batching.enabled = true;
    svc.batching.max_batch_size =
        static_cast<std::size_t>(AnnotationDouble(a, "batching.maxSize", 1));
    svc.batching.max_latency = FromMillis(AnnotationDouble(a, "batching.maxLatencyMs", 0));
  }
  svc.activator.capacity = static_cast<std::size_t>(AnnotationDouble(a, "activator.capacity", 1000));
  svc.activator.timeout = FromSeconds(AnnotationDouble(a, "activator.timeoutSeconds", 30));
  svc.drain_deadline = FromSeconds(AnnotationDouble(a, "drain.deadlineSeconds", 30));
  svc.payload_log = AnnotationBool(a, "payloadLog.enabled", false);
}

ApplyResult Platform::Apply(const InferenceServiceSpec& spec) {
  const ValidationReport report = Validate(spec);
  if (!report.ok()) {
    std::string msg;
    for (const auto& v : report.violations) msg += (msg.empty() ? "" : "; ") + v;
    throw Error(Errc::kInvalidArgument, msg);
  }
  const std::string bad = AutoscalerConfig::FromAnnotations(spec.annotations).Check();
  if (!bad.empty()) throw Error(Errc::kInvalidArgument, bad);
  const ComponentRegistry& components =
      options_.components ? *options_.components : ComponentRegistry::Default();
  // Surfaces UnknownComponent before anything changes.
  Pipeline pipeline = BuildPipeline(spec, RevisionHash(spec.default_predictor), components);

  ApplyResult result;
  ServiceRuntime* svc = FindService(spec.name);
  if (svc) {
    if (svc->spec == spec) {
      result.generation = svc->generation;
      return result;
    }
    result.changes = Diff(svc->spec, spec).Describe();
  } else {
    auto fresh = std::make_unique<ServiceRuntime>();
    svc = fresh.get();
    services_[spec.name] = std::move(fresh);
    result.changes = {"created"};
  }
  svc->spec = spec;
  svc->generation += 1;
  svc->pipeline = std::move(pipeline);
  if (svc->failed_target && *svc->failed_target != RevisionHash(spec.default_predictor)) {
    svc->failed_target.reset();
  }
  Configure(*svc);
  Event(spec.name, "SpecApplied", "generation " + std::to_string(svc->generation));
  result.generation = svc->generation;
  result.changed = true;
  result.actions = RunReconcile(spec.name);
  return result;
}

ApplyResult Platform::Promote(const std::string& service) {
  const ServiceRuntime& svc = ServiceOrThrow(service);
  return Apply(PromoteCanary(svc.spec));
}

void Platform::Delete(const std::string& service) {
  ServiceRuntime& svc = ServiceOrThrow(service);
  const ActionPlan plan = ReconcileDelete(Observe(service));
  actions_applied_ += plan.actions.size();
  ApplyPlan(svc, plan);
  Event(service, "ServiceDeleted", "");
  services_.erase(service);
}

ObservedService Platform::Observe(const std::string& service) const {
  const ServiceRuntime& svc = ServiceOrThrow(service);
  ObservedService o;
  o.name = service;
  for (const auto& [id, rt] : svc.revisions) {
    ObservedRevision rev;
    rev.revision = rt->revision;
    rev.ever_ready = rt->ever_ready;
    rev.consecutive_failures = rt->consecutive_failures;
    rev.scaled_to_zero = rt->scaled_to_zero;
    for (const auto& r : rt->replicas) {
      rev.replicas.push_back({r->id(), r->state(), r->outstanding()});
    }
    o.revisions.emplace(id, std::move(rev));
  }
  o.route = svc.route;
  o.rollout = svc.rollout;
  o.failed_target = svc.failed_target;
  o.transformer = svc.transformer;
  o.explainer = svc.explainer;
  return o;
}

int Platform::ReadyReplicas(const std::string& service) const {
  int n = 0;
  for (const auto& [id, rt] : ServiceOrThrow(service).revisions) {
    n += rt->Count({ReplicaState::kReady});
  }
  return n;
}

std::size_t Platform::RunReconcile(const std::string& service) {
  std::size_t total = 0;
  for (int round = 0; round < options_.max_reconcile_rounds; ++round) {
    ServiceRuntime* svc = FindService(service);
    if (!svc || shutting_down_) break;
    const ActionPlan plan = Reconcile(svc->spec, Observe(service));
    if (plan.empty()) break;
    total += plan.actions.size();
    actions_applied_ += plan.actions.size();
    ApplyPlan(*svc, plan);
  }
  return total;
}

void Platform::ScheduleReconcile(const std::string& service) {
  ServiceRuntime* svc = FindService(service);
  if (!svc || svc->reconcile_pending || shutting_down_) return;
  svc->reconcile_pending = true;
  std::weak_ptr<bool> alive = alive_;
  clock_.Post(
      [this, alive, service] {
        if (alive.expired()) return;
        if (ServiceRuntime* s = FindService(service)) s->reconcile_pending = false;
        RunReconcile(service);
      },
      EventPriority::kControl);
}

void Platform::ApplyPlan(ServiceRuntime& svc, const ActionPlan& plan) {
  const std::string service = svc.spec.name;
  bool routes_changed = false;
  for (const Action& a : plan.actions) {
    switch (a.kind) {
      case Action::Kind::kRegisterRevision:
        RegisterRevision(svc, a);
        break;
      case Action::Kind::kCreateReplica:
        if (auto it = svc.revisions.find(a.revision); it != svc.revisions.end()) {
          StartReplica(svc, *it->second);
        }
        break;
      case Action::Kind::kDrainReplica:
      case Action::Kind::kStopReplica: {
        auto it = svc.revisions.find(a.revision);
        if (it == svc.revisions.end()) break;
        // Hold a reference: stopping may run hooks that touch the list.
        std::shared_ptr<Replica> r;
        for (const auto& p : it->second->replicas) {
          if (p->id() == a.replica) r = p;
        }
        if (!r) break;
        if (a.kind == Action::Kind::kDrainReplica) {
          r->Drain(svc.drain_deadline);
        } else {
          r->Stop("scaled down");
        }
        break;
      }
      case Action::Kind::kSwapRoutingTable:
        svc.route = a.route;
        routes_changed = true;
        break;
      case Action::Kind::kRemoveRevision:
        if (routes_changed) {
          PublishRoutes();
          routes_changed = false;
        }
        RemoveRevision(svc, a.revision);
        break;
      case Action::Kind::kConfigurePipeline:
        svc.transformer = a.transformer;
        svc.explainer = a.explainer;
        break;
      case Action::Kind::kStartRollout:
        svc.rollout = a.rollout;
        Event(service, "RolloutStarted",
              a.revision.ToString() + " capacity " + std::to_string(a.rollout->capacity));
        break;
      case Action::Kind::kFinishRollout:
        svc.rollout.reset();
        Event(service, "RolloutCompleted", a.revision.ToString());
        break;
      case Action::Kind::kAbortRollout:
        svc.rollout.reset();
        svc.failed_target = a.revision;
        Event(service, "RollbackRequired", a.revision.ToString());
        break;
    }
  }
  if (routes_changed) PublishRoutes();
}

void Platform::PublishRoutes() {
  RoutingTable table;
  for (const auto& [name, svc] : services_) {
    if (svc->route) table[name] = *svc->route;
  }
  router_.Swap(std::move(table));
}

void Platform::RegisterRevision(ServiceRuntime& svc, const Action& a) {
  if (svc.revisions.count(a.revision)) return;
  const std::string service = svc.spec.name;
  auto rt = std::make_unique<RevisionRuntime>();
  rt->revision = Revision{a.revision, service, a.role, *a.predictor};
  RevisionRuntime* raw = rt.get();
  auto counts = [raw] {
    return Autoscaler::Counts{
        raw->Count({ReplicaState::kReady}),
        raw->Count({ReplicaState::kPending, ReplicaState::kInitializing})};
  };
  auto sink = [this, service](const ScaleCommand& cmd) { OnScaleCommand(service, cmd); };
  rt->autoscaler =
      std::make_unique<Autoscaler>(a.revision, svc.autoscaling, clock_, counts, sink);
  const RevisionId rev = a.revision;
  rt->activator = std::make_unique<ActivatorQueue>(
      a.revision, svc.activator, clock_,
      [this, service, rev](int n) { OnActivatorChange(service, rev, n); });
  svc.revisions.emplace(a.revision, std::move(rt));
  raw->autoscaler->Start();
  Event(service, "RevisionRegistered",
        a.revision.ToString() + " " + std::string(RoleName(a.role)));
}

void Platform::RemoveRevision(ServiceRuntime& svc, RevisionId rev) {
  auto it = svc.revisions.find(rev);
  if (it == svc.revisions.end()) return;
  const std::string service = svc.spec.name;
  std::unique_ptr<RevisionRuntime> rt = std::move(it->second);
  svc.revisions.erase(it);
  rt->autoscaler->Stop();
  auto& kept = retired_decisions_[service];
  kept.insert(kept.end(), rt->autoscaler->decisions().begin(), rt->autoscaler->decisions().end());
  for (auto& r : rt->replicas) {
    if (r->state() != ReplicaState::kStopped) retiring_.push_back(r);
  }
  const Labels labels{{"service", service}, {"revision", rev.ToString()}};
  metrics_->Set("ready_replicas", 0, labels);
  metrics_->Set("buffered", 0, labels);
  auto held = rt->activator->TakeAll();
  Event(service, "RevisionRemoved", rev.ToString());
  rt.reset();
  for (auto& e : held) {
    if (e.env.shadow) {
      e.done(Failure(e.env.id, ResponseStatus::kNotReady, "shadow revision removed"));
      continue;
    }
    Reroute(service, std::move(e.env), std::move(e.done));
  }
}

void Platform::StartReplica(ServiceRuntime& svc, RevisionRuntime& rt) {
  const std::string service = svc.spec.name;
  const RevisionId rev = rt.revision.id;
  const std::string prefix = service + "-" + rev.ToString().substr(0, 8);
  const std::string id = prefix + "-" + std::to_string(++replica_ordinals_[prefix]);
  rt.scaled_to_zero = false;
  ReplicaConfig cfg;
  cfg.container_concurrency = svc.container_concurrency;
  if (rt.revision.predictor.resources && rt.revision.predictor.resources->container_concurrency) {
    cfg.container_concurrency = *rt.revision.predictor.resources->container_concurrency;
  }
  cfg.queue_capacity = svc.queue_capacity;
  cfg.batching = svc.batching;
  cfg.storage = options_.storage;
  if (rt.revision.predictor.resources && rt.revision.predictor.resources->fetch_seconds) {
    cfg.fetch_extra = FromSeconds(*rt.revision.predictor.resources->fetch_seconds);
  }
  cfg.model_dir = options_.work_dir / service / rev.ToString() / id;
  cfg.seed = MixSeed(options_.seed, id);
  cfg.predictors = options_.predictors;

  std::weak_ptr<bool> alive = alive_;
  ReplicaHooks hooks;
  hooks.on_state = [this, alive, service, rev, id](ReplicaState s) {
    if (alive.expired() || shutting_down_) return;
    clock_.Post(
        [this, alive, service, rev, id, s] {
          if (!alive.expired()) OnReplicaState(service, rev, id, s);
        },
        EventPriority::kLifecycle);
  };
  hooks.on_load = [this, alive, service, rev, id] {
    if (alive.expired() || shutting_down_) return;
    OnReplicaLoad(service, rev, id);
  };
  hooks.on_batch = [this, alive, service](const BatchRecord& b) {
    if (alive.expired()) return;
    BatchStats& st = batch_stats_[service];
    st.sizes[b.size] += 1;
    for (Duration w : b.waits) {
      st.total_wait += w;
      st.waits += 1;
    }
    metrics_->Observe("batch_size", static_cast<double>(b.size), {{"service", service}});
  };
  auto replica = Replica::Start(id, rt.revision, std::move(cfg), clock_, events_, std::move(hooks));
  rt.replicas.push_back(replica);
  rt.autoscaler->Record(replica->ReportStats(clock_.Now()));
}

void Platform::UpdateReadyGauge(const std::string& service, const RevisionRuntime& rt) {
  metrics_->Set("ready_replicas", rt.Count({ReplicaState::kReady}),
                {{"service", service}, {"revision", rt.revision.id.ToString()}});
}

void Platform::OnReplicaState(const std::string& service, RevisionId rev, const std::string& id,
                              ReplicaState state) {
  RevisionRuntime* rt = FindRevision(service, rev);
  if (!rt) {
    if (state == ReplicaState::kStopped) {
      auto it = std::find_if(retiring_.begin(), retiring_.end(),
                             [&](const auto& r) { return r->id() == id; });
      if (it != retiring_.end()) {
        std::error_code ec;
        std::filesystem::remove_all((*it)->manifest() ? (*it)->manifest()->local_path
                                                      : std::filesystem::path(),
                                    ec);
        retiring_.erase(it);
      }
    }
    return;
  }
  auto pos = std::find_if(rt->replicas.begin(), rt->replicas.end(),
                          [&](const auto& r) { return r->id() == id; });
  if (pos == rt->replicas.end()) return;
  std::shared_ptr<Replica> replica = *pos;
  switch (state) {
    case ReplicaState::kReady:
      rt->ever_ready = true;
      rt->consecutive_failures = 0;
      metrics_->Increment("replica_starts_total", {{"service", service}, {"outcome", "ready"}});
      if (replica->ready_at()) {
        metrics_->Observe("startup_duration_seconds",
                          ToSeconds(*replica->ready_at() - replica->started_at()),
                          {{"service", service}});
      }
      rt->autoscaler->Record(replica->ReportStats(clock_.Now()));
      UpdateReadyGauge(service, *rt);
      Release(service, rev);
      ScheduleReconcile(service);
      break;
    case ReplicaState::kStopped: {
      if (!replica->failure().empty() && !replica->ready_at()) {
        rt->consecutive_failures += 1;
        metrics_->Increment("replica_starts_total", {{"service", service}, {"outcome", "failed"}});
        Event(service, "StartupFailed", id + ": " + replica->failure());
      }
      rt->replicas.erase(pos);
      rt->autoscaler->RemoveReplica(id);
      UpdateReadyGauge(service, *rt);
      std::error_code ec;
      if (replica->manifest()) std::filesystem::remove_all(replica->manifest()->local_path, ec);
      ScheduleReconcile(service);
      break;
    }
    case ReplicaState::kDraining:
      UpdateReadyGauge(service, *rt);
      break;
    default:
      break;
  }
}

void Platform::OnReplicaLoad(const std::string& service, RevisionId rev, const std::string& id) {
  RevisionRuntime* rt = FindRevision(service, rev);
  if (!rt) return;
  Replica* r = rt->Find(id);
  if (!r) return;
  const Timestamp now = clock_.Now();
  rt->autoscaler->Record(r->ReportStats(now));
  if (!rt->activator->empty()) ScheduleRelease(service, rev);
}

void Platform::OnActivatorChange(const std::string& service, RevisionId rev, int buffered) {
  metrics_->Set("buffered", buffered, {{"service", service}, {"revision", rev.ToString()}});
  RevisionRuntime* rt = FindRevision(service, rev);
  if (!rt || shutting_down_) return;
  rt->autoscaler->Record(ActivatorSample{rev, clock_.Now(), buffered});
}

void Platform::ScheduleRelease(const std::string& service, RevisionId rev) {
  RevisionRuntime* rt = FindRevision(service, rev);
  if (!rt || rt->release_pending) return;
  rt->release_pending = true;
  std::weak_ptr<bool> alive = alive_;
  clock_.Post(
      [this, alive, service, rev] {
        if (alive.expired()) return;
        if (RevisionRuntime* r = FindRevision(service, rev)) r->release_pending = false;
        Release(service, rev);
      },
      EventPriority::kCompletion);
}

// Forwards held requests while some ready replica has a free slot.
void Platform::Release(const std::string& service, RevisionId rev) {
  for (;;) {
    RevisionRuntime* rt = FindRevision(service, rev);
    if (!rt || rt->activator->empty()) return;
    std::vector<std::shared_ptr<Replica>> open;
    std::vector<StatSample> stats;
    const Timestamp now = clock_.Now();
    for (const auto& r : rt->replicas) {
      if (r->HasCapacity()) {
        open.push_back(r);
        stats.push_back(r->ReportStats(now));
      }
    }
    if (open.empty()) return;
    auto target = open[PickReplica(stats, rt->rr_cursor)];
    auto entry = rt->activator->PopFront();
    target->HandleRequest(std::move(entry->env), std::move(entry->done));
  }
}

void Platform::Dispatch(const std::string& service, RevisionId rev, RequestEnvelope env,
                        ResponseCallback done) {
  RevisionRuntime* rt = FindRevision(service, rev);
  if (!rt) {
    done(Failure(env.id, ResponseStatus::kNotReady, "revision " + rev.ToString() + " is gone"));
    return;
  }
  std::vector<std::shared_ptr<Replica>> ready;
  // Keep FIFO order behind requests already held by the activator.
  if (rt->activator->empty()) {
    for (const auto& r : rt->replicas) {
      if (r->state() == ReplicaState::kReady) ready.push_back(r);
    }
  }
  const bool shadow = env.shadow;
  const std::uint64_t id = env.id;
  ForwardDecision d = AdmitOrBuffer(env, done, ready, *rt->activator, rt->rr_cursor, clock_.Now());
  switch (d.kind) {
    case ForwardDecision::Kind::kDirect:
      d.replica->HandleRequest(std::move(env), std::move(done));
      break;
    case ForwardDecision::Kind::kBuffered:
      if (!shadow) metrics_->Increment("cold_starts_total", {{"service", service}});
      Release(service, rev);
      break;
    case ForwardDecision::Kind::kRejected:
      done(Failure(id, d.reason, "activator buffer full for " + rev.ToString()));
      break;
  }
}

void Platform::Reroute(const std::string& service, RequestEnvelope env, ResponseCallback done) {
  env.routed_revision.reset();
  RevisionId rev;
  try {
    rev = router_.Route(env);
  } catch (const Error&) {
    done(Failure(env.id, ResponseStatus::kUnknownService, "service " + service + " has no route"));
    return;
  }
  Dispatch(service, rev, std::move(env), std::move(done));
}

void Platform::Mirror(ServiceRuntime& svc, RevisionId shadow, const RequestEnvelope& env) {
  const std::string service = svc.spec.name;
  const std::uint64_t id = NextRequestId();
  std::weak_ptr<bool> alive = alive_;
  auto backend = [this, alive, service, shadow, id](Instances x, ResponseCallback cb) {
    if (alive.expired()) return;
    RequestEnvelope e;
    e.id = id;
    e.service = service;
    e.arrival = clock_.Now();
    e.payload = std::move(x);
    e.routed_revision = shadow;
    e.shadow = true;
    Dispatch(service, shadow, std::move(e), std::move(cb));
  };
  svc.pipeline.Predict(env.payload, backend, [this, alive, service](InferenceResponse resp) {
    if (alive.expired()) return;
    ShadowStats& st = shadow_stats_[service];
    (resp.ok() ? st.ok : st.failed) += 1;
    metrics_->Increment("shadow_total",
                        {{"service", service}, {"outcome", resp.ok() ? "ok" : "error"}});
  });
}

void Platform::Submit(RequestEnvelope env, ResponseCallback done) {
  env.arrival = clock_.Now();
  if (env.id == 0) env.id = NextRequestId();
  const std::uint64_t request_id = env.id;
  ServiceRuntime* svc = FindService(env.service);
  if (!svc || shutting_down_) {
    done(Failure(request_id, ResponseStatus::kUnknownService, "unknown service " + env.service));
    return;
  }
  if (env.payload.empty()) {
    done(Failure(request_id, ResponseStatus::kBadRequest, "instances must not be empty"));
    return;
  }
  RevisionId rev;
  try {
    rev = router_.Route(env);
  } catch (const Error&) {
    done(Failure(request_id, ResponseStatus::kNotReady, "service " + env.service + " has no route"));
    return;
  }
  const std::string service = env.service;
  const Timestamp arrival = env.arrival;
  const bool log_payload = svc->payload_log && payload_logger_;
  nlohmann::json request_json;
  if (log_payload) request_json = InstancesJson(env.payload);

  std::weak_ptr<bool> alive = alive_;
  auto finish = [this, alive, service, rev, arrival, request_id, log_payload,
                 request_json = std::move(request_json),
                 done = std::move(done)](InferenceResponse resp) mutable {
    resp.request_id = request_id;
    if (!resp.served_revision) resp.served_revision = rev;
    if (!alive.expired()) {
      const Duration latency = clock_.Now() - arrival;
      const std::string status(StatusName(resp.status));
      metrics_->Increment("requests_total",
                          {{"service", service},
                           {"revision", resp.served_revision->ToString()},
                           {"status", status}});
      if (!resp.ok()) metrics_->Increment("errors_total", {{"service", service}, {"class", status}});
      metrics_->Observe("request_latency_seconds", ToSeconds(latency), {{"service", service}});
      if (log_payload) {
        PayloadRecord rec;
        rec.request_id = request_id;
        rec.service = service;
        rec.revision = resp.served_revision->ToString();
        rec.timestamp = clock_.Now();
        rec.request = std::move(request_json);
        if (resp.ok()) {
          if (resp.explanations.empty()) {
            rec.response = resp.outputs;
          } else {
            rec.response = nlohmann::json::array();
            for (const auto& e : resp.explanations) {
              rec.response.push_back({{"base", e.base}, {"contributions", e.contributions}});
            }
          }
        } else {
          rec.error = status + ": " + resp.message;
        }
        rec.latency = latency;
        payload_logger_->Log(std::move(rec));
        SchedulePayloadDrain();
      }
    }
    done(std::move(resp));
  };

  const Verb verb = env.verb;
  if (verb == Verb::kPredict) {
    if (auto shadow = router_.ShadowOf(service)) {
      if (FindRevision(service, *shadow)) Mirror(*svc, *shadow, env);
    }
  }
  auto backend = [this, alive, service, rev, verb, first = std::make_shared<bool>(true),
                  request_id](Instances x, ResponseCallback cb) {
    if (alive.expired()) return;
    RequestEnvelope e;
    // The first backend call keeps the client id; explain fans out further.
    e.id = *first ? request_id : NextRequestId();
    *first = false;
    e.service = service;
    e.verb = verb;
    e.arrival = clock_.Now();
    e.payload = std::move(x);
    e.routed_revision = rev;
    Dispatch(service, rev, std::move(e), std::move(cb));
  };
  Instances payload = std::move(env.payload);
  if (verb == Verb::kExplain) {
    svc->pipeline.Explain(std::move(payload), backend, std::move(finish));
  } else {
    svc->pipeline.Predict(std::move(payload), backend, std::move(finish));
  }
}

void Platform::SchedulePayloadDrain() {
  if (!clock_.IsVirtual() || payload_drain_scheduled_ || !payload_logger_) return;
  payload_drain_scheduled_ = true;
  std::weak_ptr<bool> alive = alive_;
  clock_.ScheduleAfter(
      options_.payload_drain_interval,
      [this, alive] {
        if (alive.expired()) return;
        payload_drain_scheduled_ = false;
        payload_logger_->DrainSome();
        if (payload_logger_->buffered() > 0 && !shutting_down_) SchedulePayloadDrain();
      },
      EventPriority::kDefault);
}

void Platform::FlushPayloads() {
  if (payload_logger_) payload_logger_->DrainSome();
}

void Platform::OnScaleCommand(const std::string& service, const ScaleCommand& cmd) {
  ServiceRuntime* svc = FindService(service);
  if (!svc || shutting_down_) return;
  ActionPlan plan;
  try {
    plan = ApplyScale(cmd, Observe(service));
  } catch (const Error& e) {
    Event(service, "ScaleRejected", e.what());
    return;
  }
  if (plan.empty()) return;
  if (cmd.count == 0) {
    if (auto it = svc->revisions.find(cmd.revision); it != svc->revisions.end()) {
      it->second->scaled_to_zero = true;
    }
  }
  actions_applied_ += plan.actions.size();
  ApplyPlan(*svc, plan);
}

std::vector<DecisionRecord> Platform::Decisions(const std::string& service) const {
  std::vector<DecisionRecord> out;
  if (auto it = retired_decisions_.find(service); it != retired_decisions_.end()) out = it->second;
  if (const ServiceRuntime* svc = FindService(service)) {
    for (const auto& [id, rt] : svc->revisions) {
      const auto& d = rt->autoscaler->decisions();
      out.insert(out.end(), d.begin(), d.end());
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const DecisionRecord& a, const DecisionRecord& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.revision < b.revision;
  });
  return out;
}

BatchStats Platform::batch_stats(const std::string& service) const {
  auto it = batch_stats_.find(service);
  return it == batch_stats_.end() ? BatchStats{} : it->second;
}

ShadowStats Platform::shadow_stats(const std::string& service) const {
  auto it = shadow_stats_.find(service);
  return it == shadow_stats_.end() ? ShadowStats{} : it->second;
}

nlohmann::json Platform::Status(const std::string& service) const {
  const ServiceRuntime& svc = ServiceOrThrow(service);
  nlohmann::json j;
  j["name"] = service;
  j["generation"] = svc.generation;
  j["observedGeneration"] = svc.generation;
  j["spec"] = SerializeSpec(svc.spec);

  nlohmann::json traffic = nlohmann::json::array();
  bool serving = false;
  if (svc.route) {
    for (const auto& t : svc.route->targets) {
      traffic.push_back({{"revision", t.revision.ToString()},
                         {"role", std::string(RoleName(t.role))},
                         {"percent", t.weight}});
      auto it = svc.revisions.find(t.revision);
      if (t.weight > 0 && it != svc.revisions.end() &&
          (it->second->ever_ready || it->second->Count({ReplicaState::kReady}) > 0)) {
        serving = true;
      }
    }
    if (svc.route->shadow) j["shadow"] = svc.route->shadow->ToString();
  }
  j["traffic"] = traffic;

  nlohmann::json revisions = nlohmann::json::array();
  for (const auto& [id, rt] : svc.revisions) {
    nlohmann::json replicas = nlohmann::json::array();
    for (const auto& r : rt->replicas) {
      replicas.push_back({{"id", r->id()}, {"state", std::string(StateName(r->state()))}});
    }
    revisions.push_back({{"id", id.ToString()},
                         {"role", std::string(RoleName(rt->revision.role))},
                         {"storageUri", rt->revision.predictor.storage_uri},
                         {"ready", rt->Count({ReplicaState::kReady})},
                         {"starting", rt->Count({ReplicaState::kPending,
                                                 ReplicaState::kInitializing})},
                         {"draining", rt->Count({ReplicaState::kDraining})},
                         {"buffered", rt->activator->size()},
                         {"everReady", rt->ever_ready},
                         {"consecutiveFailures", rt->consecutive_failures},
                         {"replicas", replicas}});
  }
  j["revisions"] = revisions;

  nlohmann::json conditions = nlohmann::json::array();
  conditions.push_back({{"type", "Ready"}, {"status", serving}});
  conditions.push_back({{"type", "RolloutInProgress"}, {"status", svc.rollout.has_value()}});
  if (svc.failed_target) {
    conditions.push_back({{"type", "RollbackRequired"},
                          {"status", true},
                          {"message", "revision " + svc.failed_target->ToString() +
                                          " failed to start; traffic kept on the previous "
                                          "revision"}});
  }
  j["conditions"] = conditions;
  j["ready"] = serving;
  return j;
}

}  // namespace miniserve

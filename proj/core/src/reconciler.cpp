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

#include "miniserve/reconciler.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "miniserve/error.hpp"

namespace miniserve {
namespace {

// Actions grouped by phase so that a plan always registers and creates
// before it swaps traffic, and swaps before it drains or removes.
struct PlanBuilder {
  std::vector<Action> pre;
  std::vector<Action> swap;
  std::vector<Action> post;
  std::vector<Action> remove;
  std::vector<Action> finish;
  bool rollback = false;

  ActionPlan Build() && {
    ActionPlan p;
    for (auto* bucket : {&pre, &swap, &post, &remove, &finish}) {
      for (auto& a : *bucket) p.actions.push_back(std::move(a));
    }
    p.rollback_required = rollback;
    return p;
  }
};

Action Make(Action::Kind kind, const std::string& service, RevisionId revision) {
  Action a;
  a.kind = kind;
  a.service = service;
  a.revision = revision;
  return a;
}

void AddCreates(PlanBuilder& b, const std::string& service, RevisionId rev, int n) {
  for (int i = 0; i < n; ++i) b.pre.push_back(Make(Action::Kind::kCreateReplica, service, rev));
}

void Retire(std::vector<Action>& out, const std::string& service, RevisionId rev,
            const ObservedReplica& r) {
  Action a = Make(r.state == ReplicaState::kReady ? Action::Kind::kDrainReplica
                                                  : Action::Kind::kStopReplica,
                  service, rev);
  a.replica = r.id;
  out.push_back(std::move(a));
}

struct Candidate {
  RevisionId revision;
  const ObservedReplica* replica;
};

// Non-ready first, then least loaded, then by id.
void SortForRetirement(std::vector<Candidate>& c) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    const bool ra = a.replica->state == ReplicaState::kReady;
    const bool rb = b.replica->state == ReplicaState::kReady;
    if (ra != rb) return !ra;
    if (a.replica->load != b.replica->load) return a.replica->load < b.replica->load;
    return a.replica->id < b.replica->id;
  });
}

std::vector<WeightedTarget> DefaultTargets(const std::optional<ServiceRoute>& route) {
  std::vector<WeightedTarget> out;
  if (!route) return out;
  for (const auto& t : route->targets) {
    if (t.role == RevisionRole::kDefault) out.push_back(t);
  }
  return out;
}

// Re-spreads `share` over the given default targets keeping their current
// proportions (equal split when all were zero).
std::vector<WeightedTarget> Rescale(std::vector<WeightedTarget> targets, int share) {
  std::vector<int> w;
  for (const auto& t : targets) w.push_back(t.weight);
  if (std::accumulate(w.begin(), w.end(), 0) == 0) std::fill(w.begin(), w.end(), 1);
  const auto split = SplitPercent(share, w);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i].weight = split[i];
  return targets;
}

struct StepResult {
  std::vector<WeightedTarget> defaults;
  bool finished = false;
  bool aborted = false;
};

// Sources in `pinned` are still referenced by the spec under another role;
// the rollout neither retires them nor routes default traffic to them.
StepResult RollingStep(const ObservedService& obs, const ReconcileOptions& opts,
                       int default_share, const std::set<RevisionId>& pinned, PlanBuilder& b) {
  StepResult res;
  const RolloutState& rs = *obs.rollout;
  auto tit = obs.revisions.find(rs.target);
  if (tit == obs.revisions.end()) {
    res.defaults = Rescale(DefaultTargets(obs.route), default_share);
    return res;
  }
  const ObservedRevision& target = tit->second;

  if (target.consecutive_failures >= opts.max_failures) {
    res.aborted = true;
    b.rollback = true;
    b.finish.push_back(Make(Action::Kind::kAbortRollout, obs.name, rs.target));
    std::vector<WeightedTarget> restored;
    for (const auto& t : DefaultTargets(rs.original_route)) {
      if (obs.revisions.count(t.revision)) restored.push_back(t);
    }
    res.defaults = Rescale(std::move(restored), default_share);
    return res;
  }

  std::vector<Candidate> source_live;
  std::map<RevisionId, int> source_ready;
  for (const auto& sid : rs.sources) {
    auto sit = obs.revisions.find(sid);
    if (sit == obs.revisions.end() || pinned.count(sid)) continue;
    source_ready[sid] = sit->second.Ready();
    for (const auto& r : sit->second.replicas) {
      if (r.live()) source_live.push_back({sid, &r});
    }
  }
  int o = static_cast<int>(source_live.size());
  const int d_ready = target.Ready();
  const int d_start = target.Starting();
  const int k = rs.capacity;
  const int step = std::max(1, opts.step_size);

  if (o > 0 && d_start == 0) {
    if (d_ready + o <= k) {
      AddCreates(b, obs.name, rs.target, k + step - (d_ready + o));
    } else {
      const int n = std::min({step, d_ready + o - k, o});
      SortForRetirement(source_live);
      for (int i = 0; i < n; ++i) {
        const Candidate& c = source_live[static_cast<std::size_t>(i)];
        Retire(b.post, obs.name, c.revision, *c.replica);
        if (c.replica->state == ReplicaState::kReady) --source_ready[c.revision];
      }
      o -= n;
    }
  }

  if (o == 0) {
    // Pinned sources took their replicas with them; give the target the
    // capacity it was meant to replace.
    if (k > 0 && target.Live() == 0) AddCreates(b, obs.name, rs.target, k);
    res.finished = true;
    b.finish.push_back(Make(Action::Kind::kFinishRollout, obs.name, rs.target));
    res.defaults = {{rs.target, default_share, RevisionRole::kDefault}};
    return res;
  }

  std::vector<WeightedTarget> targets = {{rs.target, 0, RevisionRole::kDefault}};
  std::vector<int> shares = {d_ready};
  for (const auto& sid : rs.sources) {
    if (!obs.revisions.count(sid) || pinned.count(sid)) continue;
    targets.push_back({sid, 0, RevisionRole::kDefault});
    shares.push_back(std::max(0, source_ready[sid]));
  }
  if (std::accumulate(shares.begin(), shares.end(), 0) == 0) {
    // Nothing ready anywhere yet; leave traffic where it is.
    res.defaults = Rescale(DefaultTargets(obs.route), default_share);
    if (res.defaults.empty()) res.defaults = {{rs.target, default_share, RevisionRole::kDefault}};
    return res;
  }
  const auto split = SplitPercent(default_share, shares);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i].weight = split[i];
  res.defaults = std::move(targets);
  return res;
}

ServiceRoute AssembleRoute(std::vector<WeightedTarget> defaults,
                           const std::optional<WeightedTarget>& canary,
                           std::optional<RevisionId> shadow) {
  ServiceRoute r;
  r.targets = std::move(defaults);
  if (canary && canary->weight > 0) r.targets.push_back(*canary);
  r.shadow = shadow;
  return r;
}

}  // namespace

int ObservedRevision::Ready() const {
  return static_cast<int>(std::count_if(replicas.begin(), replicas.end(), [](const auto& r) {
    return r.state == ReplicaState::kReady;
  }));
}

int ObservedRevision::Starting() const {
  return static_cast<int>(std::count_if(replicas.begin(), replicas.end(), [](const auto& r) {
    return r.state == ReplicaState::kPending || r.state == ReplicaState::kInitializing;
  }));
}

std::string_view ActionKindName(Action::Kind kind) {
  switch (kind) {
    case Action::Kind::kRegisterRevision: return "RegisterRevision";
    case Action::Kind::kCreateReplica: return "CreateReplica";
    case Action::Kind::kDrainReplica: return "DrainReplica";
    case Action::Kind::kStopReplica: return "StopReplica";
    case Action::Kind::kSwapRoutingTable: return "SwapRoutingTable";
    case Action::Kind::kRemoveRevision: return "RemoveRevision";
    case Action::Kind::kConfigurePipeline: return "ConfigurePipeline";
    case Action::Kind::kStartRollout: return "StartRollout";
    case Action::Kind::kFinishRollout: return "FinishRollout";
    case Action::Kind::kAbortRollout: return "AbortRollout";
  }
  return "?";
}

std::string Action::Describe() const {
  std::ostringstream out;
  out << ActionKindName(kind) << " " << service;
  switch (kind) {
    case Kind::kSwapRoutingTable:
      if (!route) {
        out << " (remove)";
        break;
      }
      for (const auto& t : route->targets) {
        out << " " << t.revision.ToString() << "=" << t.weight;
      }
      if (route->shadow) out << " shadow=" << route->shadow->ToString();
      break;
    case Kind::kDrainReplica:
    case Kind::kStopReplica:
      out << " " << replica;
      break;
    case Kind::kConfigurePipeline:
      out << " transformer=" << (transformer ? transformer->kind : "none")
          << " explainer=" << (explainer ? explainer->kind : "none");
      break;
    case Kind::kRegisterRevision:
      out << " " << revision.ToString() << " role=" << RoleName(role);
      break;
    default:
      out << " " << revision.ToString();
  }
  return out.str();
}

std::size_t ActionPlan::Count(Action::Kind kind) const {
  return static_cast<std::size_t>(std::count_if(
      actions.begin(), actions.end(), [kind](const Action& a) { return a.kind == kind; }));
}

ReconcileOptions ReconcileOptions::FromAnnotations(const std::map<std::string, std::string>& a) {
  ReconcileOptions o;
  o.initial_scale = static_cast<int>(AnnotationDouble(a, "autoscaling.initialScale", o.initial_scale));
  o.step_size = static_cast<int>(AnnotationDouble(a, "rollout.stepSize", o.step_size));
  o.max_failures = static_cast<int>(AnnotationDouble(a, "rollout.maxFailures", o.max_failures));
  return o;
}

std::vector<int> SplitPercent(int total, const std::vector<int>& shares) {
  std::vector<int> out(shares.size(), 0);
  const long long sum = std::accumulate(shares.begin(), shares.end(), 0LL);
  if (sum <= 0 || total <= 0) return out;
  std::vector<std::pair<long long, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const long long num = static_cast<long long>(total) * shares[i];
    out[i] = static_cast<int>(num / sum);
    assigned += out[i];
    remainders.push_back({num % sum, i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) {
    out[remainders[j % remainders.size()].second] += 1;
  }
  return out;
}

ActionPlan Reconcile(const InferenceServiceSpec& spec, const ObservedService& obs) {
  PlanBuilder b;
  const ReconcileOptions opts = ReconcileOptions::FromAnnotations(spec.annotations);
  const std::string& svc = spec.name;

  const RevisionId d = RevisionHash(spec.default_predictor);
  std::optional<RevisionId> c;
  if (spec.canary) {
    const RevisionId h = RevisionHash(*spec.canary);
    if (h != d) c = h;
  }
  std::optional<RevisionId> s;
  if (spec.shadow) {
    const RevisionId h = RevisionHash(*spec.shadow);
    if (h != d && h != c) s = h;
  }

  if (obs.transformer != spec.transformer || obs.explainer != spec.explainer) {
    Action a = Make(Action::Kind::kConfigurePipeline, svc, d);
    a.transformer = spec.transformer;
    a.explainer = spec.explainer;
    b.pre.push_back(std::move(a));
  }

  std::set<RevisionId> keep;
  auto ensure = [&](RevisionId id, RevisionRole role, const PredictorSpec& p, bool create) {
    keep.insert(id);
    auto it = obs.revisions.find(id);
    if (it == obs.revisions.end()) {
      Action a = Make(Action::Kind::kRegisterRevision, svc, id);
      a.role = role;
      a.predictor = p;
      b.pre.push_back(std::move(a));
      if (create) AddCreates(b, svc, id, opts.initial_scale);
      return;
    }
    // Revive a revision left without replicas by failed starts or by a
    // rollout that drained it, unless the autoscaler chose zero.
    const ObservedRevision& rev = it->second;
    if (create && rev.Live() == 0 && !rev.scaled_to_zero && opts.initial_scale > 0 &&
        rev.consecutive_failures < opts.max_failures) {
      AddCreates(b, svc, id, opts.initial_scale);
    }
  };

  std::optional<WeightedTarget> canary_target;
  if (c) {
    ensure(*c, RevisionRole::kCanary, *spec.canary, true);
    auto it = obs.revisions.find(*c);
    const bool routable =
        it != obs.revisions.end() && (it->second.ever_ready || opts.initial_scale == 0);
    if (routable && spec.canary_traffic_percent > 0) {
      canary_target = WeightedTarget{*c, spec.canary_traffic_percent, RevisionRole::kCanary};
    }
  }
  const int default_share = 100 - (canary_target ? canary_target->weight : 0);

  const std::vector<WeightedTarget> current = DefaultTargets(obs.route);
  std::vector<WeightedTarget> defaults;
  bool failed = obs.failed_target == d;
  if (failed) {
    defaults = Rescale(current, default_share);
  } else if (obs.rollout && obs.rollout->target == d) {
    keep.insert(d);
    std::set<RevisionId> pinned;
    if (c) pinned.insert(*c);
    if (s) pinned.insert(*s);
    StepResult step = RollingStep(obs, opts, default_share, pinned, b);
    if (step.aborted) {
      failed = true;
    } else if (!step.finished) {
      for (const auto& sid : obs.rollout->sources) keep.insert(sid);
    }
    defaults = std::move(step.defaults);
  } else if (current.empty()) {
    ensure(d, RevisionRole::kDefault, spec.default_predictor, true);
    defaults = {{d, default_share, RevisionRole::kDefault}};
  } else if (current.size() == 1 && current[0].revision == d && !obs.rollout) {
    ensure(d, RevisionRole::kDefault, spec.default_predictor, true);
    defaults = {{d, default_share, RevisionRole::kDefault}};
  } else {
    // The default changed: begin a rollout toward d from whatever serves now.
    keep.insert(d);
    if (!obs.revisions.count(d)) {
      Action a = Make(Action::Kind::kRegisterRevision, svc, d);
      a.role = RevisionRole::kDefault;
      a.predictor = spec.default_predictor;
      b.pre.push_back(std::move(a));
    }
    RolloutState rs;
    rs.target = d;
    rs.original_route = obs.route;
    for (const auto& t : current) {
      if (t.revision == d) continue;
      rs.sources.push_back(t.revision);
      keep.insert(t.revision);
      auto it = obs.revisions.find(t.revision);
      if (it != obs.revisions.end()) rs.capacity += it->second.Live();
    }
    Action a = Make(Action::Kind::kStartRollout, svc, d);
    a.rollout = rs;
    b.pre.push_back(std::move(a));
    defaults = Rescale(current, default_share);
  }
  if (failed) {
    keep.erase(d);
    for (const auto& t : defaults) keep.insert(t.revision);
  }

  if (s) ensure(*s, RevisionRole::kShadow, *spec.shadow, true);

  ServiceRoute desired = AssembleRoute(std::move(defaults), canary_target, s);
  for (const auto& t : desired.targets) keep.insert(t.revision);
  if (!obs.route || *obs.route != desired) {
    Action a = Make(Action::Kind::kSwapRoutingTable, svc, d);
    a.route = desired;
    b.swap.push_back(std::move(a));
  }

  for (const auto& [id, rev] : obs.revisions) {
    if (keep.count(id)) continue;
    for (const auto& r : rev.replicas) {
      if (r.live()) Retire(b.post, svc, id, r);
    }
    b.remove.push_back(Make(Action::Kind::kRemoveRevision, svc, id));
  }
  return std::move(b).Build();
}

ActionPlan RollingUpdate(const ObservedService& obs, const ReconcileOptions& options,
                         std::optional<WeightedTarget> canary) {
  if (!obs.rollout) return {};
  PlanBuilder b;
  const int share = 100 - (canary ? canary->weight : 0);
  StepResult step = RollingStep(obs, options, share, {}, b);
  ServiceRoute desired = AssembleRoute(std::move(step.defaults), canary,
                                       obs.route ? obs.route->shadow : std::nullopt);
  if (!obs.route || *obs.route != desired) {
    Action a = Make(Action::Kind::kSwapRoutingTable, obs.name, obs.rollout->target);
    a.route = desired;
    b.swap.push_back(std::move(a));
  }
  std::vector<RevisionId> retired;
  if (step.finished) retired = obs.rollout->sources;
  if (step.aborted) retired = {obs.rollout->target};
  for (const auto& id : retired) {
    auto it = obs.revisions.find(id);
    if (it == obs.revisions.end()) continue;
    for (const auto& r : it->second.replicas) {
      if (r.live()) Retire(b.post, obs.name, id, r);
    }
    b.remove.push_back(Make(Action::Kind::kRemoveRevision, obs.name, id));
  }
  return std::move(b).Build();
}

ActionPlan ReconcileDelete(const ObservedService& obs) {
  PlanBuilder b;
  if (obs.route) b.swap.push_back(Make(Action::Kind::kSwapRoutingTable, obs.name, {}));
  for (const auto& [id, rev] : obs.revisions) {
    for (const auto& r : rev.replicas) {
      if (r.live()) Retire(b.post, obs.name, id, r);
    }
    b.remove.push_back(Make(Action::Kind::kRemoveRevision, obs.name, id));
  }
  return std::move(b).Build();
}

InferenceServiceSpec PromoteCanary(const InferenceServiceSpec& spec) {
  if (!spec.canary) throw Error(Errc::kNoCanary, "service " + spec.name + " has no canary");
  InferenceServiceSpec out = spec;
  out.default_predictor = *spec.canary;
  out.canary.reset();
  out.canary_traffic_percent = 0;
  return out;
}

ActionPlan ApplyScale(const ScaleCommand& cmd, const ObservedService& obs) {
  auto it = obs.revisions.find(cmd.revision);
  if (it == obs.revisions.end()) {
    throw Error(Errc::kRevisionNotFound, cmd.revision.ToString() + " in " + obs.name);
  }
  if (obs.rollout) {
    const auto& rs = *obs.rollout;
    if (rs.target == cmd.revision ||
        std::find(rs.sources.begin(), rs.sources.end(), cmd.revision) != rs.sources.end()) {
      return {};
    }
  }
  PlanBuilder b;
  std::vector<Candidate> live;
  for (const auto& r : it->second.replicas) {
    if (r.live()) live.push_back({cmd.revision, &r});
  }
  const int current = static_cast<int>(live.size());
  if (cmd.count > current) {
    AddCreates(b, obs.name, cmd.revision, cmd.count - current);
  } else if (cmd.count < current) {
    if (cmd.count <= 0 && !cmd.zero_authorized) {
      throw Error(Errc::kPlanRejected,
                  "scale to zero of " + cmd.revision.ToString() + " not authorized");
    }
    SortForRetirement(live);
    for (int i = 0; i < current - std::max(0, cmd.count); ++i) {
      Retire(b.post, obs.name, cmd.revision, *live[static_cast<std::size_t>(i)].replica);
    }
  }
  return std::move(b).Build();
}

}  // namespace miniserve

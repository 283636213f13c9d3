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

#ifndef MINISERVE_RECONCILER_HPP_
#define MINISERVE_RECONCILER_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miniserve/autoscaler.hpp"
#include "miniserve/gateway.hpp"
#include "miniserve/replica.hpp"
#include "miniserve/spec.hpp"

namespace miniserve {

struct ObservedReplica {
  std::string id;
  ReplicaState state = ReplicaState::kPending;
  int load = 0;  // admitted, unfinished requests

  bool live() const {
    return state == ReplicaState::kPending || state == ReplicaState::kInitializing ||
           state == ReplicaState::kReady;
  }
};

struct ObservedRevision {
  Revision revision;
  std::vector<ObservedReplica> replicas;
  bool ever_ready = false;
  int consecutive_failures = 0;  // startup failures since the last Ready
  bool scaled_to_zero = false;   // the autoscaler removed every replica

  int Ready() const;
  int Starting() const;  // Pending or Initializing
  int Live() const { return Ready() + Starting(); }
};

// Bookkeeping for an in-progress replacement of the default revision.
struct RolloutState {
  RevisionId target;
  std::vector<RevisionId> sources;
  int capacity = 0;  // live source replicas when the rollout began
  std::optional<ServiceRoute> original_route;

  bool operator==(const RolloutState&) const = default;
};

struct ObservedService {
  std::string name;
  std::map<RevisionId, ObservedRevision> revisions;
  std::optional<ServiceRoute> route;
  std::optional<RolloutState> rollout;
  // Default revision given up on after repeated startup failures. Not retried
  // until the spec names a different default.
  std::optional<RevisionId> failed_target;
  std::optional<ComponentSpec> transformer;
  std::optional<ComponentSpec> explainer;
};

struct ObservedState {
  std::map<std::string, ObservedService> services;
};

struct Action {
  enum class Kind {
    kRegisterRevision,
    kCreateReplica,
    kDrainReplica,
    kStopReplica,
    kSwapRoutingTable,
    kRemoveRevision,
    kConfigurePipeline,
    kStartRollout,
    kFinishRollout,
    kAbortRollout,
  };
  Kind kind = Kind::kCreateReplica;
  std::string service;
  RevisionId revision;
  RevisionRole role = RevisionRole::kDefault;
  std::optional<PredictorSpec> predictor;  // kRegisterRevision
  std::string replica;                     // kDrainReplica, kStopReplica
  std::optional<ServiceRoute> route;       // kSwapRoutingTable; empty removes it
  std::optional<RolloutState> rollout;     // kStartRollout
  std::optional<ComponentSpec> transformer;  // kConfigurePipeline
  std::optional<ComponentSpec> explainer;

  std::string Describe() const;
};

std::string_view ActionKindName(Action::Kind kind);

struct ActionPlan {
  std::vector<Action> actions;
  bool rollback_required = false;

  bool empty() const { return actions.empty(); }
  std::size_t Count(Action::Kind kind) const;
};

struct ReconcileOptions {
  int initial_scale = 1;
  int step_size = 1;
  int max_failures = 3;

  static ReconcileOptions FromAnnotations(const std::map<std::string, std::string>& a);
};

// Level-triggered: the plan depends only on (spec, observed). Applying it
// and reconciling again converges; at the fixed point the plan is empty.
ActionPlan Reconcile(const InferenceServiceSpec& spec, const ObservedService& observed);

// Plan that tears a service down completely.
ActionPlan ReconcileDelete(const ObservedService& observed);

// One step of replacing the rollout's source revisions with its target:
// surge `step_size` new replicas, then shift weight and drain as many old
// ones once they are ready. Sets rollback_required (and reverts routing)
// after max_failures consecutive startup failures of the target.
// `canary` is the weight reserved for a canary target, if any.
ActionPlan RollingUpdate(const ObservedService& observed, const ReconcileOptions& options,
                         std::optional<WeightedTarget> canary = std::nullopt);

// Throws Error{kNoCanary}.
InferenceServiceSpec PromoteCanary(const InferenceServiceSpec& spec);

// Creates or drains replicas toward cmd.count. Draining picks non-ready
// replicas first, then the least loaded. Throws Error{kRevisionNotFound},
// or Error{kPlanRejected} for an unauthorized scale to zero. Revisions that
// are part of a rollout keep their size: the plan is empty.
ActionPlan ApplyScale(const ScaleCommand& cmd, const ObservedService& observed);

// Splits `total` percent over `shares` proportionally (largest remainder,
// ties by order). All-zero shares yield all-zero weights.
std::vector<int> SplitPercent(int total, const std::vector<int>& shares);

}  // namespace miniserve

#endif  // MINISERVE_RECONCILER_HPP_

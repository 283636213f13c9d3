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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "miniserve/error.hpp"
#include "miniserve/reconciler.hpp"

namespace miniserve {
namespace {

using Kind = Action::Kind;

PredictorSpec Pred(const std::string& uri) {
  PredictorSpec p;
  p.runtime_kind = "sleep";
  p.storage_uri = uri;
  return p;
}

InferenceServiceSpec Spec(const std::string& uri, int initial_scale = 1) {
  InferenceServiceSpec s;
  s.name = "svc";
  s.default_predictor = Pred(uri);
  s.annotations["autoscaling.initialScale"] = std::to_string(initial_scale);
  return s;
}

// Applies plans to an observed service the way the platform does, with
// replica startup collapsed into Settle().
class Sim {
 public:
  Sim() { obs.name = "svc"; }

  void Apply(const ActionPlan& plan) {
    for (const Action& a : plan.actions) {
      switch (a.kind) {
        case Kind::kRegisterRevision: {
          ObservedRevision r;
          r.revision = Revision{a.revision, a.service, a.role, *a.predictor};
          obs.revisions[a.revision] = r;
          break;
        }
        case Kind::kCreateReplica:
          obs.revisions.at(a.revision)
              .replicas.push_back({"r-" + std::to_string(++next_), ReplicaState::kPending, 0});
          break;
        case Kind::kDrainReplica:
        case Kind::kStopReplica:
          for (auto& r : obs.revisions.at(a.revision).replicas) {
            if (r.id == a.replica) {
              r.state = a.kind == Kind::kDrainReplica ? ReplicaState::kDraining
                                                      : ReplicaState::kStopped;
            }
          }
          break;
        case Kind::kSwapRoutingTable:
          obs.route = a.route;
          break;
        case Kind::kRemoveRevision:
          obs.revisions.erase(a.revision);
          break;
        case Kind::kConfigurePipeline:
          obs.transformer = a.transformer;
          obs.explainer = a.explainer;
          break;
        case Kind::kStartRollout:
          obs.rollout = a.rollout;
          break;
        case Kind::kFinishRollout:
          obs.rollout.reset();
          break;
        case Kind::kAbortRollout:
          obs.rollout.reset();
          obs.failed_target = a.revision;
          break;
      }
    }
  }

  void Settle() {
    for (auto& [id, rev] : obs.revisions) {
      std::vector<ObservedReplica> kept;
      for (auto r : rev.replicas) {
        if (r.state == ReplicaState::kDraining || r.state == ReplicaState::kStopped) continue;
        if (r.state == ReplicaState::kPending) {
          if (failing.count(id)) {
            ++rev.consecutive_failures;
            continue;
          }
          r.state = ReplicaState::kReady;
          rev.ever_ready = true;
          rev.consecutive_failures = 0;
        }
        kept.push_back(r);
      }
      rev.replicas = std::move(kept);
    }
  }

  int RoutedReady() const {
    int n = 0;
    if (!obs.route) return 0;
    for (const auto& t : obs.route->targets) {
      if (t.weight == 0) continue;
      auto it = obs.revisions.find(t.revision);
      if (it != obs.revisions.end()) n += it->second.Ready();
    }
    return n;
  }

  // Reconcile/apply/settle until the plan is empty. Returns the plans.
  std::vector<ActionPlan> Converge(const InferenceServiceSpec& spec, int max_rounds = 60) {
    std::vector<ActionPlan> plans;
    for (int i = 0; i < max_rounds; ++i) {
      ActionPlan p = Reconcile(spec, obs);
      if (p.empty()) return plans;
      Apply(p);
      plans.push_back(p);
      Settle();
    }
    ADD_FAILURE() << "no fixed point after " << max_rounds << " rounds";
    return plans;
  }

  ObservedService obs;
  std::set<RevisionId> failing;

 private:
  int next_ = 0;
};

std::string Dump(const ObservedService& o) {
  std::ostringstream out;
  for (const auto& [id, r] : o.revisions) {
    out << id.ToString() << " role=" << RoleName(r.revision.role) << " ready=" << r.Ready()
        << " starting=" << r.Starting() << " failures=" << r.consecutive_failures << "\n";
  }
  if (o.route) {
    for (const auto& t : o.route->targets) {
      out << "  route " << t.revision.ToString() << "=" << t.weight << " " << RoleName(t.role)
          << "\n";
    }
  }
  if (o.rollout) out << "  rollout -> " << o.rollout->target.ToString() << "\n";
  return out.str();
}

int IndexOf(const ActionPlan& p, Kind k) {
  for (std::size_t i = 0; i < p.actions.size(); ++i) {
    if (p.actions[i].kind == k) return static_cast<int>(i);
  }
  return -1;
}

TEST(ReconcileTest, FreshServiceRegistersCreatesAndRoutes) {
  Sim sim;
  const auto s = Spec("file:///m/a", 2);
  const ActionPlan p = Reconcile(s, sim.obs);
  EXPECT_EQ(p.Count(Kind::kRegisterRevision), 1u);
  EXPECT_EQ(p.Count(Kind::kCreateReplica), 2u);
  EXPECT_EQ(p.Count(Kind::kSwapRoutingTable), 1u);
  sim.Apply(p);
  sim.Settle();
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
  const RevisionId d = RevisionHash(s.default_predictor);
  ASSERT_TRUE(sim.obs.route);
  EXPECT_EQ(sim.obs.route->targets, (std::vector<WeightedTarget>{{d, 100, RevisionRole::kDefault}}));
}

TEST(ReconcileTest, FixedPointIsEmptyPlan) {
  Sim sim;
  const auto s = Spec("file:///m/a");
  sim.Converge(s);
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
}

TEST(ReconcileTest, CanaryAddedSplitsNinetyTen) {
  Sim sim;
  auto s = Spec("file:///m/a");
  sim.Converge(s);
  s.canary = Pred("file:///m/b");
  s.canary_traffic_percent = 10;
  const RevisionId d = RevisionHash(s.default_predictor);
  const RevisionId c = RevisionHash(*s.canary);

  const ActionPlan first = Reconcile(s, sim.obs);
  ASSERT_EQ(first.Count(Kind::kRegisterRevision), 1u);
  EXPECT_EQ(first.actions[static_cast<std::size_t>(IndexOf(first, Kind::kRegisterRevision))].role,
            RevisionRole::kCanary);
  EXPECT_EQ(first.Count(Kind::kCreateReplica), 1u);
  // Not routable before a replica has been ready.
  EXPECT_EQ(first.Count(Kind::kSwapRoutingTable), 0u);
  EXPECT_EQ(first.Count(Kind::kDrainReplica), 0u);

  sim.Converge(s);
  ASSERT_TRUE(sim.obs.route);
  EXPECT_EQ(sim.obs.route->targets,
            (std::vector<WeightedTarget>{{d, 90, RevisionRole::kDefault},
                                         {c, 10, RevisionRole::kCanary}}));
  EXPECT_EQ(sim.obs.revisions.size(), 2u);
}

TEST(ReconcileTest, CanaryRemovedSwapsThenDrainsThenRemoves) {
  Sim sim;
  auto s = Spec("file:///m/a");
  s.canary = Pred("file:///m/b");
  s.canary_traffic_percent = 10;
  sim.Converge(s);
  const RevisionId c = RevisionHash(*s.canary);
  s.canary.reset();
  s.canary_traffic_percent = 0;

  const ActionPlan p = Reconcile(s, sim.obs);
  const int swap = IndexOf(p, Kind::kSwapRoutingTable);
  const int drain = IndexOf(p, Kind::kDrainReplica);
  const int remove = IndexOf(p, Kind::kRemoveRevision);
  ASSERT_GE(swap, 0);
  ASSERT_GE(drain, 0);
  ASSERT_GE(remove, 0);
  EXPECT_LT(swap, drain);
  EXPECT_LT(drain, remove);
  EXPECT_EQ(p.actions[static_cast<std::size_t>(remove)].revision, c);
  ASSERT_TRUE(p.actions[static_cast<std::size_t>(swap)].route);
  EXPECT_EQ(p.actions[static_cast<std::size_t>(swap)].route->TotalWeight(), 100);
  sim.Apply(p);
  sim.Settle();
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
  EXPECT_EQ(sim.obs.revisions.size(), 1u);
}

TEST(ReconcileTest, RollingUpdateNeverDropsBelowCapacity) {
  for (int k : {1, 2, 4}) {
    Sim sim;
    auto s = Spec("file:///m/a", k);
    sim.Converge(s);
    ASSERT_EQ(sim.RoutedReady(), k);
    s.default_predictor = Pred("file:///m/b");
    const RevisionId d2 = RevisionHash(s.default_predictor);

    int rounds = 0;
    bool started = false;
    bool finished = false;
    for (; rounds < 60; ++rounds) {
      const ActionPlan p = Reconcile(s, sim.obs);
      if (p.empty()) break;
      started |= p.Count(Kind::kStartRollout) > 0;
      finished |= p.Count(Kind::kFinishRollout) > 0;
      sim.Apply(p);
      ASSERT_TRUE(sim.obs.route);
      EXPECT_EQ(sim.obs.route->TotalWeight(), 100);
      EXPECT_GE(sim.RoutedReady(), k) << "k=" << k << " round " << rounds;
      sim.Settle();
    }
    EXPECT_LT(rounds, 60);
    EXPECT_TRUE(started);
    EXPECT_TRUE(finished);
    ASSERT_EQ(sim.obs.revisions.size(), 1u);
    EXPECT_EQ(sim.obs.revisions.begin()->first, d2);
    EXPECT_EQ(sim.obs.revisions.begin()->second.Ready(), k);
    EXPECT_EQ(sim.obs.route->targets,
              (std::vector<WeightedTarget>{{d2, 100, RevisionRole::kDefault}}));
  }
}

TEST(ReconcileTest, RollingUpdateFromZeroIsPureSwap) {
  Sim sim;
  auto s = Spec("file:///m/a");
  sim.Converge(s);
  // Scaled to zero by the autoscaler.
  for (auto& [id, rev] : sim.obs.revisions) {
    rev.replicas.clear();
    rev.scaled_to_zero = true;
  }
  s.default_predictor = Pred("file:///m/b");
  const RevisionId d2 = RevisionHash(s.default_predictor);
  std::size_t creates = 0;
  for (const auto& p : sim.Converge(s)) {
    EXPECT_EQ(p.Count(Kind::kDrainReplica), 0u);
    EXPECT_EQ(p.Count(Kind::kStopReplica), 0u);
    creates += p.Count(Kind::kCreateReplica);
  }
  EXPECT_EQ(creates, 1u);  // initialScale for the new revision only
  EXPECT_EQ(sim.obs.route->targets,
            (std::vector<WeightedTarget>{{d2, 100, RevisionRole::kDefault}}));
  EXPECT_EQ(sim.obs.revisions.size(), 1u);
}

TEST(ReconcileTest, AutoscaledToZeroStaysAtZero) {
  Sim sim;
  auto s = Spec("file:///m/a");
  sim.Converge(s);
  for (auto& [id, rev] : sim.obs.revisions) {
    rev.replicas.clear();
    rev.scaled_to_zero = true;
  }
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
  for (auto& [id, rev] : sim.obs.revisions) rev.scaled_to_zero = false;
  EXPECT_EQ(Reconcile(s, sim.obs).Count(Kind::kCreateReplica), 1u);
}

TEST(ReconcileTest, OldDefaultBecomesCanaryMidRollout) {
  Sim sim;
  auto s = Spec("file:///m/a", 2);
  sim.Converge(s);
  const RevisionId a = RevisionHash(s.default_predictor);
  s.default_predictor = Pred("file:///m/b");
  sim.Apply(Reconcile(s, sim.obs));  // starts the rollout
  sim.Settle();
  s.canary = Pred("file:///m/a");
  s.canary_traffic_percent = 20;
  sim.Converge(s);
  ASSERT_EQ(sim.obs.revisions.count(a), 1u);
  EXPECT_GE(sim.obs.revisions.at(a).Ready(), 1) << Dump(sim.obs);
  EXPECT_EQ(sim.obs.route->WeightOf(RevisionRole::kCanary), 20);
}

TEST(ReconcileTest, FailingRolloutTargetRollsBack) {
  Sim sim;
  auto s = Spec("file:///m/a", 2);
  sim.Converge(s);
  const ServiceRoute before = *sim.obs.route;
  s.default_predictor = Pred("file:///m/broken");
  const RevisionId bad = RevisionHash(s.default_predictor);
  sim.failing.insert(bad);

  int creates = 0;
  bool rollback = false;
  for (int i = 0; i < 60; ++i) {
    const ActionPlan p = Reconcile(s, sim.obs);
    if (p.empty()) break;
    rollback |= p.rollback_required;
    creates += static_cast<int>(p.Count(Kind::kCreateReplica));
    sim.Apply(p);
    EXPECT_GE(sim.RoutedReady(), 2);
    sim.Settle();
  }
  EXPECT_TRUE(rollback);
  EXPECT_EQ(creates, 3);  // maxFailures attempts
  EXPECT_EQ(*sim.obs.route, before);
  EXPECT_EQ(sim.obs.revisions.count(bad), 0u);
  EXPECT_FALSE(sim.obs.rollout);
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
}

TEST(ReconcileTest, PipelineChangeIsConfigured) {
  Sim sim;
  auto s = Spec("file:///m/a");
  sim.Converge(s);
  s.transformer = ComponentSpec{"scale", {{"factor", "0.5"}}};
  const ActionPlan p = Reconcile(s, sim.obs);
  ASSERT_EQ(p.actions.size(), 1u);
  EXPECT_EQ(p.actions[0].kind, Kind::kConfigurePipeline);
  sim.Apply(p);
  EXPECT_TRUE(Reconcile(s, sim.obs).empty());
}

TEST(ReconcileTest, ShadowIsRegisteredButNotWeighted) {
  Sim sim;
  auto s = Spec("file:///m/a");
  s.shadow = Pred("file:///m/s");
  sim.Converge(s);
  const RevisionId sh = RevisionHash(*s.shadow);
  ASSERT_TRUE(sim.obs.route);
  EXPECT_EQ(sim.obs.route->shadow, sh);
  EXPECT_EQ(sim.obs.route->TotalWeight(), 100);
  for (const auto& t : sim.obs.route->targets) EXPECT_NE(t.revision, sh);
  EXPECT_EQ(sim.obs.revisions.at(sh).revision.role, RevisionRole::kShadow);
}

TEST(ReconcileTest, DeleteTearsDownEverything) {
  Sim sim;
  auto s = Spec("file:///m/a", 2);
  s.canary = Pred("file:///m/b");
  s.canary_traffic_percent = 30;
  sim.Converge(s);
  const ActionPlan p = ReconcileDelete(sim.obs);
  EXPECT_EQ(p.Count(Kind::kRemoveRevision), 2u);
  EXPECT_EQ(p.Count(Kind::kDrainReplica), 4u);  // initialScale each
  EXPECT_EQ(IndexOf(p, Kind::kSwapRoutingTable), 0);
  sim.Apply(p);
  EXPECT_FALSE(sim.obs.route);
  EXPECT_TRUE(sim.obs.revisions.empty());
}

TEST(ReconcileTest, GitOpsReplayReturnsToSameFixedPoint) {
  Sim sim;
  const auto v1 = Spec("file:///m/a", 2);
  auto v2 = v1;
  v2.canary = Pred("file:///m/b");
  v2.canary_traffic_percent = 20;
  v2.default_predictor = Pred("file:///m/c");

  sim.Converge(v1);
  const ServiceRoute route1 = *sim.obs.route;
  std::set<RevisionId> revs1;
  for (const auto& [id, r] : sim.obs.revisions) revs1.insert(id);

  EXPECT_TRUE(sim.Converge(v1).empty());  // identical re-apply
  sim.Converge(v2);
  sim.Converge(v1);
  std::set<RevisionId> revs2;
  for (const auto& [id, r] : sim.obs.revisions) revs2.insert(id);
  EXPECT_EQ(revs1, revs2);
  EXPECT_EQ(*sim.obs.route, route1);
  EXPECT_EQ(sim.obs.revisions.begin()->second.Ready(), 2);
}

InferenceServiceSpec RandomSpec(std::mt19937_64& rng) {
  const std::vector<std::string> uris = {"file:///m/a", "file:///m/b", "file:///m/c",
                                         "file:///m/d"};
  auto pick = [&] { return uris[std::uniform_int_distribution<std::size_t>(0, 3)(rng)]; };
  auto s = Spec(pick(), std::uniform_int_distribution<int>(1, 3)(rng));
  if (rng() % 2) {
    s.canary = Pred(pick());
    s.canary_traffic_percent = std::uniform_int_distribution<int>(0, 100)(rng);
  }
  if (rng() % 3 == 0) s.shadow = Pred(pick());
  if (rng() % 4 == 0) s.transformer = ComponentSpec{"identity", {}};
  return s;
}

// From arbitrary interleavings of spec changes and partial progress, the
// loop reaches a fixed point matching the last spec.
TEST(ReconcileProperty, ConvergesToLastSpec) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Sim sim;
    InferenceServiceSpec s;
    for (int change = 0; change < 4; ++change) {
      s = RandomSpec(rng);
      const int partial = std::uniform_int_distribution<int>(0, 4)(rng);
      for (int i = 0; i < partial; ++i) {
        const ActionPlan p = Reconcile(s, sim.obs);
        sim.Apply(p);
        if (sim.obs.route) ASSERT_EQ(sim.obs.route->TotalWeight(), 100) << trial;
        sim.Settle();
      }
    }
    sim.Converge(s);
    ASSERT_TRUE(Reconcile(s, sim.obs).empty()) << "trial " << trial << "\n" << Dump(sim.obs);

    const RevisionId d = RevisionHash(s.default_predictor);
    std::set<RevisionId> want = {d};
    if (s.canary) want.insert(RevisionHash(*s.canary));
    if (s.shadow) want.insert(RevisionHash(*s.shadow));
    std::set<RevisionId> got;
    for (const auto& [id, r] : sim.obs.revisions) {
      got.insert(id);
      EXPECT_GE(r.Ready(), 1) << "trial " << trial << "\n" << Dump(sim.obs);
    }
    EXPECT_EQ(got, want) << "trial " << trial;
    ASSERT_TRUE(sim.obs.route);
    EXPECT_EQ(sim.obs.route->TotalWeight(), 100);
    EXPECT_EQ(sim.obs.route->WeightOf(RevisionRole::kDefault),
              100 - (s.canary && RevisionHash(*s.canary) != d ? s.canary_traffic_percent : 0))
        << "trial " << trial;
    EXPECT_FALSE(sim.obs.rollout);
  }
}

TEST(PromoteCanaryTest, CanaryBecomesDefault) {
  auto s = Spec("gs://kfserving-samples/models/tensorflow/flowers");
  s.canary = Pred("gs://kfserving-samples/models/tensorflow/flowers-2");
  s.canary_traffic_percent = 10;
  const auto p = PromoteCanary(s);
  EXPECT_EQ(p.default_predictor.storage_uri, "gs://kfserving-samples/models/tensorflow/flowers-2");
  EXPECT_FALSE(p.canary);
  EXPECT_EQ(p.canary_traffic_percent, 0);
  EXPECT_EQ(RevisionHash(p.default_predictor), RevisionHash(*s.canary));
  try {
    PromoteCanary(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNoCanary);
  }
}

TEST(PromoteCanaryTest, PromotedCanaryKeepsItsReplicas) {
  Sim sim;
  auto s = Spec("file:///m/a");
  s.canary = Pred("file:///m/b");
  s.canary_traffic_percent = 10;
  sim.Converge(s);
  const RevisionId c = RevisionHash(*s.canary);
  const std::string canary_replica = sim.obs.revisions.at(c).replicas.at(0).id;
  const auto promoted = PromoteCanary(s);
  for (const auto& p : sim.Converge(promoted)) {
    for (const auto& a : p.actions) {
      if (a.kind == Kind::kDrainReplica || a.kind == Kind::kStopReplica) {
        EXPECT_NE(a.replica, canary_replica);
      }
    }
  }
  EXPECT_EQ(sim.obs.route->targets.size(), 1u);
  EXPECT_EQ(sim.obs.route->targets[0].revision, c);
  EXPECT_EQ(sim.obs.route->targets[0].weight, 100);
}

ObservedService ScaledService(const std::vector<int>& loads, RevisionId& id) {
  ObservedService o;
  o.name = "svc";
  id = RevisionHash(Pred("file:///m/a"));
  ObservedRevision r;
  r.revision = Revision{id, "svc", RevisionRole::kDefault, Pred("file:///m/a")};
  for (std::size_t i = 0; i < loads.size(); ++i) {
    r.replicas.push_back({"r" + std::to_string(i), ReplicaState::kReady, loads[i]});
  }
  o.revisions[id] = r;
  return o;
}

TEST(ApplyScaleTest, ScaleUpCreatesDifference) {
  RevisionId id;
  const auto o = ScaledService({0, 0}, id);
  const ActionPlan p = ApplyScale({id, 5}, o);
  EXPECT_EQ(p.actions.size(), 3u);
  EXPECT_EQ(p.Count(Kind::kCreateReplica), 3u);
}

TEST(ApplyScaleTest, ScaleDownDrainsLeastLoaded) {
  RevisionId id;
  const auto o = ScaledService({5, 1, 3}, id);
  const ActionPlan p = ApplyScale({id, 1}, o);
  ASSERT_EQ(p.actions.size(), 2u);
  std::set<std::string> drained;
  for (const auto& a : p.actions) {
    EXPECT_EQ(a.kind, Kind::kDrainReplica);
    drained.insert(a.replica);
  }
  EXPECT_EQ(drained, (std::set<std::string>{"r1", "r2"}));
}

TEST(ApplyScaleTest, StartingReplicasAreStoppedFirst) {
  RevisionId id;
  auto o = ScaledService({0, 0}, id);
  o.revisions[id].replicas.push_back({"r9", ReplicaState::kInitializing, 0});
  const ActionPlan p = ApplyScale({id, 2}, o);
  ASSERT_EQ(p.actions.size(), 1u);
  EXPECT_EQ(p.actions[0].kind, Kind::kStopReplica);
  EXPECT_EQ(p.actions[0].replica, "r9");
}

TEST(ApplyScaleTest, ZeroRequiresAuthorization) {
  RevisionId id;
  const auto o = ScaledService({0}, id);
  try {
    ApplyScale({id, 0, false}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kPlanRejected);
  }
  EXPECT_EQ(ApplyScale({id, 0, true}, o).Count(Kind::kDrainReplica), 1u);
}

TEST(ApplyScaleTest, UnknownRevision) {
  RevisionId id;
  const auto o = ScaledService({0}, id);
  try {
    ApplyScale({RevisionId{id.value + 1}, 2}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kRevisionNotFound);
  }
}

TEST(ApplyScaleTest, NoOpAtCurrentSize) {
  RevisionId id;
  const auto o = ScaledService({2, 2}, id);
  EXPECT_TRUE(ApplyScale({id, 2}, o).empty());
}

TEST(SplitPercentTest, Examples) {
  EXPECT_EQ(SplitPercent(100, {1, 1}), (std::vector<int>{50, 50}));
  EXPECT_EQ(SplitPercent(100, {1, 1, 1}), (std::vector<int>{34, 33, 33}));
  EXPECT_EQ(SplitPercent(90, {1, 3}), (std::vector<int>{23, 67}));
  EXPECT_EQ(SplitPercent(100, {0, 0}), (std::vector<int>{0, 0}));
  EXPECT_EQ(SplitPercent(0, {1, 2}), (std::vector<int>{0, 0}));
}

TEST(SplitPercentProperty, SumsAndStaysWithinOneOfExact) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const int total = std::uniform_int_distribution<int>(1, 100)(rng);
    std::vector<int> shares(std::uniform_int_distribution<std::size_t>(1, 6)(rng));
    for (auto& s : shares) s = std::uniform_int_distribution<int>(0, 9)(rng);
    if (std::all_of(shares.begin(), shares.end(), [](int s) { return s == 0; })) shares[0] = 1;
    const auto out = SplitPercent(total, shares);
    int sum = 0;
    int denom = 0;
    for (int s : shares) denom += s;
    for (std::size_t j = 0; j < out.size(); ++j) {
      sum += out[j];
      const double exact = static_cast<double>(total) * shares[j] / denom;
      EXPECT_LT(std::abs(out[j] - exact), 1.0);
    }
    EXPECT_EQ(sum, total);
  }
}

TEST(ReconcileOptionsTest, FromAnnotations) {
  const auto o = ReconcileOptions::FromAnnotations(
      {{"rollout.stepSize", "2"}, {"rollout.maxFailures", "5"}, {"autoscaling.initialScale", "0"}});
  EXPECT_EQ(o.step_size, 2);
  EXPECT_EQ(o.max_failures, 5);
  EXPECT_EQ(o.initial_scale, 0);
  const auto d = ReconcileOptions::FromAnnotations({});
  EXPECT_EQ(d.step_size, 1);
  EXPECT_EQ(d.max_failures, 3);
  EXPECT_EQ(d.initial_scale, 1);
}

}  // namespace
}  // namespace miniserve

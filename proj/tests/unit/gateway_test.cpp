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

#include "miniserve/gateway.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "miniserve/error.hpp"
#include "test_support.hpp"

namespace miniserve {
namespace {

using namespace std::chrono_literals;

const RevisionId kDefault{0xd};
const RevisionId kCanary{0xc};

ServiceRoute Split(int canary_percent) {
  ServiceRoute r;
  r.targets.push_back({kDefault, 100 - canary_percent, RevisionRole::kDefault});
  if (canary_percent > 0) r.targets.push_back({kCanary, canary_percent, RevisionRole::kCanary});
  return r;
}

std::vector<std::size_t> Picks(const std::vector<WeightedTarget>& targets, int n) {
  SwrrState st;
  std::vector<std::size_t> out;
  for (int i = 0; i < n; ++i) out.push_back(SwrrPick(targets, st));
  return out;
}

TEST(SwrrTest, TenPercentOfFirstHundred) {
  const auto picks = Picks(Split(10).targets, 100);
  EXPECT_EQ(std::count(picks.begin(), picks.end(), 1u), 10);
}

TEST(SwrrTest, ZeroAndFullWeight) {
  auto none = Picks(Split(0).targets, 100);
  EXPECT_EQ(std::count(none.begin(), none.end(), 0u), 100);
  ServiceRoute full;
  full.targets = {{kDefault, 0, RevisionRole::kDefault}, {kCanary, 100, RevisionRole::kCanary}};
  auto all = Picks(full.targets, 100);
  EXPECT_EQ(std::count(all.begin(), all.end(), 1u), 100);
}

TEST(SwrrPropertyTest, EverySlidingWindowOfHundredIsExact) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    // Random weights over 1..4 targets summing to 100.
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<int> cuts;
    for (int i = 0; i < k - 1; ++i) cuts.push_back(static_cast<int>(rng() % 101));
    cuts.push_back(0);
    cuts.push_back(100);
    std::sort(cuts.begin(), cuts.end());
    std::vector<WeightedTarget> targets;
    for (int i = 0; i < k; ++i) {
      targets.push_back({RevisionId{static_cast<std::uint64_t>(i + 1)}, cuts[i + 1] - cuts[i],
                         RevisionRole::kDefault});
    }
    const auto picks = Picks(targets, 600);
    for (std::size_t start = 0; start + 100 <= picks.size(); start += 7) {
      std::vector<int> counts(targets.size(), 0);
      for (std::size_t i = start; i < start + 100; ++i) ++counts[picks[i]];
      for (std::size_t t = 0; t < targets.size(); ++t) {
        ASSERT_EQ(counts[t], targets[t].weight) << "trial " << trial << " start " << start;
      }
    }
  }
}

TEST(RouterTest, RoutesAndSetsRevision) {
  Router router;
  router.Swap({{"flowers", Split(10)}});
  int canary = 0;
  for (int i = 0; i < 1000; ++i) {
    RequestEnvelope env;
    env.service = "flowers";
    const RevisionId rev = router.Route(env);
    ASSERT_TRUE(env.routed_revision.has_value());
    EXPECT_EQ(*env.routed_revision, rev);
    canary += rev == kCanary;
  }
  EXPECT_EQ(canary, 100);
}

TEST(RouterTest, UnknownService) {
  Router router;
  RequestEnvelope env;
  env.service = "nope";
  try {
    router.Route(env);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownService);
  }
}

TEST(RouterTest, ShadowLookup) {
  Router router;
  ServiceRoute r = Split(0);
  r.shadow = RevisionId{0x5};
  router.Swap({{"svc", r}});
  EXPECT_EQ(router.ShadowOf("svc"), RevisionId{0x5});
  EXPECT_FALSE(router.ShadowOf("other").has_value());
}

TEST(RouterTest, SwapsAreAtomicForReaders) {
  Router router;
  router.Swap({{"a", Split(10)}, {"b", Split(10)}});
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!stop) {
      const auto table = router.Snapshot();
      // Writers only ever publish tables where a and b share one split.
      if (table->at("a").WeightOf(RevisionRole::kCanary) !=
          table->at("b").WeightOf(RevisionRole::kCanary)) {
        ++bad;
      }
    }
  });
  for (int i = 0; i < 2000; ++i) {
    const int p = i % 101;
    router.Swap({{"a", Split(p)}, {"b", Split(p)}});
  }
  stop = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(CheckRouteTest, WeightsMustSumToHundred) {
  EXPECT_EQ(CheckRoute(Split(10)), "");
  ServiceRoute r = Split(10);
  r.targets[0].weight = 80;
  EXPECT_NE(CheckRoute(r), "");
}

StatSample Load(int in_flight, int queued = 0) {
  StatSample s;
  s.in_flight = in_flight;
  s.queued = queued;
  return s;
}

TEST(PickReplicaTest, StrictMinimum) {
  std::size_t cursor = 0;
  EXPECT_EQ(PickReplica({Load(0), Load(1)}, cursor), 0u);
  cursor = 0;
  EXPECT_EQ(PickReplica({Load(2), Load(1, 0), Load(0, 2)}, cursor), 1u);
}

TEST(PickReplicaTest, TiesAlternate) {
  std::size_t cursor = 0;
  const std::vector<StatSample> c = {Load(1), Load(1)};
  const std::size_t first = PickReplica(c, cursor);
  const std::size_t second = PickReplica(c, cursor);
  EXPECT_NE(first, second);
  EXPECT_EQ(PickReplica(c, cursor), first);
}

TEST(PickReplicaTest, SingleCandidate) {
  std::size_t cursor = 3;
  EXPECT_EQ(PickReplica({Load(9)}, cursor), 0u);
}

class ActivatorTest : public ::testing::Test {
 protected:
  RequestEnvelope Env(std::uint64_t id) {
    RequestEnvelope env;
    env.id = id;
    env.service = "svc";
    env.arrival = clock_.Now();
    return env;
  }
  VirtualClock clock_;
};

TEST_F(ActivatorTest, BuffersThenReleasesFifo) {
  std::vector<int> changes;
  ActivatorQueue q(kDefault, {}, clock_, [&](int n) { changes.push_back(n); });
  std::vector<std::uint64_t> released;
  for (std::uint64_t i = 1; i <= 3; ++i) {
    RequestEnvelope env = Env(i);
    ResponseCallback done = [](InferenceResponse) {};
    std::size_t cursor = 0;
    const ForwardDecision d = AdmitOrBuffer(env, done, {}, q, cursor, clock_.Now());
    EXPECT_EQ(d.kind, ForwardDecision::Kind::kBuffered);
  }
  EXPECT_EQ(q.size(), 3u);
  clock_.RunUntil(3s);
  while (auto e = q.PopFront()) released.push_back(e->env.id);
  EXPECT_EQ(released, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(changes, (std::vector<int>{1, 2, 3, 2, 1, 0}));
  clock_.RunAll();
  EXPECT_EQ(q.timed_out(), 0u);
  EXPECT_EQ(q.forwarded(), 3u);
}

TEST_F(ActivatorTest, TimeoutRejectsOnce) {
  ActivatorQueue q(kDefault, {10, 30s}, clock_);
  std::vector<InferenceResponse> out;
  RequestEnvelope env = Env(1);
  ResponseCallback done = [&](InferenceResponse r) { out.push_back(r); };
  std::size_t cursor = 0;
  AdmitOrBuffer(env, done, {}, q, cursor, clock_.Now());
  clock_.RunUntil(40s);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].status, ResponseStatus::kActivationTimeout);
  EXPECT_EQ(HttpStatusFor(out[0].status), 503);
  EXPECT_FALSE(q.PopFront().has_value());
}

TEST_F(ActivatorTest, FullBufferRejects) {
  ActivatorQueue q(kDefault, {1, 30s}, clock_);
  std::size_t cursor = 0;
  RequestEnvelope a = Env(1), b = Env(2);
  ResponseCallback da = [](InferenceResponse) {}, db = [](InferenceResponse) {};
  EXPECT_EQ(AdmitOrBuffer(a, da, {}, q, cursor, 0us).kind, ForwardDecision::Kind::kBuffered);
  const ForwardDecision d = AdmitOrBuffer(b, db, {}, q, cursor, 0us);
  EXPECT_EQ(d.kind, ForwardDecision::Kind::kRejected);
  EXPECT_EQ(d.reason, ResponseStatus::kBufferFull);
  EXPECT_EQ(HttpStatusFor(d.reason), 429);
  EXPECT_TRUE(db != nullptr);  // ownership stays with the caller on rejection
}

TEST_F(ActivatorTest, ConservationUnderRandomReleases) {
  std::mt19937_64 rng(2);
  ActivatorQueue q(kDefault, {1000, 5s}, clock_);
  std::map<std::uint64_t, int> outcomes;
  std::uint64_t forwarded = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    clock_.ScheduleAt(Duration(static_cast<std::int64_t>(rng() % 60000000)), [&, i] {
      RequestEnvelope env = Env(i);
      ResponseCallback done = [&, i](InferenceResponse) { ++outcomes[i]; };
      std::size_t cursor = 0;
      AdmitOrBuffer(env, done, {}, q, cursor, clock_.Now());
    });
  }
  for (int k = 0; k < 30; ++k) {
    clock_.ScheduleAt(Duration(static_cast<std::int64_t>(rng() % 60000000)), [&] {
      const int n = static_cast<int>(rng() % 10);
      for (int j = 0; j < n; ++j) {
        auto e = q.PopFront();
        if (!e) break;
        ++forwarded;
        ++outcomes[e->env.id];
      }
    });
  }
  clock_.RunAll();
  EXPECT_EQ(outcomes.size(), 500u);
  for (const auto& [id, n] : outcomes) EXPECT_EQ(n, 1) << id;
  EXPECT_EQ(q.forwarded() + q.timed_out(), 500u);
  EXPECT_EQ(q.forwarded(), forwarded);
  EXPECT_GT(q.timed_out(), 0u);
}

}  // namespace
}  // namespace miniserve

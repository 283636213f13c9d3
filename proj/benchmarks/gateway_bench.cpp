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

#include <benchmark/benchmark.h>

#include "miniserve/gateway.hpp"
#include "miniserve/request.hpp"

namespace miniserve {
namespace {

void BM_SwrrPick(benchmark::State& state) {
  std::vector<WeightedTarget> targets;
  const int n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) {
    targets.push_back({RevisionId{static_cast<std::uint64_t>(i + 1)}, 0, RevisionRole::kDefault});
  }
  for (int i = 0; i < 100; ++i) targets[static_cast<std::size_t>(i % n)].weight += 1;
  SwrrState s;
  for (auto _ : state) benchmark::DoNotOptimize(SwrrPick(targets, s));
}
BENCHMARK(BM_SwrrPick)->Arg(1)->Arg(2)->Arg(8);

void BM_RouterRoute(benchmark::State& state) {
  Router router;
  RoutingTable table;
  table["svc"] = ServiceRoute{{{RevisionId{1}, 90, RevisionRole::kDefault},
                               {RevisionId{2}, 10, RevisionRole::kCanary}},
                              std::nullopt};
  router.Swap(table);
  RequestEnvelope env;
  env.service = "svc";
  for (auto _ : state) benchmark::DoNotOptimize(router.Route(env));
}
BENCHMARK(BM_RouterRoute);

}  // namespace
}  // namespace miniserve

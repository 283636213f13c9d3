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

#include "miniserve/autoscaler.hpp"

namespace miniserve {
namespace {

// Window holding `range(0)` sources reporting every second for 60 s.
void BM_WindowAverage(benchmark::State& state) {
  MetricWindow w;
  const int sources = static_cast<int>(state.range(0));
  for (int t = 0; t < 60; ++t) {
    for (int s = 0; s < sources; ++s) {
      w.Record("r" + std::to_string(s), FromSeconds(t), (t + s) % 5);
    }
  }
  const Timestamp now = FromSeconds(60);
  for (auto _ : state) {
    benchmark::DoNotOptimize(w.Average(FromSeconds(60), now));
    benchmark::DoNotOptimize(w.Average(FromSeconds(6), now));
  }
}
BENCHMARK(BM_WindowAverage)->Arg(1)->Arg(10)->Arg(50);

}  // namespace
}  // namespace miniserve

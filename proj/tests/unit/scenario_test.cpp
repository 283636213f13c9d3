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
#include <cmath>
#include <random>

#include "miniserve/error.hpp"
#include "miniserve/scenario.hpp"
#include "test_support.hpp"

namespace miniserve {
namespace {

Errc ParseCode(const std::string& yaml) {
  try {
    Scenario::Parse(yaml, ".");
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error for:\n" << yaml;
  return Errc::kAssertionFailed;
}

TEST(ScenarioParseTest, Fields) {
  const Scenario s = Scenario::Parse(R"(
name: demo
seed: 4
clock: virtual
services: [specs/a.yaml]
platform: {payloadSink: memory, payloadCapacity: 8}
workload:
  - {pattern: poisson, rate: 3, duration: 10, start: 2, service: a, instances: [[1, 2]]}
actions:
  - {at: 5, apply: specs/b.yaml}
  - {at: 6, promote: a}
  - {at: 7, delete: a}
settle: 3
assertions:
  - {path: /services/a/requests/ok, min: 1, max: 40}
  - {path: /scenario, equals: demo}
)",
                                     "/base");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.seed, 4u);
  EXPECT_TRUE(s.virtual_clock);
  ASSERT_EQ(s.services.size(), 1u);
  EXPECT_EQ(s.services[0], std::filesystem::path("/base/specs/a.yaml"));
  EXPECT_EQ(s.payload_sink, PayloadSinkKind::kMemory);
  EXPECT_EQ(s.payload_capacity, 8u);
  ASSERT_EQ(s.workload.size(), 1u);
  EXPECT_EQ(s.workload[0].arrivals.pattern, ArrivalPattern::kPoisson);
  EXPECT_EQ(s.workload[0].instances, (Instances{{1.0, 2.0}}));
  ASSERT_EQ(s.actions.size(), 3u);
  EXPECT_EQ(s.actions[1].kind, TimedAction::Kind::kPromote);
  EXPECT_EQ(s.actions[2].target, "a");
  EXPECT_EQ(s.assertions.size(), 2u);
  EXPECT_EQ(s.EndTime(), FromSeconds(15));
}

TEST(ScenarioParseTest, Errors) {
  EXPECT_EQ(ParseCode("name: [unterminated"), Errc::kMalformedDocument);
  EXPECT_EQ(ParseCode("name: x\nbogus: 1\n"), Errc::kUnknownField);
  EXPECT_EQ(ParseCode("clock: wall\n"), Errc::kMalformedDocument);
  EXPECT_EQ(ParseCode("workload:\n  - {pattern: constant, rate: 1, duration: 0, service: a}\n"),
            Errc::kInvalidArgument);
  EXPECT_EQ(ParseCode("workload:\n  - {pattern: constant, rate: 1, duration: 1}\n"),
            Errc::kMalformedDocument);
  EXPECT_EQ(ParseCode("workload:\n  - {pattern: zigzag, rate: 1, duration: 1, service: a}\n"),
            Errc::kInvalidArgument);
  EXPECT_EQ(ParseCode("actions:\n  - {at: 1}\n"), Errc::kMalformedDocument);
  EXPECT_EQ(ParseCode("assertions:\n  - {path: services, min: 1}\n"), Errc::kMalformedDocument);
}

double RankOracle(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  // Smallest value with at least q*n values <= it.
  for (double x : v) {
    const auto le = std::count_if(v.begin(), v.end(), [x](double y) { return y <= x; });
    if (static_cast<double>(le) >= q * static_cast<double>(v.size())) return x;
  }
  return v.back();
}

TEST(NearestRankTest, Examples) {
  const std::vector<double> v = {15, 20, 35, 40, 50};
  EXPECT_EQ(NearestRank(v, 0.05), 15);
  EXPECT_EQ(NearestRank(v, 0.30), 20);
  EXPECT_EQ(NearestRank(v, 0.40), 20);
  EXPECT_EQ(NearestRank(v, 0.50), 35);
  EXPECT_EQ(NearestRank(v, 1.00), 50);
  EXPECT_EQ(NearestRank({}, 0.5), 0);
}

TEST(NearestRankTest, MatchesCountingOracle) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = static_cast<double>(rng() % 20);
    std::sort(v.begin(), v.end());
    for (double q : {0.01, 0.25, 0.5, 0.9, 0.95, 0.99, 1.0}) {
      EXPECT_EQ(NearestRank(v, q), RankOracle(v, q)) << "n=" << v.size() << " q=" << q;
    }
  }
}

TEST(CheckAssertionsTest, Bounds) {
  const nlohmann::json report = {{"a", {{"b", 5}}}, {"name", "x"}};
  EXPECT_TRUE(CheckAssertions({{"/a/b", 5.0, 5.0, std::nullopt}}, report).empty());
  EXPECT_TRUE(CheckAssertions({{"/a/b", std::nullopt, std::nullopt, 5.0}}, report).empty());
  EXPECT_TRUE(CheckAssertions({{"/name", std::nullopt, std::nullopt, "x"}}, report).empty());
  EXPECT_EQ(CheckAssertions({{"/a/b", 6.0, std::nullopt, std::nullopt}}, report).size(), 1u);
  EXPECT_EQ(CheckAssertions({{"/a/b", std::nullopt, 4.0, std::nullopt}}, report).size(), 1u);
  EXPECT_EQ(CheckAssertions({{"/a/c", 0.0, std::nullopt, std::nullopt}}, report).size(), 1u);
  EXPECT_EQ(CheckAssertions({{"/name", 0.0, std::nullopt, std::nullopt}}, report).size(), 1u);
  EXPECT_EQ(CheckAssertions({{"/name", std::nullopt, std::nullopt, "y"}}, report).size(), 1u);
}

// Minimal service backed by a fixed-latency sleep model.
struct SmokeFixture {
  SmokeFixture(const std::string& clock, double rate, double seconds) {
    testing::WriteFile(dir / "models/s/server.json", testing::SleepServer(5));
    testing::WriteFile(dir / "svc.yaml", R"(apiVersion: miniserve/v1
kind: InferenceService
metadata:
  name: smoke
  annotations:
    autoscaling.minReplicas: "1"
    autoscaling.containerConcurrency: "4"
spec:
  default:
    predictor:
      sleep:
        storageUri: file://models/s
)");
    testing::WriteFile(dir / "scenario.yaml",
                       "name: smoke\nseed: 3\nclock: " + clock +
                           "\nservices: [svc.yaml]\nworkload:\n"
                           "  - {pattern: constant, rate: " + std::to_string(rate) +
                           ", duration: " + std::to_string(seconds) +
                           ", start: 0.5, service: smoke}\nsettle: 1\n"
                           "assertions:\n  - {path: /services/smoke/errors/total, equals: 0}\n");
  }
  testing::TempDir dir;
};

TEST(RunScenarioTest, VirtualRunsAreDeterministic) {
  SmokeFixture f("virtual", 50, 5);
  const Scenario s = Scenario::Load(f.dir / "scenario.yaml");
  const auto a = RunScenario(s);
  const auto b = RunScenario(s);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a.at("/services/smoke/requests/ok"_json_pointer), 250);
  EXPECT_FALSE(a.contains("assertions") && !a["assertions"].empty()) << a["assertions"].dump();
  const auto c = RunScenario(s, 99);
  EXPECT_EQ(c.at("/services/smoke/requests/ok"_json_pointer), 250);
}

TEST(RunScenarioTest, ShippedScenariosAreDeterministic) {
  for (const char* name : {"a2_cold_start.yaml", "a5_canary_split.yaml"}) {
    const Scenario s = Scenario::Load(testing::SourcePath(std::string("scenarios/") + name));
    EXPECT_EQ(RunScenario(s).dump(), RunScenario(s).dump()) << name;
  }
}

TEST(RunScenarioTest, RealClockAgreesWithVirtualOnCounts) {
  SmokeFixture real("real", 20, 1);
  SmokeFixture virt("virtual", 20, 1);
  const auto r = RunScenario(Scenario::Load(real.dir / "scenario.yaml"));
  const auto v = RunScenario(Scenario::Load(virt.dir / "scenario.yaml"));
  for (const char* p : {"/services/smoke/requests/submitted", "/services/smoke/requests/ok",
                        "/services/smoke/errors/total"}) {
    EXPECT_EQ(r.at(nlohmann::json::json_pointer(p)), v.at(nlohmann::json::json_pointer(p))) << p;
  }
  EXPECT_EQ(r.at("/services/smoke/requests/ok"_json_pointer), 20);
}

TEST(RunScenarioTest, ReportTableMentionsServices) {
  SmokeFixture f("virtual", 10, 1);
  const auto report = RunScenario(Scenario::Load(f.dir / "scenario.yaml"));
  const std::string table = RenderReportTable(report);
  EXPECT_NE(table.find("scenario smoke"), std::string::npos);
  EXPECT_NE(table.find("smoke"), std::string::npos);
}

}  // namespace
}  // namespace miniserve

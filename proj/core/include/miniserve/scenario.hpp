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

#ifndef MINISERVE_SCENARIO_HPP_
#define MINISERVE_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miniserve/loadgen.hpp"
#include "miniserve/platform.hpp"

namespace miniserve {

struct WorkloadPhase {
  ArrivalSpec arrivals;
  std::string service;
  Verb verb = Verb::kPredict;
  Instances instances = {{1.0}};
};

struct TimedAction {
  enum class Kind { kApply, kPromote, kDelete };
  Timestamp at{0};
  Kind kind = Kind::kApply;
  std::string target;  // spec path for kApply, service name otherwise
};

// Bound on one report value addressed by a JSON pointer.
struct AssertionBound {
  std::string path;
  std::optional<double> min;
  std::optional<double> max;
  std::optional<nlohmann::json> equals;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  bool virtual_clock = true;
  std::filesystem::path base_dir;  // relative paths resolve here
  std::vector<std::filesystem::path> services;
  std::vector<WorkloadPhase> workload;
  std::vector<TimedAction> actions;
  Duration settle{0};
  std::vector<AssertionBound> assertions;

  PayloadSinkKind payload_sink = PayloadSinkKind::kNone;
  std::size_t payload_capacity = 1024;
  std::filesystem::path payload_path;
  double bandwidth_bytes_per_second = 100e6;
  bool record_exec = true;

  // Throws Error{kMalformedDocument | kInvalidArgument}.
  static Scenario Parse(std::string_view yaml, const std::filesystem::path& base_dir);
  static Scenario Load(const std::filesystem::path& path);

  // End of the last workload phase or timed action, plus settle.
  Timestamp EndTime() const;
};

// Runs the whole platform in-process and returns the report document. In
// virtual-clock mode the result is a pure function of (scenario, seed).
nlohmann::json RunScenario(const Scenario& scenario,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

// Violated bounds, one message each.
std::vector<std::string> CheckAssertions(const std::vector<AssertionBound>& bounds,
                                         const nlohmann::json& report);

// Human-readable summary table of a report.
std::string RenderReportTable(const nlohmann::json& report);

// Exact nearest-rank percentile of sorted values; 0 for an empty input.
double NearestRank(const std::vector<double>& sorted, double q);

}  // namespace miniserve

#endif  // MINISERVE_SCENARIO_HPP_

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

#ifndef MINISERVE_LOADGEN_HPP_
#define MINISERVE_LOADGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "miniserve/clock.hpp"

namespace miniserve {

enum class ArrivalPattern { kConstant, kPoisson, kBurst, kTraceFile };

std::string_view PatternName(ArrivalPattern p);
// Throws Error{kInvalidArgument}.
ArrivalPattern ParsePattern(std::string_view name);

struct ArrivalSpec {
  ArrivalPattern pattern = ArrivalPattern::kConstant;
  double rate = 0;  // requests per second
  Duration duration{0};
  Timestamp start{0};
  std::uint64_t seed = 0;
  // kBurst alternates `burst_on` at `rate` with `burst_off` of silence.
  Duration burst_on = std::chrono::seconds(1);
  Duration burst_off = std::chrono::seconds(1);
  std::filesystem::path trace_file;  // kTraceFile
};

using WorkloadTrace = std::vector<Timestamp>;

// Arrival times in [start, start + duration), ascending. Constant spacing is
// exact to the microsecond; poisson uses exponential gaps from a
// mt19937_64 seeded with `seed`. Throws Error{kInvalidArgument}.
WorkloadTrace GenerateArrivals(const ArrivalSpec& spec);

// One arrival offset in seconds per line ('#' comments allowed), shifted by
// `start`. Throws Error{kInvalidArgument} when offsets decrease.
WorkloadTrace LoadTraceFile(const std::filesystem::path& path, Timestamp start = Timestamp{0});

}  // namespace miniserve

#endif  // MINISERVE_LOADGEN_HPP_

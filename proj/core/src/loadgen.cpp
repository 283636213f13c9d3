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

#include "miniserve/loadgen.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "miniserve/error.hpp"

namespace miniserve {
namespace {

// Uniform in (0, 1], built from the top 53 bits so the sequence does not
// depend on the standard library's distribution implementations.
double UnitOpen(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::string_view PatternName(ArrivalPattern p) {
  switch (p) {
    case ArrivalPattern::kConstant: return "constant";
    case ArrivalPattern::kPoisson: return "poisson";
    case ArrivalPattern::kBurst: return "burst";
    case ArrivalPattern::kTraceFile: return "trace-file";
  }
  return "?";
}

ArrivalPattern ParsePattern(std::string_view name) {
  if (name == "constant") return ArrivalPattern::kConstant;
  if (name == "poisson") return ArrivalPattern::kPoisson;
  if (name == "burst") return ArrivalPattern::kBurst;
  if (name == "trace-file" || name == "trace") return ArrivalPattern::kTraceFile;
  throw Error(Errc::kInvalidArgument, "unknown arrival pattern: " + std::string(name));
}

WorkloadTrace GenerateArrivals(const ArrivalSpec& spec) {
  if (spec.pattern == ArrivalPattern::kTraceFile) {
    WorkloadTrace t = LoadTraceFile(spec.trace_file, spec.start);
    if (spec.duration > Duration::zero()) {
      while (!t.empty() && t.back() >= spec.start + spec.duration) t.pop_back();
    }
    return t;
  }
  if (!(spec.rate >= 0) || !std::isfinite(spec.rate)) {
    throw Error(Errc::kInvalidArgument, "rate must be a finite number >= 0");
  }
  if (spec.duration < Duration::zero()) {
    throw Error(Errc::kInvalidArgument, "duration must be >= 0");
  }
  WorkloadTrace out;
  if (spec.rate == 0 || spec.duration == Duration::zero()) return out;
  const std::int64_t end = spec.duration.count();

  switch (spec.pattern) {
    case ArrivalPattern::kConstant:
      for (std::int64_t k = 0;; ++k) {
        const auto off = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * 1e6 / spec.rate));
        if (off >= end) break;
        out.push_back(spec.start + Duration(off));
      }
      break;
    case ArrivalPattern::kPoisson: {
      std::mt19937_64 rng(spec.seed);
      double t = 0;
      for (;;) {
        t += -std::log(UnitOpen(rng)) / spec.rate;
        const auto off = static_cast<std::int64_t>(std::llround(t * 1e6));
        if (off >= end) break;
        out.push_back(spec.start + Duration(off));
      }
      break;
    }
    case ArrivalPattern::kBurst: {
      if (spec.burst_on <= Duration::zero() || spec.burst_off < Duration::zero()) {
        throw Error(Errc::kInvalidArgument, "burst phases must be positive");
      }
      const std::int64_t period = (spec.burst_on + spec.burst_off).count();
      for (std::int64_t phase = 0; phase < end; phase += period) {
        for (std::int64_t k = 0;; ++k) {
          const auto off = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * 1e6 / spec.rate));
          if (off >= spec.burst_on.count() || phase + off >= end) break;
          out.push_back(spec.start + Duration(phase + off));
        }
      }
      break;
    }
    case ArrivalPattern::kTraceFile:
      break;
  }
  return out;
}

WorkloadTrace LoadTraceFile(const std::filesystem::path& path, Timestamp start) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kInvalidArgument, "cannot read trace file " + path.string());
  WorkloadTrace out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    double seconds = 0;
    try {
      std::size_t used = 0;
      seconds = std::stod(line.substr(first), &used);
    } catch (const std::exception&) {
      throw Error(Errc::kInvalidArgument,
                  path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
    if (seconds < 0) {
      throw Error(Errc::kInvalidArgument, path.string() + ":" + std::to_string(lineno) +
                                              ": negative offset");
    }
    const Timestamp t = start + FromSeconds(seconds);
    if (!out.empty() && t < out.back()) {
      throw Error(Errc::kInvalidArgument, path.string() + ":" + std::to_string(lineno) +
                                              ": trace is not time-ordered");
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace miniserve

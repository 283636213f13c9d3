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

#ifndef MINISERVE_EVENT_LOG_HPP_
#define MINISERVE_EVENT_LOG_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "miniserve/clock.hpp"

namespace miniserve {

// Lifecycle transitions use the replica state names (Pending, Initializing,
// Ready, Draining, Stopped). ExecStart/ExecEnd bracket one breaker unit.
struct EventRecord {
  Timestamp t{0};
  std::string replica;
  std::string revision;
  std::string service;
  std::string event;
  std::string detail;  // failure cause, drain result, ...
  std::int64_t size = 0;  // requests in an ExecStart/ExecEnd unit

  bool IsLifecycle() const { return event != "ExecStart" && event != "ExecEnd"; }
};

// Append-only structured log. One JSON object per line when serialized.
class EventLog {
 public:
  explicit EventLog(bool record_exec = true) : record_exec_(record_exec) {}

  void Append(EventRecord record);
  bool record_exec() const { return record_exec_; }
  const std::vector<EventRecord>& records() const { return records_; }
  void Clear() { records_.clear(); }

  std::string ToNdjson(bool lifecycle_only = false) const;
  static std::string FormatRecord(const EventRecord& r);
  // Throws Error{kMalformedEventLog}.
  static std::vector<EventRecord> ParseNdjson(std::string_view text);

 private:
  bool record_exec_;
  std::vector<EventRecord> records_;
};

// Largest number of simultaneously executing units seen on any replica,
// obtained by replaying ExecStart/ExecEnd records in log order.
std::int64_t MaxConcurrentExecutions(const std::vector<EventRecord>& records);

}  // namespace miniserve

#endif  // MINISERVE_EVENT_LOG_HPP_

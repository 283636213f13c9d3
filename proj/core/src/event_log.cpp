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

#include "miniserve/event_log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <sstream>

#include "miniserve/error.hpp"

namespace miniserve {

void EventLog::Append(EventRecord record) {
  if (!record_exec_ && !record.IsLifecycle()) return;
  records_.push_back(std::move(record));
}

std::string EventLog::FormatRecord(const EventRecord& r) {
  nlohmann::json j;
  j["t"] = ToSeconds(r.t);
  j["replica"] = r.replica;
  j["revision"] = r.revision;
  j["service"] = r.service;
  j["event"] = r.event;
  if (!r.detail.empty()) j["detail"] = r.detail;
  if (!r.IsLifecycle()) j["size"] = r.size;
  return j.dump();
}

std::string EventLog::ToNdjson(bool lifecycle_only) const {
  std::string out;
  for (const auto& r : records_) {
    if (lifecycle_only && !r.IsLifecycle()) continue;
    out += FormatRecord(r);
    out.push_back('\n');
  }
  return out;
}

std::vector<EventRecord> EventLog::ParseNdjson(std::string_view text) {
  std::vector<EventRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EventRecord r;
      r.t = FromSeconds(j.at("t").get<double>());
      r.replica = j.at("replica").get<std::string>();
      r.revision = j.at("revision").get<std::string>();
      r.service = j.value("service", "");
      r.event = j.at("event").get<std::string>();
      r.detail = j.value("detail", "");
      r.size = j.value("size", std::int64_t{0});
      if (!out.empty() && r.t < out.back().t) {
        throw Error(Errc::kMalformedEventLog,
                    "line " + std::to_string(line_no) + ": timestamps go backwards");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kMalformedEventLog,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::int64_t MaxConcurrentExecutions(const std::vector<EventRecord>& records) {
  std::map<std::string, std::int64_t> running;
  std::int64_t peak = 0;
  for (const auto& r : records) {
    if (r.event == "ExecStart") {
      peak = std::max(peak, ++running[r.replica]);
    } else if (r.event == "ExecEnd") {
      --running[r.replica];
    }
  }
  return peak;
}

}  // namespace miniserve

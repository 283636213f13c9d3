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

#ifndef MINISERVE_TELEMETRY_HPP_
#define MINISERVE_TELEMETRY_HPP_

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "miniserve/clock.hpp"
#include "miniserve/event_log.hpp"

namespace miniserve {

using Labels = std::map<std::string, std::string>;

struct HistogramSnapshot {
  std::vector<double> bounds;           // upper bounds, +Inf implied
  std::vector<std::uint64_t> counts;    // per bucket, bounds.size() + 1
  std::uint64_t count = 0;
  double sum = 0;

  // Linear interpolation inside the bucket holding the q-th observation.
  double Quantile(double q) const;
};

// Counters, gauges and fixed-bucket histograms keyed by name + label set.
// Safe for concurrent use.
class MetricsRegistry {
 public:
  enum class Type { kCounter, kGauge, kHistogram };

  // 1 ms .. ~65 s in 2x steps, in seconds.
  static std::vector<double> LatencyBuckets();
  static std::vector<double> SizeBuckets();
  // Registry pre-populated with the platform's metric families.
  static std::unique_ptr<MetricsRegistry> WithPlatformMetrics();

  void RegisterCounter(const std::string& name, const std::string& help);
  void RegisterGauge(const std::string& name, const std::string& help);
  void RegisterHistogram(const std::string& name, const std::string& help,
                         std::vector<double> bounds = LatencyBuckets());

  // Counter: add; gauge: set; histogram: observe. Throws Error{kUnknownMetric}.
  void Observe(const std::string& name, double value, const Labels& labels = {});
  void Increment(const std::string& name, const Labels& labels = {}, double by = 1);
  void Set(const std::string& name, double value, const Labels& labels = {});

  double Value(const std::string& name, const Labels& labels = {}) const;
  // Sum over every label set of a counter or gauge family.
  double Total(const std::string& name) const;
  HistogramSnapshot Histogram(const std::string& name, const Labels& labels = {}) const;
  bool Has(const std::string& name) const;

  // Text exposition, families sorted by name, series by labels.
  std::string Render() const;

 private:
  struct Series {
    double value = 0;
    HistogramSnapshot hist;
  };
  struct Family {
    Type type;
    std::string help;
    std::vector<double> bounds;
    std::map<Labels, Series> series;
  };
  Family& Lookup(const std::string& name);
  const Family& Lookup(const std::string& name) const;
  void Register(const std::string& name, Type type, const std::string& help,
                std::vector<double> bounds);

  mutable std::mutex mu_;
  std::map<std::string, Family> families_;
};

struct PayloadRecord {
  std::uint64_t request_id = 0;
  std::string service;
  std::string revision;
  Timestamp timestamp{0};
  nlohmann::json request;
  nlohmann::json response;  // null on error
  std::string error;
  Duration latency{0};

  std::string ToJsonLine() const;
};

// Destination for payload records. Write returns false when the sink cannot
// take the record right now; the logger keeps it and retries later.
class PayloadSink {
 public:
  virtual ~PayloadSink() = default;
  virtual bool Write(const std::string& line) = 0;
};

class FilePayloadSink final : public PayloadSink {
 public:
  explicit FilePayloadSink(const std::filesystem::path& path);
  bool Write(const std::string& line) override;

 private:
  std::ofstream out_;
};

class MemoryPayloadSink final : public PayloadSink {
 public:
  bool Write(const std::string& line) override;
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
};

// Never accepts a record; models a wedged downstream consumer.
class StalledPayloadSink final : public PayloadSink {
 public:
  bool Write(const std::string&) override { return false; }
};

// Bounded drop-oldest buffer in front of a sink. Log() never blocks on the
// sink; a drainer (background thread or clock task) moves records out.
class PayloadLogger {
 public:
  PayloadLogger(std::unique_ptr<PayloadSink> sink, std::size_t capacity = 1024,
                MetricsRegistry* metrics = nullptr);
  ~PayloadLogger();
  PayloadLogger(const PayloadLogger&) = delete;
  PayloadLogger& operator=(const PayloadLogger&) = delete;

  bool Log(PayloadRecord record);
  // Writes buffered records until the sink refuses one or `max` are written.
  std::size_t DrainSome(std::size_t max = SIZE_MAX);
  void StartBackgroundDrainer(std::chrono::milliseconds idle_poll =
                                  std::chrono::milliseconds(20));
  void StopBackgroundDrainer();

  std::size_t capacity() const { return capacity_; }
  std::uint64_t submitted() const;
  std::uint64_t written() const;
  std::uint64_t dropped() const;
  std::size_t buffered() const;

 private:
  std::unique_ptr<PayloadSink> sink_;
  std::size_t capacity_;
  MetricsRegistry* metrics_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> buffer_;
  std::uint64_t submitted_ = 0;
  std::uint64_t written_ = 0;
  std::uint64_t dropped_ = 0;
  std::mutex sink_mu_;
  bool stop_ = false;
  std::thread drainer_;
};

struct TimelinePoint {
  Timestamp t{0};
  std::string revision;
  int ready = 0;

  bool operator==(const TimelinePoint&) const = default;
};

// Step function of Ready replicas per revision, one point per change.
// Throws Error{kMalformedEventLog} on unknown transitions.
std::vector<TimelinePoint> ReplicaTimeline(const std::vector<EventRecord>& records);
std::vector<TimelinePoint> ReplicaTimeline(std::string_view ndjson);

}  // namespace miniserve

#endif  // MINISERVE_TELEMETRY_HPP_

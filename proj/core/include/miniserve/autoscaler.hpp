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

#ifndef MINISERVE_AUTOSCALER_HPP_
#define MINISERVE_AUTOSCALER_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miniserve/clock.hpp"
#include "miniserve/replica.hpp"
#include "miniserve/spec.hpp"

namespace miniserve {

struct AutoscalerConfig {
  double target_concurrency = 1.0;  // soft per-replica in-flight goal
  Duration stable_window = std::chrono::seconds(60);
  Duration panic_window = std::chrono::seconds(6);
  double panic_threshold = 2.0;
  Duration scale_to_zero_grace = std::chrono::seconds(30);
  Duration tick = std::chrono::seconds(2);
  double max_scale_up_rate = 10.0;
  int min_replicas = 0;
  int max_replicas = 20;
  int initial_scale = 1;

  static AutoscalerConfig FromAnnotations(const std::map<std::string, std::string>& a);
  // Empty when valid, otherwise the first violated constraint.
  std::string Check() const;
};

// Requests waiting in the activator for a revision with no ready replica.
struct ActivatorSample {
  RevisionId revision;
  Timestamp timestamp{0};
  int buffered = 0;
};

// Step-function history of a revision's total concurrency: the sum over
// sources (replicas plus the activator) of their latest reported value.
class MetricWindow {
 public:
  static constexpr const char* kActivatorSource = "activator";

  explicit MetricWindow(Duration retention = std::chrono::seconds(60))
      : retention_(retention) {}

  void Record(const StatSample& sample);
  void Record(const ActivatorSample& sample);
  void Record(const std::string& source, Timestamp t, int value);
  void Remove(const std::string& source, Timestamp t);

  // Time-weighted mean over [now - span, now], restricted to the part of that
  // interval covered by samples. 0 when nothing was ever recorded.
  double Average(Duration span, Timestamp now) const;
  // Drops samples no longer needed to answer Average() for the retention.
  void Evict(Timestamp now);

  int total() const { return total_; }
  int source_value(const std::string& source) const;
  std::size_t size() const { return samples_.size(); }

 private:
  Duration retention_;
  std::deque<std::pair<Timestamp, int>> samples_;
  std::map<std::string, int> sources_;
  int total_ = 0;
};

enum class ScaleMode { kStable, kPanic };
std::string_view ModeName(ScaleMode mode);

struct ScaleState {
  RevisionId revision;
  int ready_count = 0;
  int pending_count = 0;
  ScaleMode mode = ScaleMode::kStable;
  std::optional<Timestamp> panic_entered_at;
  // First tick of the current run of zero-desired decisions.
  std::optional<Timestamp> zero_since;
};

struct DesiredScale {
  int count = 0;
  ScaleMode mode = ScaleMode::kStable;
  double stable_avg = 0;
  double panic_avg = 0;
  std::optional<Timestamp> panic_entered_at;
};

DesiredScale DesiredReplicas(const AutoscalerConfig& cfg, const ScaleState& state,
                             const MetricWindow& window, Timestamp now);

// True when the zero decision has held for the grace period and nothing is
// buffered in the activator; authorizes removing the last replica.
bool ScaleToZeroCheck(const AutoscalerConfig& cfg, const ScaleState& state,
                      const MetricWindow& window, Timestamp now);

struct ScaleCommand {
  RevisionId revision;
  int count = 0;
  bool zero_authorized = false;
  bool from_zero = false;  // out-of-band activation, not a tick decision
  Timestamp issued_at{0};
};

struct DecisionRecord {
  Timestamp t{0};
  RevisionId revision;
  double stable_avg = 0;
  double panic_avg = 0;
  ScaleMode mode = ScaleMode::kStable;
  int desired = 0;
  int current = 0;
  std::optional<int> command;
};

// Per-revision decision loop. Ticks every cfg.tick on the clock and hands
// commands to `sink` in issue order.
class Autoscaler {
 public:
  struct Counts {
    int ready = 0;
    int pending = 0;
  };
  using CountsFn = std::function<Counts()>;
  using CommandSink = std::function<void(const ScaleCommand&)>;

  Autoscaler(RevisionId revision, AutoscalerConfig config, Clock& clock,
             CountsFn counts, CommandSink sink);
  ~Autoscaler();
  Autoscaler(const Autoscaler&) = delete;
  Autoscaler& operator=(const Autoscaler&) = delete;

  void Start();
  void Stop();

  void Record(const StatSample& sample);
  void Record(const ActivatorSample& sample);
  void RemoveReplica(const std::string& replica);
  void Tick();

  const MetricWindow& window() const { return window_; }
  const ScaleState& state() const { return state_; }
  const AutoscalerConfig& config() const { return config_; }
  const std::vector<DecisionRecord>& decisions() const { return decisions_; }

 private:
  void Emit(ScaleCommand cmd);

  RevisionId revision_;
  AutoscalerConfig config_;
  Clock& clock_;
  CountsFn counts_;
  CommandSink sink_;
  MetricWindow window_;
  ScaleState state_;
  std::vector<DecisionRecord> decisions_;
  TimerId tick_timer_ = 0;
  bool from_zero_requested_ = false;
  bool running_ = false;
};

}  // namespace miniserve

#endif  // MINISERVE_AUTOSCALER_HPP_

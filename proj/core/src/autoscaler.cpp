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

#include "miniserve/autoscaler.hpp"

#include <algorithm>
#include <cmath>

namespace miniserve {
namespace {

// ceil() that ignores floating noise from the integral/duration ratio.
int CeilRatio(double value, double target) {
  const double r = value / target;
  return static_cast<int>(std::ceil(r - 1e-9));
}

}  // namespace

AutoscalerConfig AutoscalerConfig::FromAnnotations(
    const std::map<std::string, std::string>& a) {
  AutoscalerConfig c;
  c.target_concurrency = AnnotationDouble(a, "autoscaling.target", c.target_concurrency);
  c.stable_window = FromSeconds(AnnotationDouble(a, "autoscaling.stableWindowSeconds",
                                                 ToSeconds(c.stable_window)));
  c.panic_window = FromSeconds(AnnotationDouble(a, "autoscaling.panicWindowSeconds",
                                                ToSeconds(c.panic_window)));
  c.panic_threshold = AnnotationDouble(a, "autoscaling.panicThreshold", c.panic_threshold);
  c.scale_to_zero_grace = FromSeconds(AnnotationDouble(
      a, "autoscaling.scaleToZeroGraceSeconds", ToSeconds(c.scale_to_zero_grace)));
  c.tick = FromSeconds(AnnotationDouble(a, "autoscaling.tickSeconds", ToSeconds(c.tick)));
  c.max_scale_up_rate =
      AnnotationDouble(a, "autoscaling.maxScaleUpRate", c.max_scale_up_rate);
  c.min_replicas =
      static_cast<int>(AnnotationDouble(a, "autoscaling.minReplicas", c.min_replicas));
  c.max_replicas =
      static_cast<int>(AnnotationDouble(a, "autoscaling.maxReplicas", c.max_replicas));
  c.initial_scale =
      static_cast<int>(AnnotationDouble(a, "autoscaling.initialScale", c.initial_scale));
  return c;
}

std::string AutoscalerConfig::Check() const {
  if (target_concurrency <= 0) return "target_concurrency must be positive";
  if (stable_window <= Duration::zero()) return "stable_window must be positive";
  if (panic_window <= Duration::zero()) return "panic_window must be positive";
  if (panic_window > stable_window) return "panic_window exceeds stable_window";
  if (panic_threshold <= 0) return "panic_threshold must be positive";
  if (scale_to_zero_grace < Duration::zero()) return "grace must be non-negative";
  if (tick <= Duration::zero()) return "tick must be positive";
  if (max_scale_up_rate <= 0) return "max_scale_up_rate must be positive";
  if (min_replicas < 0 || max_replicas < 1) return "replica bounds out of range";
  if (min_replicas > max_replicas) return "min_replicas exceeds max_replicas";
  return {};
}

std::string_view ModeName(ScaleMode mode) {
  return mode == ScaleMode::kPanic ? "panic" : "stable";
}

void MetricWindow::Record(const StatSample& sample) {
  Record(sample.replica, sample.timestamp, sample.requests);
}

void MetricWindow::Record(const ActivatorSample& sample) {
  Record(kActivatorSource, sample.timestamp, sample.buffered);
}

void MetricWindow::Record(const std::string& source, Timestamp t, int value) {
  if (!samples_.empty() && t < samples_.back().first) t = samples_.back().first;
  auto& slot = sources_[source];
  total_ += value - slot;
  slot = value;
  if (!samples_.empty() && samples_.back().first == t) {
    samples_.back().second = total_;
  } else if (samples_.empty() || samples_.back().second != total_) {
    samples_.emplace_back(t, total_);
  }
}

void MetricWindow::Remove(const std::string& source, Timestamp t) {
  Record(source, t, 0);
  sources_.erase(source);
}

int MetricWindow::source_value(const std::string& source) const {
  auto it = sources_.find(source);
  return it == sources_.end() ? 0 : it->second;
}

double MetricWindow::Average(Duration span, Timestamp now) const {
  if (samples_.empty()) return 0.0;
  const Timestamp window_start = now - span;
  // First sample at or after the window start, and the value in force there.
  auto it = std::upper_bound(
      samples_.begin(), samples_.end(), window_start,
      [](Timestamp t, const std::pair<Timestamp, int>& s) { return t < s.first; });
  Timestamp cursor;
  std::int64_t value;
  if (it == samples_.begin()) {
    cursor = it->first;
    value = it->second;
    ++it;
  } else {
    cursor = window_start;
    value = std::prev(it)->second;
  }
  if (cursor >= now) return static_cast<double>(samples_.back().second);
  const Timestamp covered_from = cursor;
  std::int64_t integral = 0;
  for (; it != samples_.end() && it->first <= now; ++it) {
    integral += value * (it->first - cursor).count();
    cursor = it->first;
    value = it->second;
  }
  integral += value * (now - cursor).count();
  return static_cast<double>(integral) / static_cast<double>((now - covered_from).count());
}

void MetricWindow::Evict(Timestamp now) {
  const Timestamp cutoff = now - retention_;
  // Keep the last sample at or before the cutoff: it defines the value there.
  while (samples_.size() >= 2 && samples_[1].first <= cutoff) samples_.pop_front();
}

DesiredScale DesiredReplicas(const AutoscalerConfig& cfg, const ScaleState& state,
                             const MetricWindow& window, Timestamp now) {
  DesiredScale d;
  d.stable_avg = window.Average(cfg.stable_window, now);
  d.panic_avg = window.Average(cfg.panic_window, now);
  const int stable_desired = CeilRatio(d.stable_avg, cfg.target_concurrency);
  const int panic_desired = CeilRatio(d.panic_avg, cfg.target_concurrency);
  const int ready = std::max(0, state.ready_count);

  const bool trigger =
      panic_desired > 0 &&
      panic_desired >= cfg.panic_threshold * static_cast<double>(std::max(ready, 1));
  if (trigger) {
    d.mode = ScaleMode::kPanic;
    d.panic_entered_at = now;
  } else if (state.mode == ScaleMode::kPanic && state.panic_entered_at &&
             now - *state.panic_entered_at < cfg.stable_window) {
    d.mode = ScaleMode::kPanic;
    d.panic_entered_at = state.panic_entered_at;
  }

  int count = d.mode == ScaleMode::kPanic ? std::max(panic_desired, ready) : stable_desired;
  const double rate_cap =
      std::ceil(static_cast<double>(std::max(ready, 1)) * cfg.max_scale_up_rate);
  const int upper = static_cast<int>(
      std::min(static_cast<double>(cfg.max_replicas), rate_cap));
  count = std::min(count, upper);
  count = std::max(count, cfg.min_replicas);
  d.count = std::max(count, 0);
  return d;
}

bool ScaleToZeroCheck(const AutoscalerConfig& cfg, const ScaleState& state,
                      const MetricWindow& window, Timestamp now) {
  if (cfg.min_replicas > 0 || !state.zero_since) return false;
  if (window.source_value(MetricWindow::kActivatorSource) > 0) return false;
  return now - *state.zero_since >= cfg.scale_to_zero_grace;
}

Autoscaler::Autoscaler(RevisionId revision, AutoscalerConfig config, Clock& clock,
                       CountsFn counts, CommandSink sink)
    : revision_(revision),
      config_(config),
      clock_(clock),
      counts_(std::move(counts)),
      sink_(std::move(sink)),
      window_(config.stable_window) {
  state_.revision = revision;
}

Autoscaler::~Autoscaler() { Stop(); }

void Autoscaler::Start() {
  if (running_) return;
  running_ = true;
  tick_timer_ = clock_.ScheduleAfter(config_.tick, [this] { Tick(); }, EventPriority::kTick);
}

void Autoscaler::Stop() {
  running_ = false;
  if (tick_timer_ != 0) clock_.Cancel(tick_timer_);
  tick_timer_ = 0;
}

void Autoscaler::Record(const StatSample& sample) { window_.Record(sample); }

void Autoscaler::Record(const ActivatorSample& sample) {
  window_.Record(sample);
  if (sample.buffered <= 0 || from_zero_requested_) return;
  const Counts c = counts_();
  if (c.ready + c.pending > 0) return;
  // Scale from zero right away instead of waiting for the next tick.
  ScaleCommand cmd;
  cmd.revision = revision_;
  cmd.count = std::clamp(CeilRatio(sample.buffered, config_.target_concurrency), 1,
                         std::max(1, config_.max_replicas));
  cmd.from_zero = true;
  cmd.issued_at = clock_.Now();
  from_zero_requested_ = true;
  Emit(cmd);
}

void Autoscaler::RemoveReplica(const std::string& replica) {
  window_.Remove(replica, clock_.Now());
}

void Autoscaler::Tick() {
  const Timestamp now = clock_.Now();
  if (running_) {
    tick_timer_ = clock_.ScheduleAfter(config_.tick, [this] { Tick(); }, EventPriority::kTick);
  }
  window_.Evict(now);
  const Counts c = counts_();
  state_.ready_count = c.ready;
  state_.pending_count = c.pending;
  const int current = c.ready + c.pending;
  if (current > 0) from_zero_requested_ = false;

  const DesiredScale d = DesiredReplicas(config_, state_, window_, now);
  state_.mode = d.mode;
  state_.panic_entered_at = d.panic_entered_at;
  if (d.count == 0) {
    if (!state_.zero_since) state_.zero_since = now;
  } else {
    state_.zero_since.reset();
  }

  DecisionRecord rec{now, revision_, d.stable_avg, d.panic_avg, d.mode, d.count, current, {}};
  int target = d.count;
  bool authorized = false;
  if (d.count == 0 && current > 0) {
    authorized = ScaleToZeroCheck(config_, state_, window_, now);
    if (!authorized) target = 1;
  }
  if (target != current) {
    ScaleCommand cmd{revision_, target, authorized, false, now};
    rec.command = target;
    Emit(cmd);
  }
  decisions_.push_back(rec);
}

void Autoscaler::Emit(ScaleCommand cmd) {
  if (sink_) sink_(cmd);
}

}  // namespace miniserve

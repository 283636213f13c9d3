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

#ifndef MINISERVE_CLOCK_HPP_
#define MINISERVE_CLOCK_HPP_

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

namespace miniserve {

// All platform time is integral microseconds since the clock's epoch so that
// virtual-clock runs are exact and reproducible.
using Duration = std::chrono::microseconds;
using Timestamp = std::chrono::microseconds;

inline double ToSeconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}
inline double ToMillis(Duration d) {
  return std::chrono::duration<double, std::milli>(d).count();
}
inline Duration FromSeconds(double s) {
  return Duration(static_cast<std::int64_t>(std::llround(s * 1e6)));
}
inline Duration FromMillis(double ms) {
  return Duration(static_cast<std::int64_t>(std::llround(ms * 1e3)));
}

// Same-timestamp events run in ascending priority, then in scheduling order.
enum class EventPriority : int {
  kLifecycle = 0,
  kCompletion = 1,
  kDefault = 2,
  kArrival = 3,
  kControl = 4,
  kTick = 5,
};

using TimerId = std::uint64_t;
using Task = std::function<void()>;

// Time source and task scheduler. Every time read or wait in the platform
// goes through one of these, so the same code runs on a discrete-event
// virtual clock or on wall time.
class Clock {
 public:
  virtual ~Clock() = default;

  virtual Timestamp Now() const = 0;
  virtual TimerId ScheduleAt(Timestamp at, Task task,
                             EventPriority priority = EventPriority::kDefault) = 0;
  virtual bool Cancel(TimerId id) = 0;
  virtual bool IsVirtual() const = 0;

  TimerId ScheduleAfter(Duration delay, Task task,
                        EventPriority priority = EventPriority::kDefault) {
    if (delay < Duration::zero()) delay = Duration::zero();
    return ScheduleAt(Now() + delay, std::move(task), priority);
  }
  TimerId Post(Task task, EventPriority priority = EventPriority::kDefault) {
    return ScheduleAt(Now(), std::move(task), priority);
  }
};

namespace internal {

struct TimerKey {
  Timestamp at;
  int priority;
  std::uint64_t seq;
  bool operator<(const TimerKey& o) const {
    return std::tie(at, priority, seq) < std::tie(o.at, o.priority, o.seq);
  }
};

}  // namespace internal

// Deterministic discrete-event scheduler. Single-threaded: tasks run inside
// Run*/Step on the calling thread and time jumps to the next event.
class VirtualClock final : public Clock {
 public:
  Timestamp Now() const override { return now_; }
  TimerId ScheduleAt(Timestamp at, Task task,
                     EventPriority priority = EventPriority::kDefault) override;
  bool Cancel(TimerId id) override;
  bool IsVirtual() const override { return true; }

  // Runs the earliest pending task. Returns false when nothing is pending.
  bool Step();
  // Runs every task scheduled at or before `until`, then advances to it.
  void RunUntil(Timestamp until);
  void RunFor(Duration d) { RunUntil(now_ + d); }
  // Runs until the queue is empty or `max_events` tasks have run.
  std::uint64_t RunAll(std::uint64_t max_events = UINT64_MAX);

  std::size_t pending() const { return queue_.size(); }
  std::uint64_t executed() const { return executed_; }

 private:
  Timestamp now_{0};
  std::uint64_t next_seq_ = 1;
  std::uint64_t executed_ = 0;
  std::map<internal::TimerKey, Task> queue_;
  std::map<TimerId, internal::TimerKey> index_;
};

// Wall-clock event loop. Tasks run on one background thread; Schedule*,
// Post and Cancel are safe from any thread.
class RealClock final : public Clock {
 public:
  RealClock();
  ~RealClock() override;
  RealClock(const RealClock&) = delete;
  RealClock& operator=(const RealClock&) = delete;

  Timestamp Now() const override;
  TimerId ScheduleAt(Timestamp at, Task task,
                     EventPriority priority = EventPriority::kDefault) override;
  bool Cancel(TimerId id) override;
  bool IsVirtual() const override { return false; }

  bool OnLoopThread() const {
    return std::this_thread::get_id() == thread_.get_id();
  }
  void Stop();

 private:
  void Loop();

  std::chrono::steady_clock::time_point epoch_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::uint64_t next_seq_ = 1;
  std::map<internal::TimerKey, Task> queue_;
  std::map<TimerId, internal::TimerKey> index_;
  std::thread thread_;
};

}  // namespace miniserve

#endif  // MINISERVE_CLOCK_HPP_

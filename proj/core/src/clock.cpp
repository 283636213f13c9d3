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

#include "miniserve/clock.hpp"

#include <utility>

namespace miniserve {

TimerId VirtualClock::ScheduleAt(Timestamp at, Task task,
                                 EventPriority priority) {
  if (at < now_) at = now_;
  const std::uint64_t seq = next_seq_++;
  internal::TimerKey key{at, static_cast<int>(priority), seq};
  queue_.emplace(key, std::move(task));
  index_.emplace(seq, key);
  return seq;
}

bool VirtualClock::Cancel(TimerId id) {
  auto it = index_.find(id);
  if (it == index_.end()) return false;
  queue_.erase(it->second);
  index_.erase(it);
  return true;
}

bool VirtualClock::Step() {
  if (queue_.empty()) return false;
  auto node = queue_.extract(queue_.begin());
  index_.erase(node.key().seq);
  now_ = node.key().at;
  ++executed_;
  node.mapped()();
  return true;
}

void VirtualClock::RunUntil(Timestamp until) {
  while (!queue_.empty() && queue_.begin()->first.at <= until) Step();
  if (until > now_) now_ = until;
}

std::uint64_t VirtualClock::RunAll(std::uint64_t max_events) {
  std::uint64_t n = 0;
  while (n < max_events && Step()) ++n;
  return n;
}

RealClock::RealClock()
    : epoch_(std::chrono::steady_clock::now()), thread_([this] { Loop(); }) {}

RealClock::~RealClock() { Stop(); }

void RealClock::Stop() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) {
    if (OnLoopThread()) {
      thread_.detach();
    } else {
      thread_.join();
    }
  }
}

Timestamp RealClock::Now() const {
  return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() -
                                              epoch_);
}

TimerId RealClock::ScheduleAt(Timestamp at, Task task, EventPriority priority) {
  TimerId id;
  {
    std::lock_guard<std::mutex> lock(mu_);
    id = next_seq_++;
    internal::TimerKey key{at, static_cast<int>(priority), id};
    queue_.emplace(key, std::move(task));
    index_.emplace(id, key);
  }
  cv_.notify_one();
  return id;
}

bool RealClock::Cancel(TimerId id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return false;
  queue_.erase(it->second);
  index_.erase(it);
  return true;
}

void RealClock::Loop() {
  std::unique_lock<std::mutex> lock(mu_);
  while (!stopping_) {
    if (queue_.empty()) {
      cv_.wait(lock);
      continue;
    }
    const auto due = queue_.begin()->first.at;
    const auto now = Now();
    if (due > now) {
      cv_.wait_for(lock, due - now);
      continue;
    }
    auto node = queue_.extract(queue_.begin());
    index_.erase(node.key().seq);
    lock.unlock();
    node.mapped()();
    lock.lock();
  }
}

}  // namespace miniserve

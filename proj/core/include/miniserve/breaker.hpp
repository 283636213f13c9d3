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

#ifndef MINISERVE_BREAKER_HPP_
#define MINISERVE_BREAKER_HPP_

#include <cstdint>

namespace miniserve {

// Queue-proxy style admission control for one replica. Counts units: a
// single request, or one whole batch when batching is on.
class Breaker {
 public:
  enum class Admission { kExecute, kQueued, kRejected };

  Breaker(int container_concurrency, int queue_capacity);

  Admission Admit();
  // An executing unit finished. Returns true when a queued unit takes over
  // the freed slot; the caller must then start it.
  bool Release();
  // A queued unit was abandoned without executing.
  void DropQueued();

  int container_concurrency() const { return container_concurrency_; }
  int queue_capacity() const { return queue_capacity_; }
  int in_flight() const { return in_flight_; }
  int queued() const { return queued_; }
  bool idle() const { return in_flight_ == 0 && queued_ == 0; }
  bool HasCapacity() const {
    return in_flight_ < container_concurrency_ || queued_ < queue_capacity_;
  }

 private:
  int container_concurrency_;
  int queue_capacity_;
  int in_flight_ = 0;
  int queued_ = 0;
};

}  // namespace miniserve

#endif  // MINISERVE_BREAKER_HPP_

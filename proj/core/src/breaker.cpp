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

#include "miniserve/breaker.hpp"

#include <algorithm>
#include <cassert>

namespace miniserve {

Breaker::Breaker(int container_concurrency, int queue_capacity)
    : container_concurrency_(std::max(1, container_concurrency)),
      queue_capacity_(std::max(0, queue_capacity)) {}

Breaker::Admission Breaker::Admit() {
  if (in_flight_ < container_concurrency_) {
    ++in_flight_;
    return Admission::kExecute;
  }
  if (queued_ < queue_capacity_) {
    ++queued_;
    return Admission::kQueued;
  }
  return Admission::kRejected;
}

bool Breaker::Release() {
  assert(in_flight_ > 0);
  if (queued_ > 0) {
    --queued_;
    return true;
  }
  --in_flight_;
  return false;
}

void Breaker::DropQueued() {
  assert(queued_ > 0);
  --queued_;
}

}  // namespace miniserve

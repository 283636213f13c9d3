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

#ifndef MINISERVE_BATCHER_HPP_
#define MINISERVE_BATCHER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "miniserve/clock.hpp"
#include "miniserve/predictor.hpp"

namespace miniserve {

struct BatcherConfig {
  bool enabled = false;
  std::size_t max_batch_size = 1;
  Duration max_latency{0};
};

struct BatchEntry {
  std::uint64_t request_id = 0;
  Instances instances;
  Timestamp enqueued{0};
};

struct PendingBatch {
  std::vector<BatchEntry> entries;
  Timestamp opened_at{0};
};

struct FlushAction {
  enum class Kind { kExecuteNow, kWaitUntil };
  Kind kind;
  Timestamp until{0};  // flush deadline for kWaitUntil

  bool execute_now() const { return kind == Kind::kExecuteNow; }
};

// Full batch or expired timeout executes now; otherwise wait for the
// timeout anchored at the first entry's arrival.
FlushAction FlushDecision(const BatcherConfig& config, const PendingBatch& batch,
                          Timestamp now);

struct SplitResponse {
  std::uint64_t request_id;
  std::vector<double> outputs;
  Duration latency;  // completion - enqueue
};

// Hands the i-th slice of a batch's flattened outputs to the i-th entry.
// Throws Error{kBatchShapeMismatch} when sizes disagree.
std::vector<SplitResponse> SplitResponses(const std::vector<double>& batch_output,
                                          const PendingBatch& batch,
                                          Timestamp completed_at);

struct BatchTicket {
  std::uint64_t batch_seq;
  std::size_t index;
};

// Accumulates requests for one replica. Callers own the flush timer: Submit
// reports what to do, TakeBatch closes the current batch.
class Batcher {
 public:
  explicit Batcher(BatcherConfig config) : config_(config) {}

  struct Submitted {
    BatchTicket ticket;
    FlushAction action;
    bool opened;  // this submit opened a new batch
  };
  Submitted Submit(BatchEntry entry, Timestamp now);
  std::optional<FlushAction> Decision(Timestamp now) const;
  PendingBatch TakeBatch();

  const BatcherConfig& config() const { return config_; }
  bool has_pending() const { return !pending_.entries.empty(); }
  std::size_t pending_size() const { return pending_.entries.size(); }
  std::uint64_t batch_seq() const { return batch_seq_; }

 private:
  BatcherConfig config_;
  PendingBatch pending_;
  std::uint64_t batch_seq_ = 0;
};

}  // namespace miniserve

#endif  // MINISERVE_BATCHER_HPP_

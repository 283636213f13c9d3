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

#include "miniserve/batcher.hpp"

#include <string>

#include "miniserve/error.hpp"

namespace miniserve {

FlushAction FlushDecision(const BatcherConfig& config, const PendingBatch& batch,
                          Timestamp now) {
  const Timestamp deadline = batch.opened_at + config.max_latency;
  if (batch.entries.size() >= config.max_batch_size || now >= deadline) {
    return {FlushAction::Kind::kExecuteNow, now};
  }
  return {FlushAction::Kind::kWaitUntil, deadline};
}

std::vector<SplitResponse> SplitResponses(const std::vector<double>& batch_output,
                                          const PendingBatch& batch,
                                          Timestamp completed_at) {
  std::size_t expected = 0;
  for (const auto& e : batch.entries) expected += e.instances.size();
  if (batch_output.size() != expected) {
    throw Error(Errc::kBatchShapeMismatch,
                std::to_string(batch_output.size()) + " outputs for " +
                    std::to_string(expected) + " instances");
  }
  std::vector<SplitResponse> out;
  out.reserve(batch.entries.size());
  auto it = batch_output.begin();
  for (const auto& e : batch.entries) {
    const auto n = static_cast<std::ptrdiff_t>(e.instances.size());
    out.push_back({e.request_id, std::vector<double>(it, it + n),
                   completed_at - e.enqueued});
    it += n;
  }
  return out;
}

Batcher::Submitted Batcher::Submit(BatchEntry entry, Timestamp now) {
  const bool opened = pending_.entries.empty();
  if (opened) {
    pending_.opened_at = now;
    ++batch_seq_;
  }
  pending_.entries.push_back(std::move(entry));
  BatchTicket ticket{batch_seq_, pending_.entries.size() - 1};
  return {ticket, FlushDecision(config_, pending_, now), opened};
}

std::optional<FlushAction> Batcher::Decision(Timestamp now) const {
  if (pending_.entries.empty()) return std::nullopt;
  return FlushDecision(config_, pending_, now);
}

PendingBatch Batcher::TakeBatch() {
  PendingBatch out = std::move(pending_);
  pending_ = PendingBatch{};
  return out;
}

}  // namespace miniserve

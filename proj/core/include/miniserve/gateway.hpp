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

#ifndef MINISERVE_GATEWAY_HPP_
#define MINISERVE_GATEWAY_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "miniserve/clock.hpp"
#include "miniserve/replica.hpp"
#include "miniserve/request.hpp"
#include "miniserve/spec.hpp"

namespace miniserve {

struct WeightedTarget {
  RevisionId revision;
  int weight = 0;  // percent of the service's traffic
  RevisionRole role = RevisionRole::kDefault;

  bool operator==(const WeightedTarget&) const = default;
};

// Traffic split for one service. During a rolling update the default share
// is spread over several default-role targets.
struct ServiceRoute {
  std::vector<WeightedTarget> targets;
  std::optional<RevisionId> shadow;

  int TotalWeight() const;
  int WeightOf(RevisionRole role) const;
  bool operator==(const ServiceRoute&) const = default;
};

using RoutingTable = std::map<std::string, ServiceRoute>;

// Empty when the route's weights sum to 100 and are non-negative.
std::string CheckRoute(const ServiceRoute& route);

// Smooth weighted round-robin counters for one service's targets.
struct SwrrState {
  std::vector<std::int64_t> current;
};

// Deterministic SWRR pick: any 100 consecutive picks over weights summing to
// 100 contain exactly `weight` picks of each target.
std::size_t SwrrPick(const std::vector<WeightedTarget>& targets, SwrrState& state);

// Owns the live routing table. Swaps replace a whole table; readers observe
// either the old or the new one.
class Router {
 public:
  void Swap(RoutingTable table);
  std::shared_ptr<const RoutingTable> Snapshot() const;
  // Throws Error{kUnknownService}.
  RevisionId Route(RequestEnvelope& env);
  std::optional<RevisionId> ShadowOf(const std::string& service) const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const RoutingTable> table_ = std::make_shared<RoutingTable>();
  std::map<std::string, SwrrState> swrr_;
};

// Least outstanding work (in-flight + queued + open batch); ties go
// round-robin starting at `cursor`, which advances past the pick.
std::size_t PickReplica(const std::vector<StatSample>& candidates, std::size_t& cursor);

struct ForwardDecision {
  enum class Kind { kDirect, kBuffered, kRejected };
  Kind kind = Kind::kRejected;
  std::shared_ptr<Replica> replica;  // kDirect
  ResponseStatus reason = ResponseStatus::kBufferFull;  // kRejected
};

struct ActivatorOptions {
  std::size_t capacity = 1000;
  Duration timeout = std::chrono::seconds(30);
};

// FIFO of requests held for one revision while it has no ready replica.
// Each entry is either forwarded once (Release) or rejected once (timeout).
class ActivatorQueue {
 public:
  struct Entry {
    RequestEnvelope env;
    ResponseCallback done;
    TimerId timeout_timer = 0;
  };
  using ChangeFn = std::function<void(int buffered)>;

  ActivatorQueue(RevisionId revision, ActivatorOptions options, Clock& clock,
                 ChangeFn on_change = {});
  ~ActivatorQueue();
  ActivatorQueue(const ActivatorQueue&) = delete;
  ActivatorQueue& operator=(const ActivatorQueue&) = delete;

  // Takes ownership of env/done only when the request is accepted.
  bool Buffer(RequestEnvelope&& env, ResponseCallback&& done);
  std::optional<Entry> PopFront();
  std::vector<Entry> TakeAll();

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const RevisionId& revision() const { return revision_; }
  std::uint64_t forwarded() const { return forwarded_; }
  std::uint64_t timed_out() const { return timed_out_; }
  std::uint64_t rejected_full() const { return rejected_full_; }

 private:
  void Expire(std::uint64_t request_id);
  void Changed();

  RevisionId revision_;
  ActivatorOptions options_;
  Clock& clock_;
  ChangeFn on_change_;
  std::deque<Entry> entries_;
  std::uint64_t forwarded_ = 0;
  std::uint64_t timed_out_ = 0;
  std::uint64_t rejected_full_ = 0;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

// Direct to the least-loaded ready replica when one exists; otherwise hold
// the request in the activator queue (or reject when it is full).
ForwardDecision AdmitOrBuffer(RequestEnvelope& env, ResponseCallback& done,
                              const std::vector<std::shared_ptr<Replica>>& ready,
                              ActivatorQueue& queue, std::size_t& rr_cursor,
                              Timestamp now);

}  // namespace miniserve

#endif  // MINISERVE_GATEWAY_HPP_

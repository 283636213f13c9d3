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

#include "miniserve/gateway.hpp"

#include <algorithm>
#include <numeric>

#include "miniserve/error.hpp"

namespace miniserve {

std::string_view StatusName(ResponseStatus status) {
  switch (status) {
    case ResponseStatus::kOk: return "Ok";
    case ResponseStatus::kBadRequest: return "BadRequest";
    case ResponseStatus::kUnknownService: return "UnknownService";
    case ResponseStatus::kOverloaded: return "Overloaded";
    case ResponseStatus::kBufferFull: return "BufferFull";
    case ResponseStatus::kActivationTimeout: return "ActivationTimeout";
    case ResponseStatus::kNotReady: return "NotReady";
    case ResponseStatus::kReplicaStopped: return "ReplicaStopped";
    case ResponseStatus::kPredictorError: return "PredictorError";
    case ResponseStatus::kTransformError: return "TransformError";
    case ResponseStatus::kExplainerNotConfigured: return "ExplainerNotConfigured";
  }
  return "Unknown";
}

int HttpStatusFor(ResponseStatus status) {
  switch (status) {
    case ResponseStatus::kOk: return 200;
    case ResponseStatus::kBadRequest:
    case ResponseStatus::kExplainerNotConfigured: return 400;
    case ResponseStatus::kUnknownService: return 404;
    case ResponseStatus::kOverloaded:
    case ResponseStatus::kBufferFull: return 429;
    case ResponseStatus::kActivationTimeout:
    case ResponseStatus::kNotReady:
    case ResponseStatus::kReplicaStopped: return 503;
    case ResponseStatus::kPredictorError:
    case ResponseStatus::kTransformError: return 500;
  }
  return 500;
}

int ServiceRoute::TotalWeight() const {
  return std::accumulate(targets.begin(), targets.end(), 0,
                         [](int acc, const WeightedTarget& t) { return acc + t.weight; });
}

int ServiceRoute::WeightOf(RevisionRole role) const {
  int w = 0;
  for (const auto& t : targets) {
    if (t.role == role) w += t.weight;
  }
  return w;
}

std::string CheckRoute(const ServiceRoute& route) {
  for (const auto& t : route.targets) {
    if (t.weight < 0) return "negative weight for " + t.revision.ToString();
  }
  if (route.TotalWeight() != 100) {
    return "weights sum to " + std::to_string(route.TotalWeight()) + ", expected 100";
  }
  return {};
}

std::size_t SwrrPick(const std::vector<WeightedTarget>& targets, SwrrState& state) {
  if (state.current.size() != targets.size()) state.current.assign(targets.size(), 0);
  std::int64_t total = 0;
  std::size_t best = targets.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].weight <= 0) continue;
    state.current[i] += targets[i].weight;
    total += targets[i].weight;
    if (best == targets.size() || state.current[i] > state.current[best]) best = i;
  }
  if (best == targets.size()) return best;
  state.current[best] -= total;
  return best;
}

void Router::Swap(RoutingTable table) {
  auto next = std::make_shared<const RoutingTable>(std::move(table));
  std::lock_guard<std::mutex> lock(mu_);
  for (auto it = swrr_.begin(); it != swrr_.end();) {
    auto old_it = table_->find(it->first);
    auto new_it = next->find(it->first);
    const bool same = old_it != table_->end() && new_it != next->end() &&
                      old_it->second.targets == new_it->second.targets;
    it = same ? std::next(it) : swrr_.erase(it);
  }
  table_ = std::move(next);
}

std::shared_ptr<const RoutingTable> Router::Snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return table_;
}

RevisionId Router::Route(RequestEnvelope& env) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = table_->find(env.service);
  if (it == table_->end()) throw Error(Errc::kUnknownService, env.service);
  const auto& targets = it->second.targets;
  const std::size_t pick = SwrrPick(targets, swrr_[env.service]);
  if (pick >= targets.size()) {
    throw Error(Errc::kUnknownService, env.service + " has no routable revision");
  }
  env.routed_revision = targets[pick].revision;
  return targets[pick].revision;
}

std::optional<RevisionId> Router::ShadowOf(const std::string& service) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = table_->find(service);
  if (it == table_->end()) return std::nullopt;
  return it->second.shadow;
}

std::size_t PickReplica(const std::vector<StatSample>& candidates, std::size_t& cursor) {
  const std::size_t n = candidates.size();
  if (n == 0) return 0;
  std::size_t best = n;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (cursor + k) % n;
    if (best == n || candidates[i].load() < candidates[best].load()) best = i;
  }
  cursor = (best + 1) % n;
  return best;
}

ActivatorQueue::ActivatorQueue(RevisionId revision, ActivatorOptions options,
                               Clock& clock, ChangeFn on_change)
    : revision_(revision), options_(options), clock_(clock),
      on_change_(std::move(on_change)) {}

ActivatorQueue::~ActivatorQueue() {
  *alive_ = false;
  for (auto& e : entries_) clock_.Cancel(e.timeout_timer);
}

void ActivatorQueue::Changed() {
  if (on_change_) on_change_(static_cast<int>(entries_.size()));
}

bool ActivatorQueue::Buffer(RequestEnvelope&& env, ResponseCallback&& done) {
  if (entries_.size() >= options_.capacity) {
    ++rejected_full_;
    return false;
  }
  const std::uint64_t id = env.id;
  std::weak_ptr<bool> alive = alive_;
  Entry e{std::move(env), std::move(done), 0};
  e.timeout_timer = clock_.ScheduleAfter(
      options_.timeout,
      [this, alive, id] {
        if (auto a = alive.lock(); a && *a) Expire(id);
      },
      EventPriority::kCompletion);
  entries_.push_back(std::move(e));
  Changed();
  return true;
}

std::optional<ActivatorQueue::Entry> ActivatorQueue::PopFront() {
  if (entries_.empty()) return std::nullopt;
  Entry e = std::move(entries_.front());
  entries_.pop_front();
  clock_.Cancel(e.timeout_timer);
  ++forwarded_;
  Changed();
  return e;
}

std::vector<ActivatorQueue::Entry> ActivatorQueue::TakeAll() {
  std::vector<Entry> out;
  while (!entries_.empty()) {
    Entry e = std::move(entries_.front());
    entries_.pop_front();
    clock_.Cancel(e.timeout_timer);
    out.push_back(std::move(e));
  }
  Changed();
  return out;
}

void ActivatorQueue::Expire(std::uint64_t request_id) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [request_id](const Entry& e) { return e.env.id == request_id; });
  if (it == entries_.end()) return;
  Entry e = std::move(*it);
  entries_.erase(it);
  ++timed_out_;
  Changed();
  InferenceResponse resp;
  resp.request_id = request_id;
  resp.status = ResponseStatus::kActivationTimeout;
  resp.served_revision = revision_;
  resp.message = "no ready replica for " + revision_.ToString() + " within activation timeout";
  e.done(std::move(resp));
}

ForwardDecision AdmitOrBuffer(RequestEnvelope& env, ResponseCallback& done,
                              const std::vector<std::shared_ptr<Replica>>& ready,
                              ActivatorQueue& queue, std::size_t& rr_cursor,
                              Timestamp now) {
  ForwardDecision d;
  if (!ready.empty()) {
    std::vector<StatSample> stats;
    stats.reserve(ready.size());
    for (const auto& r : ready) stats.push_back(r->ReportStats(now));
    d.kind = ForwardDecision::Kind::kDirect;
    d.replica = ready[PickReplica(stats, rr_cursor)];
    return d;
  }
  if (queue.Buffer(std::move(env), std::move(done))) {
    d.kind = ForwardDecision::Kind::kBuffered;
    return d;
  }
  d.kind = ForwardDecision::Kind::kRejected;
  d.reason = ResponseStatus::kBufferFull;
  return d;
}

}  // namespace miniserve

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

#include "miniserve/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "miniserve/error.hpp"

namespace miniserve {
namespace {

void CheckKeys(const YAML::Node& node, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw Error(Errc::kMalformedDocument, where + " must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw Error(Errc::kUnknownField, "unknown field " + where + "." + key);
    }
  }
}

template <typename T>
T Get(const YAML::Node& node, const char* key, T fallback, const std::string& where) {
  if (!node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw Error(Errc::kMalformedDocument, where + "." + key + " has the wrong type");
  }
}

Instances ParseInstances(const YAML::Node& n, const std::string& where) {
  Instances out;
  if (!n.IsSequence()) throw Error(Errc::kMalformedDocument, where + " must be a list");
  for (const auto& row : n) {
    try {
      out.push_back(row.as<std::vector<double>>());
    } catch (const YAML::Exception&) {
      throw Error(Errc::kMalformedDocument, where + " must be a list of number lists");
    }
  }
  return out;
}

PayloadSinkKind ParseSink(const std::string& s) {
  if (s == "none") return PayloadSinkKind::kNone;
  if (s == "memory") return PayloadSinkKind::kMemory;
  if (s == "file") return PayloadSinkKind::kFile;
  if (s == "stalled") return PayloadSinkKind::kStalled;
  throw Error(Errc::kMalformedDocument, "unknown payload sink " + s);
}

double Sec(Duration d) { return static_cast<double>(d.count()) / 1e6; }
double Ms(Duration d) { return static_cast<double>(d.count()) / 1e3; }

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::kInvalidArgument, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path Resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

struct ClientRecord {
  std::string service;
  Timestamp arrival{0};
  std::optional<Timestamp> done;
  ResponseStatus status = ResponseStatus::kOk;
  std::string served;
};

std::filesystem::path FreshWorkDir() {
  static std::atomic<std::uint64_t> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("miniserve-run-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Total ready replicas of a service after each change, collapsed per instant.
std::vector<std::pair<Timestamp, int>> CapacitySeries(const std::vector<TimelinePoint>& points) {
  std::map<std::string, int> per_rev;
  std::vector<std::pair<Timestamp, int>> out;
  for (const auto& p : points) {
    per_rev[p.revision] = p.ready;
    int total = 0;
    for (const auto& [r, n] : per_rev) total += n;
    if (!out.empty() && out.back().first == p.t) {
      out.back().second = total;
    } else {
      out.push_back({p.t, total});
    }
  }
  return out;
}

nlohmann::json BuildServiceReport(const std::string& service, Platform& platform,
                                  const std::vector<ClientRecord>& clients,
                                  const std::map<std::string, std::string>& roles,
                                  Timestamp end) {
  nlohmann::json s;
  std::vector<double> ok_latency_ms;
  std::map<std::string, std::uint64_t> errors;
  std::map<std::string, std::uint64_t> served;
  std::map<std::string, std::uint64_t> served_role;
  std::uint64_t submitted = 0, completed = 0, ok = 0;
  std::optional<Timestamp> first_arrival, last_done;
  for (const auto& c : clients) {
    if (c.service != service) continue;
    ++submitted;
    if (!first_arrival || c.arrival < *first_arrival) first_arrival = c.arrival;
    if (!c.done) continue;
    ++completed;
    if (!last_done || *c.done > *last_done) last_done = c.done;
    if (c.status == ResponseStatus::kOk) {
      ++ok;
      ok_latency_ms.push_back(Ms(*c.done - c.arrival));
      served[c.served] += 1;
      auto r = roles.find(c.served);
      served_role[r == roles.end() ? "unknown" : r->second] += 1;
    } else {
      errors[std::string(StatusName(c.status))] += 1;
    }
  }
  std::sort(ok_latency_ms.begin(), ok_latency_ms.end());
  double mean = 0;
  for (double v : ok_latency_ms) mean += v;
  if (!ok_latency_ms.empty()) mean /= static_cast<double>(ok_latency_ms.size());

  s["requests"] = {{"submitted", submitted},
                   {"completed", completed},
                   {"ok", ok},
                   {"outstanding", submitted - completed}};
  const double span = first_arrival && last_done ? Sec(*last_done - *first_arrival) : 0;
  s["throughput_rps"] = span > 0 ? static_cast<double>(ok) / span : 0.0;
  s["latency_ms"] = {{"p50", NearestRank(ok_latency_ms, 0.50)},
                     {"p95", NearestRank(ok_latency_ms, 0.95)},
                     {"p99", NearestRank(ok_latency_ms, 0.99)},
                     {"mean", mean},
                     {"max", ok_latency_ms.empty() ? 0.0 : ok_latency_ms.back()}};
  std::uint64_t error_total = 0;
  for (const auto& [k, v] : errors) error_total += v;
  s["errors"] = {{"total", error_total}, {"by_class", errors}};
  s["served"] = {{"by_revision", served}, {"by_role", served_role}};

  // Lifecycle-derived facts.
  std::vector<EventRecord> records;
  for (const auto& r : platform.events().records()) {
    if (r.service == service) records.push_back(r);
  }
  std::map<std::string, Timestamp> pending_at;
  nlohmann::json startups = nlohmann::json::array();
  for (const auto& r : records) {
    if (r.event == "Pending") pending_at[r.replica] = r.t;
    if (r.event == "Ready" && pending_at.count(r.replica)) {
      startups.push_back(Ms(r.t - pending_at[r.replica]));
    }
  }
  s["cold_starts"] = {
      {"count", platform.metrics().Value("cold_starts_total", {{"service", service}})},
      {"startup_ms", startups}};
  s["max_concurrent_exec"] = MaxConcurrentExecutions(records);

  const std::vector<TimelinePoint> timeline = ReplicaTimeline(records);
  nlohmann::json tl = nlohmann::json::array();
  for (const auto& p : timeline) tl.push_back({Sec(p.t), p.revision, p.ready});
  s["timeline"] = tl;
  const auto capacity = CapacitySeries(timeline);
  nlohmann::json cap = nlohmann::json::array();
  for (const auto& [t, n] : capacity) cap.push_back({Sec(t), n});
  s["capacity"] = cap;
  s["final_ready"] = capacity.empty() ? 0 : capacity.back().second;
  std::optional<Timestamp> reached_zero;
  for (std::size_t i = 1; i < capacity.size(); ++i) {
    if (capacity[i].second == 0 && capacity[i - 1].second > 0) reached_zero = capacity[i].first;
  }
  s["reached_zero_s"] = reached_zero ? nlohmann::json(Sec(*reached_zero)) : nlohmann::json();

  // Ready count range over the final 60 seconds.
  {
    const Timestamp from = end - std::chrono::seconds(60);
    int lo = INT32_MAX, hi = 0, current = 0;
    for (const auto& [t, n] : capacity) {
      if (t <= from) current = n;
    }
    lo = hi = current;
    for (const auto& [t, n] : capacity) {
      if (t > from && t <= end) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
    }
    s["ready_final_60s"] = {{"min", lo}, {"max", hi}};
  }

  // Rollouts: capacity before the start and the minimum while it ran.
  nlohmann::json rollouts = nlohmann::json::array();
  const auto& events = platform.control_events();
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.service != service || e.kind != "RolloutStarted") continue;
    Timestamp stop = end;
    std::string outcome = "incomplete";
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      const auto& f = events[j];
      if (f.service != service) continue;
      if (f.kind == "RolloutCompleted" || f.kind == "RollbackRequired" ||
          f.kind == "RolloutStarted") {
        stop = f.t;
        outcome = f.kind == "RolloutCompleted"   ? "completed"
                  : f.kind == "RollbackRequired" ? "rolled_back"
                                                 : "superseded";
        break;
      }
    }
    int pre = 0;
    for (const auto& [t, n] : capacity) {
      if (t <= e.t) pre = n;
    }
    int low = pre;
    for (const auto& [t, n] : capacity) {
      if (t > e.t && t <= stop) low = std::min(low, n);
    }
    rollouts.push_back({{"start_s", Sec(e.t)},
                        {"end_s", Sec(stop)},
                        {"outcome", outcome},
                        {"pre_ready", pre},
                        {"min_ready", low}});
  }
  s["rollouts"] = rollouts;

  // Autoscaler decisions and the start of the final zero-desired run.
  nlohmann::json decisions = nlohmann::json::array();
  std::map<std::string, std::optional<Timestamp>> zero_since;
  for (const auto& d : platform.Decisions(service)) {
    const std::string rev = d.revision.ToString();
    decisions.push_back({Sec(d.t), rev, std::string(ModeName(d.mode)), d.stable_avg,
                         d.panic_avg, d.desired, d.current,
                         d.command ? nlohmann::json(*d.command) : nlohmann::json()});
    auto& z = zero_since[rev];
    if (d.desired > 0) {
      z.reset();
    } else if (!z) {
      z = d.t;
    }
  }
  s["decisions"] = decisions;
  nlohmann::json zs = nlohmann::json::object();
  for (const auto& [rev, z] : zero_since) zs[rev] = z ? nlohmann::json(Sec(*z)) : nlohmann::json();
  s["zero_desired_since_s"] = zs;

  const BatchStats b = platform.batch_stats(service);
  nlohmann::json hist = nlohmann::json::object();
  std::size_t modal = 0;
  std::uint64_t modal_count = 0;
  for (const auto& [size, n] : b.sizes) {
    hist[std::to_string(size)] = n;
    if (n >= modal_count) {
      modal = size;
      modal_count = n;
    }
  }
  s["batches"] = {{"histogram", hist},
                  {"modal_size", modal},
                  {"mean_added_wait_ms",
                   b.waits ? Ms(b.total_wait) / static_cast<double>(b.waits) : 0.0}};

  const ShadowStats sh = platform.shadow_stats(service);
  s["shadow"] = {{"total", sh.ok + sh.failed}, {"ok", sh.ok}, {"failed", sh.failed}};
  return s;
}

}  // namespace

double NearestRank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0;
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Scenario Scenario::Parse(std::string_view yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::kMalformedDocument, std::string("scenario: ") + e.what());
  }
  CheckKeys(root, "scenario",
            {"name", "seed", "clock", "settle", "services", "platform", "workload", "actions",
             "assertions"});
  Scenario s;
  s.base_dir = base_dir;
  s.name = Get<std::string>(root, "name", "scenario", "scenario");
  s.seed = Get<std::uint64_t>(root, "seed", 0, "scenario");
  const std::string clock = Get<std::string>(root, "clock", "virtual", "scenario");
  if (clock != "virtual" && clock != "real") {
    throw Error(Errc::kMalformedDocument, "clock must be virtual or real");
  }
  s.virtual_clock = clock == "virtual";
  const double settle = Get<double>(root, "settle", 0, "scenario");
  if (settle < 0) throw Error(Errc::kInvalidArgument, "settle must be >= 0");
  s.settle = FromSeconds(settle);

  if (root["services"]) {
    for (const auto& n : root["services"]) {
      s.services.push_back(Resolve(base_dir, n.as<std::string>()));
    }
  }
  if (const auto p = root["platform"]) {
    CheckKeys(p, "platform",
              {"payloadSink", "payloadCapacity", "payloadPath", "bandwidthBytesPerSecond",
               "recordExec"});
    s.payload_sink = ParseSink(Get<std::string>(p, "payloadSink", "none", "platform"));
    s.payload_capacity = Get<std::size_t>(p, "payloadCapacity", 1024, "platform");
    if (p["payloadPath"]) s.payload_path = Resolve(base_dir, p["payloadPath"].as<std::string>());
    s.bandwidth_bytes_per_second =
        Get<double>(p, "bandwidthBytesPerSecond", s.bandwidth_bytes_per_second, "platform");
    s.record_exec = Get<bool>(p, "recordExec", true, "platform");
  }
  if (root["workload"]) {
    int i = 0;
    for (const auto& n : root["workload"]) {
      const std::string where = "workload[" + std::to_string(i++) + "]";
      CheckKeys(n, where,
                {"pattern", "rate", "duration", "start", "service", "verb", "instances",
                 "burstOn", "burstOff", "traceFile"});
      WorkloadPhase ph;
      ph.arrivals.pattern = ParsePattern(Get<std::string>(n, "pattern", "constant", where));
      ph.arrivals.rate = Get<double>(n, "rate", 0, where);
      const double duration = Get<double>(n, "duration", 0, where);
      if (ph.arrivals.rate < 0) throw Error(Errc::kInvalidArgument, where + ": rate < 0");
      if (duration <= 0 && ph.arrivals.pattern != ArrivalPattern::kTraceFile) {
        throw Error(Errc::kInvalidArgument, where + ": duration must be positive");
      }
      ph.arrivals.duration = FromSeconds(duration);
      ph.arrivals.start = FromSeconds(Get<double>(n, "start", 0, where));
      ph.arrivals.burst_on = FromSeconds(Get<double>(n, "burstOn", 1, where));
      ph.arrivals.burst_off = FromSeconds(Get<double>(n, "burstOff", 1, where));
      if (n["traceFile"]) {
        ph.arrivals.trace_file = Resolve(base_dir, n["traceFile"].as<std::string>());
      }
      ph.service = Get<std::string>(n, "service", "", where);
      if (ph.service.empty()) throw Error(Errc::kMalformedDocument, where + ": service required");
      const std::string verb = Get<std::string>(n, "verb", "predict", where);
      if (verb != "predict" && verb != "explain") {
        throw Error(Errc::kMalformedDocument, where + ": verb must be predict or explain");
      }
      ph.verb = verb == "explain" ? Verb::kExplain : Verb::kPredict;
      if (n["instances"]) ph.instances = ParseInstances(n["instances"], where + ".instances");
      s.workload.push_back(std::move(ph));
    }
  }
  if (root["actions"]) {
    int i = 0;
    for (const auto& n : root["actions"]) {
      const std::string where = "actions[" + std::to_string(i++) + "]";
      CheckKeys(n, where, {"at", "apply", "promote", "delete"});
      TimedAction a;
      a.at = FromSeconds(Get<double>(n, "at", 0, where));
      if (n["apply"]) {
        a.kind = TimedAction::Kind::kApply;
        a.target = Resolve(base_dir, n["apply"].as<std::string>()).string();
      } else if (n["promote"]) {
        a.kind = TimedAction::Kind::kPromote;
        a.target = n["promote"].as<std::string>();
      } else if (n["delete"]) {
        a.kind = TimedAction::Kind::kDelete;
        a.target = n["delete"].as<std::string>();
      } else {
        throw Error(Errc::kMalformedDocument, where + ": needs apply, promote or delete");
      }
      s.actions.push_back(std::move(a));
    }
  }
  if (root["assertions"]) {
    int i = 0;
    for (const auto& n : root["assertions"]) {
      const std::string where = "assertions[" + std::to_string(i++) + "]";
      CheckKeys(n, where, {"path", "min", "max", "equals"});
      AssertionBound b;
      b.path = Get<std::string>(n, "path", "", where);
      if (b.path.empty() || b.path[0] != '/') {
        throw Error(Errc::kMalformedDocument, where + ": path must be a JSON pointer");
      }
      if (n["min"]) b.min = n["min"].as<double>();
      if (n["max"]) b.max = n["max"].as<double>();
      if (n["equals"]) {
        const YAML::Node e = n["equals"];
        try {
          b.equals = e.as<double>();
        } catch (const YAML::Exception&) {
          b.equals = e.as<std::string>();
        }
      }
      s.assertions.push_back(std::move(b));
    }
  }
  return s;
}

Scenario Scenario::Load(const std::filesystem::path& path) {
  return Parse(ReadFile(path), path.parent_path());
}

Timestamp Scenario::EndTime() const {
  Timestamp last{0};
  for (const auto& p : workload) last = std::max(last, p.arrivals.start + p.arrivals.duration);
  for (const auto& a : actions) last = std::max(last, a.at);
  return last + settle;
}

nlohmann::json RunScenario(const Scenario& scenario, std::optional<std::uint64_t> seed_override) {
  const std::uint64_t seed = seed_override.value_or(scenario.seed);
  std::vector<InferenceServiceSpec> specs;
  for (const auto& path : scenario.services) specs.push_back(ParseSpec(ReadFile(path)));

  std::unique_ptr<Clock> clock;
  VirtualClock* vclock = nullptr;
  RealClock* rclock = nullptr;
  if (scenario.virtual_clock) {
    auto v = std::make_unique<VirtualClock>();
    vclock = v.get();
    clock = std::move(v);
  } else {
    auto r = std::make_unique<RealClock>();
    rclock = r.get();
    clock = std::move(r);
  }

  const std::filesystem::path work_dir = FreshWorkDir();
  PlatformOptions po;
  po.seed = seed;
  po.work_dir = work_dir / "replicas";
  po.storage.base_dir = scenario.base_dir;
  po.storage.bandwidth_bytes_per_second = scenario.bandwidth_bytes_per_second;
  po.record_exec = scenario.record_exec;
  po.payload_sink = scenario.payload_sink;
  po.payload_capacity = scenario.payload_capacity;
  po.payload_path = scenario.payload_path.empty() ? work_dir / "payloads.ndjson"
                                                  : scenario.payload_path;
  auto platform = std::make_unique<Platform>(*clock, po);

  std::vector<ClientRecord> clients;
  std::map<std::string, std::string> roles;
  nlohmann::json action_log = nlohmann::json::array();
  const Timestamp end = scenario.EndTime();

  auto setup = [&] {
    for (const auto& spec : specs) platform->Apply(spec);
    for (const auto& a : scenario.actions) {
      clock->ScheduleAt(
          a.at,
          [&, a] {
            nlohmann::json entry = {{"t", Sec(clock->Now())}};
            try {
              switch (a.kind) {
                case TimedAction::Kind::kApply: {
                  const ApplyResult r = platform->Apply(ParseSpec(ReadFile(a.target)));
                  entry["action"] = "apply";
                  entry["target"] = std::filesystem::path(a.target).filename().string();
                  entry["generation"] = r.generation;
                  entry["actions"] = r.actions;
                  break;
                }
                case TimedAction::Kind::kPromote: {
                  const ApplyResult r = platform->Promote(a.target);
                  entry["action"] = "promote";
                  entry["target"] = a.target;
                  entry["generation"] = r.generation;
                  entry["actions"] = r.actions;
                  break;
                }
                case TimedAction::Kind::kDelete:
                  platform->Delete(a.target);
                  entry["action"] = "delete";
                  entry["target"] = a.target;
                  break;
              }
            } catch (const Error& e) {
              entry["error"] = e.what();
            }
            action_log.push_back(entry);
          },
          EventPriority::kControl);
    }
    std::uint64_t phase_index = 0;
    for (const auto& phase : scenario.workload) {
      ArrivalSpec as = phase.arrivals;
      as.seed = seed ^ ((phase_index + 1) * 0x9E3779B97F4A7C15ULL);
      ++phase_index;
      for (Timestamp t : GenerateArrivals(as)) {
        clock->ScheduleAt(
            t,
            [&, service = phase.service, verb = phase.verb, instances = phase.instances] {
              const std::size_t idx = clients.size();
              clients.push_back({service, clock->Now(), std::nullopt, ResponseStatus::kOk, ""});
              RequestEnvelope env;
              env.service = service;
              env.verb = verb;
              env.payload = instances;
              platform->Submit(std::move(env), [&, idx](InferenceResponse resp) {
                ClientRecord& c = clients[idx];
                if (c.done) return;
                c.done = clock->Now();
                c.status = resp.status;
                c.served = resp.served_revision ? resp.served_revision->ToString() : "";
              });
            },
            EventPriority::kArrival);
      }
    }
  };

  nlohmann::json report;
  auto build = [&] {
    platform->FlushPayloads();
    for (const auto& e : platform->control_events()) {
      if (e.kind == "RevisionRegistered") {
        const auto sp = e.detail.find(' ');
        roles[e.detail.substr(0, sp)] = e.detail.substr(sp + 1);
      }
    }
    std::set<std::string> names;
    for (const auto& spec : specs) names.insert(spec.name);
    for (const auto& p : scenario.workload) names.insert(p.service);
    report["scenario"] = scenario.name;
    report["seed"] = seed;
    report["clock"] = scenario.virtual_clock ? "virtual" : "real";
    report["end_s"] = Sec(end);
    for (const auto& n : names) {
      report["services"][n] = BuildServiceReport(n, *platform, clients, roles, end);
    }
    nlohmann::json ctl = nlohmann::json::array();
    for (const auto& e : platform->control_events()) {
      ctl.push_back({Sec(e.t), e.service, e.kind, e.detail});
    }
    report["control_events"] = ctl;
    report["actions"] = action_log;
    if (auto* logger = platform->payload_logger()) {
      report["payload"] = {{"submitted", logger->submitted()},
                           {"written", logger->written()},
                           {"dropped", logger->dropped()},
                           {"buffered", logger->buffered()},
                           {"capacity", logger->capacity()}};
    } else {
      report["payload"] = {{"submitted", 0}, {"written", 0}, {"dropped", 0}, {"buffered", 0},
                           {"capacity", 0}};
    }
  };

  if (vclock) {
    setup();
    vclock->RunUntil(end);
    build();
    platform->Shutdown();
  } else {
    std::promise<void> ready;
    rclock->Post([&] {
      setup();
      ready.set_value();
    });
    ready.get_future().get();
    while (rclock->Now() < end) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    std::promise<void> built;
    rclock->Post([&] {
      build();
      platform->Shutdown();
      built.set_value();
    });
    built.get_future().get();
    rclock->Stop();
  }
  platform.reset();
  clock.reset();
  std::error_code ec;
  std::filesystem::remove_all(work_dir, ec);
  report["assertions"] = nlohmann::json::array();
  for (const auto& v : CheckAssertions(scenario.assertions, report)) {
    report["assertions"].push_back(v);
  }
  return report;
}

std::vector<std::string> CheckAssertions(const std::vector<AssertionBound>& bounds,
                                         const nlohmann::json& report) {
  std::vector<std::string> out;
  for (const auto& b : bounds) {
    nlohmann::json value;
    try {
      value = report.at(nlohmann::json::json_pointer(b.path));
    } catch (const std::exception&) {
      out.push_back(b.path + ": missing from report");
      continue;
    }
    std::ostringstream msg;
    msg << b.path << " = " << value.dump();
    if (b.equals) {
      const bool same = (b.equals->is_number() && value.is_number())
                            ? b.equals->get<double>() == value.get<double>()
                            : *b.equals == value;
      if (!same) out.push_back(msg.str() + ", expected " + b.equals->dump());
    }
    if (b.min || b.max) {
      if (!value.is_number()) {
        out.push_back(msg.str() + ": not a number");
        continue;
      }
      const double v = value.get<double>();
      if (b.min && v < *b.min) out.push_back(msg.str() + " < min " + std::to_string(*b.min));
      if (b.max && v > *b.max) out.push_back(msg.str() + " > max " + std::to_string(*b.max));
    }
  }
  return out;
}

std::string RenderReportTable(const nlohmann::json& report) {
  std::ostringstream out;
  out << "scenario " << report.value("scenario", "") << "  seed " << report.value("seed", 0)
      << "  clock " << report.value("clock", "") << "  end " << report.value("end_s", 0.0)
      << "s\n";
  out << std::left << std::setw(16) << "service" << std::right << std::setw(9) << "requests"
      << std::setw(8) << "ok" << std::setw(8) << "errors" << std::setw(10) << "p50 ms"
      << std::setw(10) << "p95 ms" << std::setw(10) << "p99 ms" << std::setw(7) << "cold"
      << std::setw(8) << "shadow" << std::setw(7) << "ready" << "\n";
  if (report.contains("services")) {
    for (const auto& [name, s] : report["services"].items()) {
      out << std::left << std::setw(16) << name << std::right << std::setw(9)
          << s["requests"]["submitted"].get<std::uint64_t>() << std::setw(8)
          << s["requests"]["ok"].get<std::uint64_t>() << std::setw(8)
          << s["errors"]["total"].get<std::uint64_t>() << std::fixed << std::setprecision(1)
          << std::setw(10) << s["latency_ms"]["p50"].get<double>() << std::setw(10)
          << s["latency_ms"]["p95"].get<double>() << std::setw(10)
          << s["latency_ms"]["p99"].get<double>() << std::setw(7)
          << s["cold_starts"]["count"].get<double>() << std::setw(8)
          << s["shadow"]["total"].get<std::uint64_t>() << std::setw(7)
          << s["final_ready"].get<int>() << "\n";
      out.unsetf(std::ios::fixed);
    }
  }
  const auto& p = report["payload"];
  out << "payload: submitted " << p["submitted"] << ", written " << p["written"] << ", dropped "
      << p["dropped"] << "\n";
  if (report.contains("assertions") && !report["assertions"].empty()) {
    out << "assertion failures:\n";
    for (const auto& a : report["assertions"]) out << "  " << a.get<std::string>() << "\n";
  }
  return out.str();
}

}  // namespace miniserve

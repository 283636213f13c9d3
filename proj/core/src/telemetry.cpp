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

#include "miniserve/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "miniserve/error.hpp"

namespace miniserve {
namespace {

std::string FormatNumber(double v) {
  if (std::isinf(v)) return v > 0 ? "+Inf" : "-Inf";
  if (std::isnan(v)) return "NaN";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string FormatLabels(const Labels& labels, const std::string& extra_key = "",
                         const std::string& extra_value = "") {
  if (labels.empty() && extra_key.empty()) return "";
  std::string out = "{";
  bool first = true;
  auto add = [&](const std::string& k, const std::string& v) {
    if (!first) out += ",";
    first = false;
    out += k + "=\"";
    for (char c : v) {
      if (c == '"' || c == '\\') out += '\\';
      if (c == '\n') {
        out += "\\n";
        continue;
      }
      out += c;
    }
    out += "\"";
  };
  for (const auto& [k, v] : labels) add(k, v);
  if (!extra_key.empty()) add(extra_key, extra_value);
  return out + "}";
}

const char* TypeName(MetricsRegistry::Type t) {
  switch (t) {
    case MetricsRegistry::Type::kCounter: return "counter";
    case MetricsRegistry::Type::kGauge: return "gauge";
    case MetricsRegistry::Type::kHistogram: return "histogram";
  }
  return "untyped";
}

}  // namespace

double HistogramSnapshot::Quantile(double q) const {
  if (count == 0) return 0;
  q = std::clamp(q, 0.0, 1.0);
  const double rank = q * static_cast<double>(count);
  std::uint64_t cumulative = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::uint64_t before = cumulative;
    cumulative += counts[i];
    if (static_cast<double>(cumulative) >= rank && counts[i] > 0) {
      if (i == bounds.size()) return bounds.empty() ? 0 : bounds.back();
      const double lo = i == 0 ? 0 : bounds[i - 1];
      const double hi = bounds[i];
      const double frac = (rank - static_cast<double>(before)) /
                          static_cast<double>(counts[i]);
      return lo + (hi - lo) * std::clamp(frac, 0.0, 1.0);
    }
  }
  return bounds.empty() ? 0 : bounds.back();
}

std::vector<double> MetricsRegistry::LatencyBuckets() {
  std::vector<double> b;
  for (int k = 0; k <= 16; ++k) b.push_back(0.001 * std::ldexp(1.0, k));
  return b;
}

std::vector<double> MetricsRegistry::SizeBuckets() {
  std::vector<double> b;
  for (int k = 0; k <= 10; ++k) b.push_back(std::ldexp(1.0, k));
  return b;
}

std::unique_ptr<MetricsRegistry> MetricsRegistry::WithPlatformMetrics() {
  auto r = std::make_unique<MetricsRegistry>();
  r->RegisterCounter("requests_total", "Client requests by service, revision and status.");
  r->RegisterCounter("errors_total", "Failed client requests by service and class.");
  r->RegisterCounter("shadow_total", "Mirrored requests by service and outcome.");
  r->RegisterCounter("cold_starts_total", "Requests held while a revision had no ready replica.");
  r->RegisterCounter("replica_starts_total", "Replica start attempts by outcome.");
  r->RegisterCounter("payload_logged_total", "Payload records written to the sink.");
  r->RegisterCounter("payload_dropped_total", "Payload records dropped on overflow.");
  r->RegisterGauge("ready_replicas", "Ready replicas per revision.");
  r->RegisterGauge("in_flight", "Admitted, unfinished requests per revision.");
  r->RegisterGauge("buffered", "Requests held by the activator per revision.");
  r->RegisterHistogram("request_latency_seconds", "End-to-end request latency.");
  r->RegisterHistogram("startup_duration_seconds", "Replica startup duration.");
  r->RegisterHistogram("batch_size", "Requests per executed batch.", SizeBuckets());
  return r;
}

void MetricsRegistry::Register(const std::string& name, Type type, const std::string& help,
                               std::vector<double> bounds) {
  if (name.empty()) throw Error(Errc::kInvalidArgument, "empty metric name");
  if (!std::is_sorted(bounds.begin(), bounds.end())) {
    throw Error(Errc::kInvalidArgument, "histogram bounds must be sorted: " + name);
  }
  std::lock_guard lock(mu_);
  auto [it, inserted] = families_.try_emplace(name);
  if (!inserted) {
    if (it->second.type != type) {
      throw Error(Errc::kInvalidArgument, "metric re-registered with another type: " + name);
    }
    return;
  }
  it->second.type = type;
  it->second.help = help;
  it->second.bounds = std::move(bounds);
  if (type != Type::kHistogram) {
    it->second.series.try_emplace(Labels{});
  }
}

void MetricsRegistry::RegisterCounter(const std::string& name, const std::string& help) {
  Register(name, Type::kCounter, help, {});
}

void MetricsRegistry::RegisterGauge(const std::string& name, const std::string& help) {
  Register(name, Type::kGauge, help, {});
}

void MetricsRegistry::RegisterHistogram(const std::string& name, const std::string& help,
                                        std::vector<double> bounds) {
  Register(name, Type::kHistogram, help, std::move(bounds));
}

MetricsRegistry::Family& MetricsRegistry::Lookup(const std::string& name) {
  auto it = families_.find(name);
  if (it == families_.end()) throw Error(Errc::kUnknownMetric, name);
  return it->second;
}

const MetricsRegistry::Family& MetricsRegistry::Lookup(const std::string& name) const {
  auto it = families_.find(name);
  if (it == families_.end()) throw Error(Errc::kUnknownMetric, name);
  return it->second;
}

void MetricsRegistry::Observe(const std::string& name, double value, const Labels& labels) {
  std::lock_guard lock(mu_);
  Family& f = Lookup(name);
  Series& s = f.series[labels];
  switch (f.type) {
    case Type::kCounter:
      if (value < 0) throw Error(Errc::kInvalidArgument, "counter decrement: " + name);
      s.value += value;
      break;
    case Type::kGauge:
      s.value = value;
      break;
    case Type::kHistogram: {
      HistogramSnapshot& h = s.hist;
      if (h.counts.empty()) {
        h.bounds = f.bounds;
        h.counts.assign(f.bounds.size() + 1, 0);
      }
      auto pos = std::lower_bound(f.bounds.begin(), f.bounds.end(), value);
      h.counts[static_cast<std::size_t>(pos - f.bounds.begin())] += 1;
      h.count += 1;
      h.sum += value;
      break;
    }
  }
}

void MetricsRegistry::Increment(const std::string& name, const Labels& labels, double by) {
  {
    std::lock_guard lock(mu_);
    if (Lookup(name).type != Type::kCounter) {
      throw Error(Errc::kInvalidArgument, "not a counter: " + name);
    }
  }
  Observe(name, by, labels);
}

void MetricsRegistry::Set(const std::string& name, double value, const Labels& labels) {
  {
    std::lock_guard lock(mu_);
    if (Lookup(name).type != Type::kGauge) {
      throw Error(Errc::kInvalidArgument, "not a gauge: " + name);
    }
  }
  Observe(name, value, labels);
}

double MetricsRegistry::Value(const std::string& name, const Labels& labels) const {
  std::lock_guard lock(mu_);
  const Family& f = Lookup(name);
  auto it = f.series.find(labels);
  if (it == f.series.end()) return 0;
  return f.type == Type::kHistogram ? it->second.hist.sum : it->second.value;
}

double MetricsRegistry::Total(const std::string& name) const {
  std::lock_guard lock(mu_);
  const Family& f = Lookup(name);
  double total = 0;
  for (const auto& [labels, s] : f.series) {
    total += f.type == Type::kHistogram ? static_cast<double>(s.hist.count) : s.value;
  }
  return total;
}

HistogramSnapshot MetricsRegistry::Histogram(const std::string& name,
                                             const Labels& labels) const {
  std::lock_guard lock(mu_);
  const Family& f = Lookup(name);
  if (f.type != Type::kHistogram) {
    throw Error(Errc::kInvalidArgument, "not a histogram: " + name);
  }
  auto it = f.series.find(labels);
  if (it == f.series.end() || it->second.hist.counts.empty()) {
    HistogramSnapshot empty;
    empty.bounds = f.bounds;
    empty.counts.assign(f.bounds.size() + 1, 0);
    return empty;
  }
  return it->second.hist;
}

bool MetricsRegistry::Has(const std::string& name) const {
  std::lock_guard lock(mu_);
  return families_.count(name) > 0;
}

std::string MetricsRegistry::Render() const {
  std::lock_guard lock(mu_);
  std::ostringstream out;
  for (const auto& [name, f] : families_) {
    out << "# HELP " << name << " " << f.help << "\n";
    out << "# TYPE " << name << " " << TypeName(f.type) << "\n";
    for (const auto& [labels, s] : f.series) {
      if (f.type != Type::kHistogram) {
        out << name << FormatLabels(labels) << " " << FormatNumber(s.value) << "\n";
        continue;
      }
      const HistogramSnapshot& h = s.hist;
      std::uint64_t cumulative = 0;
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        cumulative += h.counts[i];
        const std::string le = i < h.bounds.size() ? FormatNumber(h.bounds[i]) : "+Inf";
        out << name << "_bucket" << FormatLabels(labels, "le", le) << " " << cumulative << "\n";
      }
      out << name << "_sum" << FormatLabels(labels) << " " << FormatNumber(h.sum) << "\n";
      out << name << "_count" << FormatLabels(labels) << " " << h.count << "\n";
      for (const char* q : {"0.5", "0.95", "0.99"}) {
        out << name << FormatLabels(labels, "quantile", q) << " "
            << FormatNumber(h.Quantile(std::stod(q))) << "\n";
      }
    }
  }
  return out.str();
}

std::string PayloadRecord::ToJsonLine() const {
  nlohmann::json j;
  j["request_id"] = request_id;
  j["service"] = service;
  j["revision"] = revision;
  j["timestamp_us"] = timestamp.count();
  j["request"] = request;
  j["response"] = response;
  if (!error.empty()) j["error"] = error;
  j["latency_us"] = latency.count();
  return j.dump();
}

FilePayloadSink::FilePayloadSink(const std::filesystem::path& path)
    : out_(path, std::ios::app) {
  if (!out_) throw Error(Errc::kInvalidArgument, "cannot open payload log: " + path.string());
}

bool FilePayloadSink::Write(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  return static_cast<bool>(out_);
}

bool MemoryPayloadSink::Write(const std::string& line) {
  std::lock_guard lock(mu_);
  lines_.push_back(line);
  return true;
}

std::vector<std::string> MemoryPayloadSink::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

PayloadLogger::PayloadLogger(std::unique_ptr<PayloadSink> sink, std::size_t capacity,
                             MetricsRegistry* metrics)
    : sink_(std::move(sink)), capacity_(capacity), metrics_(metrics) {
  if (!sink_) throw Error(Errc::kInvalidArgument, "payload logger needs a sink");
  if (capacity_ == 0) throw Error(Errc::kInvalidArgument, "payload buffer capacity must be > 0");
}

PayloadLogger::~PayloadLogger() { StopBackgroundDrainer(); }

bool PayloadLogger::Log(PayloadRecord record) {
  std::string line = record.ToJsonLine();
  bool dropped = false;
  {
    std::lock_guard lock(mu_);
    ++submitted_;
    if (buffer_.size() >= capacity_) {
      buffer_.pop_front();
      ++dropped_;
      dropped = true;
    }
    buffer_.push_back(std::move(line));
  }
  cv_.notify_one();
  if (dropped && metrics_ != nullptr) {
    metrics_->Increment("payload_dropped_total");
  }
  return true;
}

std::size_t PayloadLogger::DrainSome(std::size_t max) {
  std::lock_guard sink_lock(sink_mu_);
  std::size_t n = 0;
  while (n < max) {
    std::string line;
    {
      std::lock_guard lock(mu_);
      if (buffer_.empty()) break;
      line = buffer_.front();
    }
    if (!sink_->Write(line)) break;
    {
      std::lock_guard lock(mu_);
      // A concurrent Log() may have evicted the record we just wrote; only
      // pop when the head is still that record.
      if (!buffer_.empty() && buffer_.front() == line) buffer_.pop_front();
      ++written_;
    }
    ++n;
  }
  if (n > 0 && metrics_ != nullptr) {
    metrics_->Increment("payload_logged_total", {}, static_cast<double>(n));
  }
  return n;
}

void PayloadLogger::StartBackgroundDrainer(std::chrono::milliseconds idle_poll) {
  if (drainer_.joinable()) return;
  {
    std::lock_guard lock(mu_);
    stop_ = false;
  }
  drainer_ = std::thread([this, idle_poll] {
    for (;;) {
      {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, idle_poll, [this] { return stop_ || !buffer_.empty(); });
        if (stop_) return;
      }
      if (DrainSome() == 0) {
        // Sink refused; back off before retrying.
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, idle_poll, [this] { return stop_; });
        if (stop_) return;
      }
    }
  });
}

void PayloadLogger::StopBackgroundDrainer() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  if (drainer_.joinable()) drainer_.join();
}

std::uint64_t PayloadLogger::submitted() const {
  std::lock_guard lock(mu_);
  return submitted_;
}

std::uint64_t PayloadLogger::written() const {
  std::lock_guard lock(mu_);
  return written_;
}

std::uint64_t PayloadLogger::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::size_t PayloadLogger::buffered() const {
  std::lock_guard lock(mu_);
  return buffer_.size();
}

std::vector<TimelinePoint> ReplicaTimeline(const std::vector<EventRecord>& records) {
  static const std::set<std::string> kKnown = {"Pending", "Initializing", "Ready",
                                               "Draining", "Stopped"};
  std::map<std::string, std::string> state;  // replica -> last lifecycle event
  std::map<std::string, int> ready;          // revision -> ready count
  std::map<std::string, std::size_t> last_point;
  std::vector<TimelinePoint> out;
  Timestamp prev{std::numeric_limits<std::int64_t>::min()};

  auto emit = [&](Timestamp t, const std::string& rev) {
    auto lp = last_point.find(rev);
    if (lp != last_point.end() && out[lp->second].t == t) {
      out[lp->second].ready = ready[rev];
      return;
    }
    last_point[rev] = out.size();
    out.push_back({t, rev, ready[rev]});
  };

  for (const EventRecord& r : records) {
    if (!r.IsLifecycle()) continue;
    if (r.t < prev) throw Error(Errc::kMalformedEventLog, "timestamps go backwards");
    prev = r.t;
    if (!kKnown.count(r.event)) {
      throw Error(Errc::kMalformedEventLog, "unknown lifecycle event: " + r.event);
    }
    auto it = state.find(r.replica);
    const std::string before = it == state.end() ? "" : it->second;
    if (before == "Stopped") {
      throw Error(Errc::kMalformedEventLog, "event after Stopped for " + r.replica);
    }
    if (r.event == "Ready") {
      if (before == "Ready" || before == "Draining") {
        throw Error(Errc::kMalformedEventLog, "duplicate Ready for " + r.replica);
      }
      ++ready[r.revision];
      emit(r.t, r.revision);
    } else if ((r.event == "Draining" || r.event == "Stopped") && before == "Ready") {
      --ready[r.revision];
      emit(r.t, r.revision);
    }
    state[r.replica] = r.event;
  }
  return out;
}

std::vector<TimelinePoint> ReplicaTimeline(std::string_view ndjson) {
  return ReplicaTimeline(EventLog::ParseNdjson(ndjson));
}

}  // namespace miniserve

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

#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <thread>

#include "miniserve/error.hpp"
#include "miniserve/telemetry.hpp"
#include "test_support.hpp"

namespace miniserve {
namespace {

TEST(MetricsTest, FreshRegistryReadsZero) {
  auto m = MetricsRegistry::WithPlatformMetrics();
  for (const char* name : {"requests_total", "errors_total", "shadow_total", "cold_starts_total",
                           "payload_dropped_total", "ready_replicas"}) {
    EXPECT_EQ(m->Value(name), 0) << name;
    EXPECT_EQ(m->Total(name), 0) << name;
  }
  EXPECT_EQ(m->Histogram("request_latency_seconds").count, 0u);
}

TEST(MetricsTest, HistogramCountAndSum) {
  MetricsRegistry m;
  m.RegisterHistogram("lat", "latency");
  for (double ms : {10.0, 20.0, 30.0}) m.Observe("lat", ms / 1000, {{"service", "a"}});
  const auto h = m.Histogram("lat", {{"service", "a"}});
  EXPECT_EQ(h.count, 3u);
  EXPECT_NEAR(h.sum, 0.06, 1e-12);
  std::uint64_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, 3u);
  EXPECT_EQ(h.counts.size(), h.bounds.size() + 1);
}

TEST(MetricsTest, HistogramBucketsMatchLinearScan) {
  MetricsRegistry m;
  m.RegisterHistogram("lat", "latency");
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> dist(-4, 1.5);
  const auto bounds = MetricsRegistry::LatencyBuckets();
  std::vector<std::uint64_t> expect(bounds.size() + 1, 0);
  for (int i = 0; i < 5000; ++i) {
    const double v = dist(rng);
    m.Observe("lat", v);
    std::size_t b = 0;
    while (b < bounds.size() && v > bounds[b]) ++b;
    ++expect[b];
  }
  EXPECT_EQ(m.Histogram("lat").counts, expect);
}

TEST(MetricsTest, QuantileInterpolatesInsideBucket) {
  HistogramSnapshot h;
  h.bounds = {1, 2, 4};
  h.counts = {0, 4, 0, 0};
  h.count = 4;
  EXPECT_DOUBLE_EQ(h.Quantile(0.5), 1.5);
  EXPECT_DOUBLE_EQ(h.Quantile(1.0), 2.0);
  EXPECT_EQ(HistogramSnapshot{}.Quantile(0.5), 0);
}

TEST(MetricsTest, CounterGaugeSemantics) {
  MetricsRegistry m;
  m.RegisterCounter("c", "counter");
  m.RegisterGauge("g", "gauge");
  m.Increment("c", {{"k", "1"}});
  m.Increment("c", {{"k", "1"}}, 2);
  m.Increment("c", {{"k", "2"}});
  m.Set("g", 5);
  m.Set("g", 3);
  EXPECT_EQ(m.Value("c", {{"k", "1"}}), 3);
  EXPECT_EQ(m.Total("c"), 4);
  EXPECT_EQ(m.Value("g"), 3);
  EXPECT_TRUE(m.Has("c"));
  EXPECT_FALSE(m.Has("nope"));
}

TEST(MetricsTest, UnknownMetric) {
  MetricsRegistry m;
  try {
    m.Increment("missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownMetric);
  }
  EXPECT_THROW(m.Value("missing"), Error);
}

TEST(MetricsTest, RenderIsSortedAndStable) {
  MetricsRegistry m;
  m.RegisterCounter("zeta_total", "z");
  m.RegisterGauge("alpha", "a");
  m.Increment("zeta_total", {{"service", "b"}});
  m.Increment("zeta_total", {{"service", "a"}});
  m.Set("alpha", 2);
  const std::string text = m.Render();
  EXPECT_EQ(text, m.Render());
  EXPECT_LT(text.find("# TYPE alpha gauge"), text.find("# TYPE zeta_total counter"));
  EXPECT_LT(text.find("zeta_total{service=\"a\"} 1"), text.find("zeta_total{service=\"b\"} 1"));
  EXPECT_NE(text.find("alpha 2\n"), std::string::npos);
}

TEST(MetricsTest, RenderHistogramIsCumulative) {
  MetricsRegistry m;
  m.RegisterHistogram("h", "h", {1, 2});
  m.Observe("h", 0.5);
  m.Observe("h", 1.5);
  m.Observe("h", 9);
  const std::string text = m.Render();
  EXPECT_NE(text.find("h_bucket{le=\"1\"} 1\n"), std::string::npos);
  EXPECT_NE(text.find("h_bucket{le=\"2\"} 2\n"), std::string::npos);
  EXPECT_NE(text.find("h_bucket{le=\"+Inf\"} 3\n"), std::string::npos);
  EXPECT_NE(text.find("h_count 3\n"), std::string::npos);
}

TEST(MetricsTest, ConcurrentIncrementsAreCounted) {
  MetricsRegistry m;
  m.RegisterCounter("c", "c");
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 1000; ++i) m.Increment("c");
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(m.Value("c"), 4000);
}

PayloadRecord Record(std::uint64_t id) {
  PayloadRecord r;
  r.request_id = id;
  r.service = "logged";
  r.revision = "00000000000000aa";
  r.request = {{"instances", {{1, 2}}}};
  r.response = {{"predictions", {3}}};
  return r;
}

TEST(PayloadLoggerTest, StalledSinkDropsOldest) {
  MetricsRegistry m;
  m.RegisterCounter("payload_dropped_total", "d");
  m.RegisterCounter("payload_logged_total", "l");
  PayloadLogger logger(std::make_unique<StalledPayloadSink>(), 1024, &m);
  for (std::uint64_t i = 0; i < 2000; ++i) EXPECT_TRUE(logger.Log(Record(i)));
  EXPECT_EQ(logger.DrainSome(), 0u);
  EXPECT_EQ(logger.submitted(), 2000u);
  EXPECT_EQ(logger.dropped(), 976u);
  EXPECT_EQ(logger.written(), 0u);
  EXPECT_EQ(logger.buffered(), 1024u);
  EXPECT_EQ(m.Value("payload_dropped_total"), 976);
}

TEST(PayloadLoggerTest, HealthySinkKeepsEveryRecordInOrder) {
  auto sink = std::make_unique<MemoryPayloadSink>();
  auto* view = sink.get();
  PayloadLogger logger(std::move(sink), 16);
  for (std::uint64_t i = 0; i < 100; ++i) {
    logger.Log(Record(i));
    if (i % 8 == 7) logger.DrainSome();
  }
  logger.DrainSome();
  const auto lines = view->lines();
  ASSERT_EQ(lines.size(), 100u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    EXPECT_EQ(nlohmann::json::parse(lines[i])["request_id"], i);
  }
  EXPECT_EQ(logger.dropped(), 0u);
}

TEST(PayloadLoggerTest, BackgroundDrainerWritesEverything) {
  auto sink = std::make_unique<MemoryPayloadSink>();
  auto* view = sink.get();
  PayloadLogger logger(std::move(sink), 4096);
  logger.StartBackgroundDrainer(std::chrono::milliseconds(1));
  for (std::uint64_t i = 0; i < 500; ++i) logger.Log(Record(i));
  for (int i = 0; i < 2000 && logger.written() < 500; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  logger.StopBackgroundDrainer();
  EXPECT_EQ(logger.written(), 500u);
  EXPECT_EQ(view->lines().size(), 500u);
}

TEST(PayloadLoggerTest, FileSinkAppendsJsonLines) {
  testing::TempDir dir;
  const auto path = dir / "payload.ndjson";
  {
    PayloadLogger logger(std::make_unique<FilePayloadSink>(path), 8);
    auto r = Record(7);
    r.response = nullptr;
    r.error = "PredictorError";
    logger.Log(r);
    logger.Log(Record(8));
    EXPECT_EQ(logger.DrainSome(), 2u);
  }
  std::istringstream in(testing::ReadFile(path));
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["request_id"], 7);
  EXPECT_TRUE(rows[0]["response"].is_null());
  EXPECT_EQ(rows[0]["error"], "PredictorError");
  EXPECT_EQ(rows[1]["response"]["predictions"][0], 3);
}

TEST(PayloadLoggerTest, RejectsBadConstruction) {
  EXPECT_THROW(PayloadLogger(nullptr), Error);
  EXPECT_THROW(PayloadLogger(std::make_unique<MemoryPayloadSink>(), 0), Error);
}

// Sink that refuses writes at random; conservation must hold throughout.
class FlakySink final : public PayloadSink {
 public:
  explicit FlakySink(std::uint64_t seed) : rng_(seed) {}
  bool Write(const std::string&) override { return rng_() % 3 != 0; }

 private:
  std::mt19937_64 rng_;
};

TEST(PayloadLoggerProperty, Conservation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cap = 1 + rng() % 32;
    PayloadLogger logger(std::make_unique<FlakySink>(rng()), cap);
    for (std::uint64_t i = 0; i < 500; ++i) {
      logger.Log(Record(i));
      if (rng() % 4 == 0) logger.DrainSome(rng() % 8);
      ASSERT_LE(logger.buffered(), cap);
      ASSERT_EQ(logger.submitted(), logger.written() + logger.dropped() + logger.buffered());
    }
  }
}

EventRecord Ev(double t, const std::string& replica, const std::string& rev,
               const std::string& event) {
  EventRecord r;
  r.t = FromSeconds(t);
  r.replica = replica;
  r.revision = rev;
  r.service = "svc";
  r.event = event;
  return r;
}

TEST(TimelineTest, ReadyThenStopped) {
  const std::vector<EventRecord> log = {
      Ev(0, "r1", "a", "Pending"), Ev(0, "r1", "a", "Initializing"), Ev(3, "r1", "a", "Ready"),
      Ev(50, "r1", "a", "Draining"), Ev(50, "r1", "a", "Stopped")};
  const auto tl = ReplicaTimeline(log);
  EXPECT_EQ(tl, (std::vector<TimelinePoint>{{FromSeconds(3), "a", 1}, {FromSeconds(50), "a", 0}}));
}

TEST(TimelineTest, InterleavedRevisions) {
  const std::vector<EventRecord> log = {
      Ev(1, "a1", "a", "Ready"),   Ev(2, "b1", "b", "Ready"),    Ev(2, "a2", "a", "Ready"),
      Ev(4, "a1", "a", "Draining"), Ev(5, "b1", "b", "Stopped"), Ev(6, "a1", "a", "Stopped")};
  const auto tl = ReplicaTimeline(log);
  EXPECT_EQ(tl, (std::vector<TimelinePoint>{{FromSeconds(1), "a", 1},
                                            {FromSeconds(2), "b", 1},
                                            {FromSeconds(2), "a", 2},
                                            {FromSeconds(4), "a", 1},
                                            {FromSeconds(5), "b", 0}}));
}

TEST(TimelineTest, IgnoresExecRecords) {
  auto exec = Ev(4, "r1", "a", "ExecStart");
  exec.size = 1;
  const auto tl = ReplicaTimeline({Ev(3, "r1", "a", "Ready"), exec});
  EXPECT_EQ(tl.size(), 1u);
}

TEST(TimelineTest, MalformedLogs) {
  auto code = [](const std::vector<EventRecord>& log) {
    try {
      ReplicaTimeline(log);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::kAssertionFailed;
  };
  EXPECT_EQ(code({Ev(1, "r", "a", "Ready"), Ev(2, "r", "a", "Ready")}), Errc::kMalformedEventLog);
  EXPECT_EQ(code({Ev(1, "r", "a", "Stopped"), Ev(2, "r", "a", "Ready")}),
            Errc::kMalformedEventLog);
  EXPECT_EQ(code({Ev(2, "r", "a", "Pending"), Ev(1, "r", "a", "Ready")}),
            Errc::kMalformedEventLog);
  EXPECT_EQ(code({Ev(1, "r", "a", "Exploded")}), Errc::kMalformedEventLog);
}

TEST(TimelineTest, NdjsonInputMatchesRecords) {
  EventLog log;
  for (const auto& r : {Ev(0, "r1", "a", "Pending"), Ev(3, "r1", "a", "Ready"),
                        Ev(9, "r1", "a", "Stopped")}) {
    log.Append(r);
  }
  EXPECT_EQ(ReplicaTimeline(log.ToNdjson()), ReplicaTimeline(log.records()));
}

}  // namespace
}  // namespace miniserve

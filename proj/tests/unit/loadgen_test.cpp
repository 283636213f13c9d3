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

#include <algorithm>
#include <cmath>

#include "miniserve/error.hpp"
#include "miniserve/loadgen.hpp"
#include "test_support.hpp"

namespace miniserve {
namespace {

ArrivalSpec Make(ArrivalPattern p, double rate, double seconds, std::uint64_t seed = 1) {
  ArrivalSpec s;
  s.pattern = p;
  s.rate = rate;
  s.duration = FromSeconds(seconds);
  s.seed = seed;
  return s;
}

TEST(LoadgenTest, ConstantIsEvenlySpaced) {
  const auto t = GenerateArrivals(Make(ArrivalPattern::kConstant, 10, 10));
  ASSERT_EQ(t.size(), 100u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], FromMillis(100.0 * i));
}

TEST(LoadgenTest, ConstantRespectsStart) {
  auto s = Make(ArrivalPattern::kConstant, 4, 1);
  s.start = FromSeconds(5);
  EXPECT_EQ(GenerateArrivals(s),
            (WorkloadTrace{FromMillis(5000), FromMillis(5250), FromMillis(5500), FromMillis(5750)}));
}

TEST(LoadgenTest, PoissonCountWithinThreeSigma) {
  const auto t = GenerateArrivals(Make(ArrivalPattern::kPoisson, 20, 10, 42));
  EXPECT_GE(t.size(), 158u);
  EXPECT_LE(t.size(), 242u);
  EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
  EXPECT_LT(t.back(), FromSeconds(10));
}

TEST(LoadgenTest, PoissonIsReproducible) {
  const auto a = GenerateArrivals(Make(ArrivalPattern::kPoisson, 20, 10, 42));
  EXPECT_EQ(a, GenerateArrivals(Make(ArrivalPattern::kPoisson, 20, 10, 42)));
  EXPECT_NE(a, GenerateArrivals(Make(ArrivalPattern::kPoisson, 20, 10, 43)));
}

// Gaps of a rate-r Poisson process are Exp(r): mean 1/r, and the fraction of
// gaps above 1/r is e^-1.
TEST(LoadgenTest, PoissonGapsAreExponential) {
  const double rate = 50;
  const auto t = GenerateArrivals(Make(ArrivalPattern::kPoisson, rate, 2000, 9));
  ASSERT_GT(t.size(), 90000u);
  double sum = 0;
  std::size_t above = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double gap = ToSeconds(t[i] - t[i - 1]);
    sum += gap;
    if (gap > 1 / rate) ++above;
  }
  const double n = static_cast<double>(t.size() - 1);
  EXPECT_NEAR(sum / n, 1 / rate, 0.01 / rate);
  EXPECT_NEAR(above / n, std::exp(-1.0), 0.01);
}

TEST(LoadgenTest, ZeroRateOrDurationIsEmpty) {
  EXPECT_TRUE(GenerateArrivals(Make(ArrivalPattern::kConstant, 0, 10)).empty());
  EXPECT_TRUE(GenerateArrivals(Make(ArrivalPattern::kPoisson, 0, 10)).empty());
  EXPECT_TRUE(GenerateArrivals(Make(ArrivalPattern::kPoisson, 10, 0)).empty());
}

TEST(LoadgenTest, InvalidArguments) {
  EXPECT_THROW(GenerateArrivals(Make(ArrivalPattern::kConstant, -1, 10)), Error);
  EXPECT_THROW(GenerateArrivals(Make(ArrivalPattern::kConstant, NAN, 10)), Error);
  EXPECT_THROW(GenerateArrivals(Make(ArrivalPattern::kConstant, 1, -1)), Error);
  EXPECT_THROW(ParsePattern("sawtooth"), Error);
}

TEST(LoadgenTest, BurstAlternatesOnAndOff) {
  auto s = Make(ArrivalPattern::kBurst, 10, 4);
  s.burst_on = FromSeconds(1);
  s.burst_off = FromSeconds(1);
  const auto t = GenerateArrivals(s);
  ASSERT_EQ(t.size(), 20u);
  for (const auto& x : t) {
    const auto sec = x.count() / 1000000;
    EXPECT_EQ(sec % 2, 0) << x.count();
  }
  EXPECT_EQ(t[10], FromSeconds(2));
}

TEST(LoadgenTest, PatternNamesRoundTrip) {
  for (auto p : {ArrivalPattern::kConstant, ArrivalPattern::kPoisson, ArrivalPattern::kBurst,
                 ArrivalPattern::kTraceFile}) {
    EXPECT_EQ(ParsePattern(PatternName(p)), p);
  }
}

TEST(LoadgenTest, TraceFile) {
  testing::TempDir dir;
  testing::WriteFile(dir / "trace.txt", "# offsets\n0\n0.5\n\n1.25\n3\n");
  auto s = Make(ArrivalPattern::kTraceFile, 0, 2);
  s.trace_file = dir / "trace.txt";
  s.start = FromSeconds(1);
  EXPECT_EQ(GenerateArrivals(s), (WorkloadTrace{FromMillis(1000), FromMillis(1500),
                                                FromMillis(2250)}));
  EXPECT_EQ(LoadTraceFile(dir / "trace.txt").size(), 4u);
}

TEST(LoadgenTest, BadTraceFiles) {
  testing::TempDir dir;
  testing::WriteFile(dir / "desc.txt", "1\n0.5\n");
  testing::WriteFile(dir / "nan.txt", "abc\n");
  testing::WriteFile(dir / "neg.txt", "-1\n");
  for (const char* f : {"desc.txt", "nan.txt", "neg.txt", "missing.txt"}) {
    try {
      LoadTraceFile(dir / f);
      ADD_FAILURE() << f;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kInvalidArgument) << f;
    }
  }
}

}  // namespace
}  // namespace miniserve

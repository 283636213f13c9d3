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

#ifdef MINISERVE_HAVE_CLI

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "miniserve/http_service.hpp"
#include "test_support.hpp"

namespace miniserve {
namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult RunCli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kSpec = R"(apiVersion: miniserve/v1
kind: InferenceService
metadata:
  name: lin
spec:
  default:
    predictor:
      linear:
        storageUri: file://models/lin
)";

class CliServerTest : public ::testing::Test {
 protected:
  CliServerTest() {
    testing::WriteFile(dir_ / "models/lin/model.json", testing::LinearModel("[1]", 0));
    testing::WriteFile(dir_ / "lin.yaml", kSpec);
    testing::WriteFile(dir_ / "bad.yaml", std::string(kSpec) + "  canaryTrafficPercent: 150\n");
    ServiceConfig c;
    c.data_port = 0;
    c.control_port = 0;
    c.platform.storage.base_dir = dir_.path();
    c.platform.work_dir = dir_ / "work";
    server_ = std::make_unique<PlatformServer>(c);
    server_->Start();
    setenv("MINISERVE_CONTROL_URL",
           ("http://127.0.0.1:" + std::to_string(server_->control_port())).c_str(), 1);
  }
  ~CliServerTest() override {
    server_->Stop();
    unsetenv("MINISERVE_CONTROL_URL");
  }

  testing::TempDir dir_;
  std::unique_ptr<PlatformServer> server_;
};

TEST_F(CliServerTest, ApplyGetStatusDelete) {
  const auto apply = RunCli({"apply", "-f", (dir_ / "lin.yaml").string()});
  EXPECT_EQ(apply.code, cli::kExitOk) << apply.err;
  EXPECT_NE(apply.out.find("inferenceservice/lin generation 1 configured"), std::string::npos)
      << apply.out;
  const auto again = RunCli({"apply", "-f", (dir_ / "lin.yaml").string()});
  EXPECT_NE(again.out.find("unchanged"), std::string::npos) << again.out;

  const auto get = RunCli({"get", "lin"});
  EXPECT_EQ(get.code, cli::kExitOk) << get.err;
  EXPECT_EQ(nlohmann::json::parse(get.out)["name"], "lin");
  EXPECT_EQ(RunCli({"status", "lin"}).code, cli::kExitOk);

  EXPECT_EQ(RunCli({"delete", "lin"}).code, cli::kExitOk);
  EXPECT_EQ(RunCli({"get", "lin"}).code, cli::kExitValidation);
}

TEST_F(CliServerTest, ValidationFailuresExitOne) {
  const auto bad = RunCli({"apply", "-f", (dir_ / "bad.yaml").string()});
  EXPECT_EQ(bad.code, cli::kExitValidation);
  EXPECT_FALSE(bad.err.empty());
  EXPECT_EQ(RunCli({"apply", "-f", (dir_ / "missing.yaml").string()}).code,
            cli::kExitValidation);
  ASSERT_EQ(RunCli({"apply", "-f", (dir_ / "lin.yaml").string()}).code, cli::kExitOk);
  EXPECT_EQ(RunCli({"promote", "lin"}).code, cli::kExitValidation);
}

TEST(CliTest, UnreachableControlPlaneExitsTwo) {
  testing::TempDir dir;
  testing::WriteFile(dir / "lin.yaml", kSpec);
  setenv("MINISERVE_CONTROL_URL", "http://127.0.0.1:1", 1);
  EXPECT_EQ(RunCli({"apply", "-f", (dir / "lin.yaml").string()}).code, cli::kExitTransport);
  EXPECT_EQ(RunCli({"get", "lin"}).code, cli::kExitTransport);
  unsetenv("MINISERVE_CONTROL_URL");
}

TEST(CliTest, UsageErrors) {
  EXPECT_NE(RunCli({"frobnicate"}).code, cli::kExitOk);
  EXPECT_NE(RunCli({"apply"}).code, cli::kExitOk);
  EXPECT_EQ(RunCli({"--help"}).code, cli::kExitOk);
}

TEST(CliTest, LoadgenPrintsOffsets) {
  const auto r = RunCli({"loadgen", "--pattern", "constant", "--rate", "10", "--duration", "1"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  std::istringstream in(r.out);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  EXPECT_EQ(n, 10);
}

TEST(CliTest, SimulateWritesReport) {
  testing::TempDir dir;
  const auto out = dir / "report.json";
  const auto r = RunCli({"simulate", testing::SourcePath("scenarios/a2_cold_start.yaml").string(),
                         "--out", out.string()});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  const auto report = nlohmann::json::parse(testing::ReadFile(out));
  EXPECT_EQ(report.at("/services/cold-start/requests/ok"_json_pointer), 1);
  EXPECT_NE(r.out.find("cold-start"), std::string::npos);
}

}  // namespace
}  // namespace miniserve

#endif  // MINISERVE_HAVE_CLI

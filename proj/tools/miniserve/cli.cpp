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

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "miniserve/error.hpp"
#include "miniserve/http_service.hpp"
#include "miniserve/loadgen.hpp"
#include "miniserve/scenario.hpp"
#include "miniserve/spec.hpp"

namespace miniserve::cli {
namespace {

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

std::string EnvOr(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

std::string ServicePath(const std::string& name) { return "/apis/v1/inferenceservices/" + name; }

// Prints the server's error body and maps the HTTP status to an exit code.
int Report(const HttpResult& r, std::ostream& out, std::ostream& err) {
  if (r.status >= 200 && r.status < 300) {
    out << r.body;
    return kExitOk;
  }
  try {
    const auto j = nlohmann::json::parse(r.body);
    err << "error: " << j.value("error", "HTTP " + std::to_string(r.status));
    if (j.contains("message")) err << ": " << j["message"].get<std::string>();
    err << "\n";
    if (j.contains("violations")) {
      for (const auto& v : j["violations"]) err << "  " << v.get<std::string>() << "\n";
    }
  } catch (const std::exception&) {
    err << "error: HTTP " << r.status << " " << r.body << "\n";
  }
  return r.status >= 500 ? kExitTransport : kExitValidation;
}

void PrintStatus(const nlohmann::json& s, std::ostream& out) {
  out << "service     " << s.value("name", "") << "\n";
  out << "generation  " << s.value("generation", 0) << "\n";
  out << "ready       " << (s.value("ready", false) ? "True" : "False") << "\n";
  out << "traffic\n";
  for (const auto& t : s["traffic"]) {
    out << "  " << t["revision"].get<std::string>() << "  " << t["role"].get<std::string>()
        << "  " << t["percent"].get<int>() << "%\n";
  }
  if (s.contains("shadow")) out << "  shadow " << s["shadow"].get<std::string>() << "\n";
  out << "revisions\n";
  for (const auto& r : s["revisions"]) {
    out << "  " << r["id"].get<std::string>() << "  " << r["role"].get<std::string>()
        << "  ready " << r["ready"].get<int>() << "  starting " << r["starting"].get<int>()
        << "  draining " << r["draining"].get<int>() << "  " << r["storageUri"].get<std::string>()
        << "\n";
  }
  for (const auto& c : s["conditions"]) {
    out << "condition   " << c["type"].get<std::string>() << "="
        << (c["status"].get<bool>() ? "True" : "False");
    if (c.contains("message")) out << "  " << c["message"].get<std::string>();
    out << "\n";
  }
}

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kInvalidArgument, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"miniserve: serverless inference platform"};
  app.require_subcommand(1);
  const std::string control_url = EnvOr("MINISERVE_CONTROL_URL", "http://127.0.0.1:8081");
  const std::string data_url = EnvOr("MINISERVE_DATA_URL", "http://127.0.0.1:8080");

  std::string file, service;
  auto* apply = app.add_subcommand("apply", "Apply an InferenceService document");
  apply->add_option("-f,--file", file, "Spec file (YAML or JSON)")->required();
  auto* get = app.add_subcommand("get", "Print the status document as JSON");
  get->add_option("service", service)->required();
  auto* status = app.add_subcommand("status", "Print a status summary");
  status->add_option("service", service)->required();
  auto* del = app.add_subcommand("delete", "Delete a service");
  del->add_option("service", service)->required();
  auto* promote = app.add_subcommand("promote", "Promote the canary to default");
  promote->add_option("service", service)->required();

  std::string pattern = "constant", trace_file, out_path, verb = "predict";
  double rate = 0, duration = 0;
  std::uint64_t seed = 0;
  bool send = false;
  std::vector<double> instance = {1.0};
  auto* loadgen = app.add_subcommand("loadgen", "Generate (and optionally send) a workload");
  loadgen->add_option("--pattern", pattern, "constant|poisson|burst|trace-file");
  loadgen->add_option("--rate", rate, "Requests per second");
  loadgen->add_option("--duration", duration, "Seconds");
  loadgen->add_option("--seed", seed);
  loadgen->add_option("--trace-file", trace_file);
  loadgen->add_option("--service", service);
  loadgen->add_option("--verb", verb)->check(CLI::IsMember({"predict", "explain"}));
  loadgen->add_option("--instance", instance, "Feature values of the request instance");
  loadgen->add_flag("--send", send, "Send requests to MINISERVE_DATA_URL");

  std::string scenario_path;
  std::optional<std::uint64_t> sim_seed;
  bool table = false;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write its report");
  simulate->add_option("scenario", scenario_path)->required();
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--out", out_path, "Report path (default: stdout)");
  simulate->add_flag("--table", table, "Also print a summary table");

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "Run the networked service");
  serve->add_option("--config", config_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (apply->parsed()) {
      const std::string text = ReadAll(file);
      InferenceServiceSpec spec;
      try {
        spec = ParseSpec(text);
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
      }
      const ValidationReport v = Validate(spec);
      if (!v.ok()) {
        err << "error: " << spec.name << " is invalid\n";
        for (const auto& s : v.violations) err << "  " << s << "\n";
        return kExitValidation;
      }
      ControlClient client(control_url);
      const HttpResult r = client.Put(ServicePath(spec.name), text);
      if (r.status != 200) return Report(r, out, err);
      const auto j = nlohmann::json::parse(r.body);
      out << "inferenceservice/" << spec.name << " generation " << j["generation"].get<int>()
          << (j["changed"].get<bool>() ? " configured" : " unchanged") << "\n";
      return kExitOk;
    }
    if (get->parsed() || status->parsed()) {
      ControlClient client(control_url);
      const HttpResult r = client.Get(ServicePath(service));
      if (r.status != 200) return Report(r, out, err);
      const auto j = nlohmann::json::parse(r.body);
      if (get->parsed()) {
        out << j.dump(2) << "\n";
      } else {
        PrintStatus(j, out);
      }
      return kExitOk;
    }
    if (del->parsed()) {
      ControlClient client(control_url);
      const HttpResult r = client.Delete(ServicePath(service));
      if (r.status != 200) return Report(r, out, err);
      out << "inferenceservice/" << service << " deleted\n";
      return kExitOk;
    }
    if (promote->parsed()) {
      ControlClient client(control_url);
      const HttpResult r = client.Post(ServicePath(service) + ":promote", "");
      if (r.status != 200) return Report(r, out, err);
      const auto j = nlohmann::json::parse(r.body);
      out << "inferenceservice/" << service << " promoted, generation "
          << j["generation"].get<int>() << "\n";
      return kExitOk;
    }
    if (loadgen->parsed()) {
      ArrivalSpec as;
      as.pattern = ParsePattern(pattern);
      as.rate = rate;
      as.duration = FromSeconds(duration);
      as.seed = seed;
      as.trace_file = trace_file;
      const WorkloadTrace trace = GenerateArrivals(as);
      if (!send) {
        for (Timestamp t : trace) out << ToSeconds(t) << "\n";
        return kExitOk;
      }
      if (service.empty()) {
        err << "error: --send needs --service\n";
        return kExitValidation;
      }
      ControlClient client(data_url);
      const std::string body = nlohmann::json{{"instances", {instance}}}.dump();
      const std::string path = "/v1/services/" + service + ":" + verb;
      std::mutex mu;
      std::map<int, int> codes;
      int transport_errors = 0;
      std::vector<std::thread> workers;
      const auto t0 = std::chrono::steady_clock::now();
      for (Timestamp t : trace) {
        std::this_thread::sleep_until(t0 + t);
        workers.emplace_back([&] {
          try {
            const HttpResult r = client.Post(path, body);
            std::lock_guard lock(mu);
            codes[r.status] += 1;
          } catch (const TransportError&) {
            std::lock_guard lock(mu);
            ++transport_errors;
          }
        });
      }
      for (auto& w : workers) w.join();
      nlohmann::json summary = {{"sent", trace.size()}, {"transport_errors", transport_errors}};
      for (const auto& [code, n] : codes) summary["status"][std::to_string(code)] = n;
      out << summary.dump() << "\n";
      return transport_errors > 0 ? kExitTransport : kExitOk;
    }
    if (simulate->parsed()) {
      const Scenario s = Scenario::Load(scenario_path);
      const nlohmann::json report = RunScenario(s, sim_seed);
      const std::string text = report.dump(2) + "\n";
      if (out_path.empty()) {
        out << text;
      } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw Error(Errc::kInvalidArgument, "cannot write " + out_path);
        f << text;
      }
      if (table || !out_path.empty()) out << RenderReportTable(report);
      return report["assertions"].empty() ? kExitOk : kExitValidation;
    }
    if (serve->parsed()) {
      PlatformServer server(ServiceConfig::Load(config_path));
      server.Start();
      out << "data plane on port " << server.data_port() << ", control plane on port "
          << server.control_port() << std::endl;
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.Stop();
      return kExitOk;
    }
  } catch (const TransportError& e) {
    err << "error: cannot reach " << control_url << ": " << e.what() << "\n";
    return kExitTransport;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace miniserve::cli

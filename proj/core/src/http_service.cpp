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

#include "miniserve/http_service.hpp"

#include <httplib.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include "miniserve/error.hpp"

namespace miniserve {
namespace {

constexpr const char* kServicePath = R"(/apis/v1/inferenceservices/([A-Za-z0-9][A-Za-z0-9.-]*))";

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::kInvalidArgument, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void SendJson(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

int ControlStatusFor(Errc code) {
  switch (code) {
    case Errc::kUnknownService:
    case Errc::kRevisionNotFound:
      return 404;
    case Errc::kNoCanary:
    case Errc::kPlanRejected:
      return 409;
    case Errc::kInvalidArgument:
      return 422;
    default:
      return 400;
  }
}

void SendError(httplib::Response& res, const Error& e) {
  SendJson(res, ControlStatusFor(e.code()),
           {{"error", std::string(ErrcName(e.code()))}, {"message", e.what()}});
}

std::optional<Instances> ParseInstances(const std::string& body, std::string& why) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    why = "body is not JSON";
    return std::nullopt;
  }
  if (!j.is_object() || !j.contains("instances") || !j["instances"].is_array()) {
    why = "body must be an object with an \"instances\" list";
    return std::nullopt;
  }
  Instances out;
  for (const auto& row : j["instances"]) {
    if (!row.is_array()) {
      why = "each instance must be a list of numbers";
      return std::nullopt;
    }
    Instance x;
    for (const auto& v : row) {
      if (!v.is_number()) {
        why = "each instance must be a list of numbers";
        return std::nullopt;
      }
      x.push_back(v.get<double>());
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::string ListDirectory(const std::filesystem::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), dir).generic_string();
    if (rel != "index.txt") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += f + "\n";
  return out;
}

}  // namespace

ServiceConfig ServiceConfig::Load(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw Error(Errc::kMalformedDocument, path.string() + ": " + e.what());
  }
  if (!root.IsMap()) throw Error(Errc::kMalformedDocument, "platform config must be a mapping");
  static const std::vector<std::string> kKeys = {
      "host", "dataPort", "controlPort", "workDir", "storageBaseDir", "bandwidthBytesPerSecond",
      "payloadSink", "payloadPath", "payloadCapacity", "seed", "services"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw Error(Errc::kMalformedDocument, "unknown field config." + key);
    }
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  ServiceConfig c;
  try {
    if (root["host"]) c.host = root["host"].as<std::string>();
    if (root["dataPort"]) c.data_port = root["dataPort"].as<int>();
    if (root["controlPort"]) c.control_port = root["controlPort"].as<int>();
    if (root["workDir"]) c.platform.work_dir = resolve(root["workDir"].as<std::string>());
    c.platform.storage.base_dir =
        root["storageBaseDir"] ? resolve(root["storageBaseDir"].as<std::string>()) : base;
    if (root["bandwidthBytesPerSecond"]) {
      c.platform.storage.bandwidth_bytes_per_second = root["bandwidthBytesPerSecond"].as<double>();
    }
    if (root["seed"]) c.platform.seed = root["seed"].as<std::uint64_t>();
    if (root["payloadCapacity"]) {
      c.platform.payload_capacity = root["payloadCapacity"].as<std::size_t>();
    }
    const std::string sink = root["payloadSink"] ? root["payloadSink"].as<std::string>() : "none";
    if (sink == "none") {
      c.platform.payload_sink = PayloadSinkKind::kNone;
    } else if (sink == "memory") {
      c.platform.payload_sink = PayloadSinkKind::kMemory;
    } else if (sink == "file") {
      c.platform.payload_sink = PayloadSinkKind::kFile;
    } else if (sink == "stalled") {
      c.platform.payload_sink = PayloadSinkKind::kStalled;
    } else {
      throw Error(Errc::kMalformedDocument, "unknown payloadSink " + sink);
    }
    if (root["payloadPath"]) c.platform.payload_path = resolve(root["payloadPath"].as<std::string>());
    if (c.platform.payload_sink == PayloadSinkKind::kFile && c.platform.payload_path.empty()) {
      throw Error(Errc::kMalformedDocument, "payloadSink file needs payloadPath");
    }
    if (root["services"]) {
      for (const auto& n : root["services"]) c.specs.push_back(resolve(n.as<std::string>()));
    }
  } catch (const YAML::Exception& e) {
    throw Error(Errc::kMalformedDocument, path.string() + ": " + e.what());
  }
  return c;
}

struct PlatformServer::Servers {
  httplib::Server data;
  httplib::Server control;
};

PlatformServer::PlatformServer(ServiceConfig config)
    : config_(std::move(config)),
      clock_(std::make_unique<RealClock>()),
      servers_(std::make_unique<Servers>()) {
  platform_ = std::make_unique<Platform>(*clock_, config_.platform);
  for (const auto& path : config_.specs) {
    const std::string text = ReadFile(path);
    Call([&](Platform& p) { p.Apply(ParseSpec(text)); });
  }
  Routes();
}

PlatformServer::~PlatformServer() { Stop(); }

void PlatformServer::Routes() {
  auto& data = servers_->data;
  auto& control = servers_->control;
  data.new_task_queue = [] { return new httplib::ThreadPool(64); };
  control.new_task_queue = [] { return new httplib::ThreadPool(16); };

  data.Post(R"(/v1/services/([A-Za-z0-9][A-Za-z0-9.-]*):(predict|explain))",
            [this](const httplib::Request& req, httplib::Response& res) {
              std::string why;
              auto instances = ParseInstances(req.body, why);
              if (!instances) {
                SendJson(res, 400, {{"error", "BadRequest"}, {"message", why}});
                return;
              }
              RequestEnvelope env;
              env.service = req.matches[1];
              env.verb = req.matches[2] == "explain" ? Verb::kExplain : Verb::kPredict;
              env.payload = std::move(*instances);
              auto promise = std::make_shared<std::promise<InferenceResponse>>();
              auto fut = promise->get_future();
              clock_->Post([this, env = std::move(env), promise]() mutable {
                platform_->Submit(std::move(env), [promise](InferenceResponse r) {
                  promise->set_value(std::move(r));
                });
              });
              const InferenceResponse r = fut.get();
              if (r.served_revision) {
                res.set_header("x-served-revision", r.served_revision->ToString());
              }
              if (!r.ok()) {
                nlohmann::json body = {{"error", std::string(StatusName(r.status))},
                                       {"message", r.message}};
                if (!r.stage.empty()) body["stage"] = r.stage;
                SendJson(res, HttpStatusFor(r.status), body);
                return;
              }
              nlohmann::json body;
              if (req.matches[2] == "explain") {
                body["explanations"] = nlohmann::json::array();
                for (const auto& e : r.explanations) {
                  body["explanations"].push_back(
                      {{"base", e.base}, {"contributions", e.contributions}});
                }
              } else {
                body["predictions"] = r.outputs;
              }
              SendJson(res, 200, body);
            });

  control.Put(kServicePath, [this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    try {
      const InferenceServiceSpec spec = ParseSpec(req.body);
      if (spec.name != name) {
        throw Error(Errc::kNameMismatch,
                    "path names " + name + " but document names " + spec.name);
      }
      const ValidationReport v = Validate(spec);
      if (!v.ok()) {
        SendJson(res, 422, {{"error", "ValidationFailed"}, {"violations", v.violations}});
        return;
      }
      const ApplyResult r = Call([&](Platform& p) { return p.Apply(spec); });
      SendJson(res, 200,
               {{"name", name},
                {"generation", r.generation},
                {"changed", r.changed},
                {"actions", r.actions},
                {"changes", r.changes}});
    } catch (const Error& e) {
      SendError(res, e);
    }
  });
  control.Get(kServicePath, [this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    try {
      SendJson(res, 200, Call([&](Platform& p) { return p.Status(name); }));
    } catch (const Error& e) {
      SendError(res, e);
    }
  });
  control.Delete(kServicePath, [this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    try {
      Call([&](Platform& p) { p.Delete(name); });
      SendJson(res, 200, {{"deleted", name}});
    } catch (const Error& e) {
      SendError(res, e);
    }
  });
  control.Post(std::string(kServicePath) + ":promote",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string name = req.matches[1];
                 try {
                   const ApplyResult r = Call([&](Platform& p) { return p.Promote(name); });
                   SendJson(res, 200,
                            {{"name", name},
                             {"generation", r.generation},
                             {"changed", r.changed},
                             {"actions", r.actions}});
                 } catch (const Error& e) {
                   SendError(res, e);
                 }
               });
  control.Get("/apis/v1/inferenceservices",
              [this](const httplib::Request&, httplib::Response& res) {
                SendJson(res, 200,
                         {{"items", Call([](Platform& p) { return p.Services(); })}});
              });
  control.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(Call([](Platform& p) { return p.metrics().Render(); }),
                    "text/plain; version=0.0.4");
  });
  control.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok\n", "text/plain");
  });
}

void PlatformServer::Start() {
  if (started_) return;
  auto bind = [&](httplib::Server& s, int port) {
    if (port == 0) {
      const int p = s.bind_to_any_port(config_.host);
      if (p < 0) throw Error(Errc::kInvalidArgument, "cannot bind " + config_.host);
      return p;
    }
    if (!s.bind_to_port(config_.host, port)) {
      throw Error(Errc::kInvalidArgument,
                  "cannot bind " + config_.host + ":" + std::to_string(port));
    }
    return port;
  };
  data_port_ = bind(servers_->data, config_.data_port);
  control_port_ = bind(servers_->control, config_.control_port);
  data_thread_ = std::thread([this] { servers_->data.listen_after_bind(); });
  control_thread_ = std::thread([this] { servers_->control.listen_after_bind(); });
  servers_->data.wait_until_ready();
  servers_->control.wait_until_ready();
  started_ = true;
}

void PlatformServer::Wait() {
  if (data_thread_.joinable()) data_thread_.join();
  if (control_thread_.joinable()) control_thread_.join();
}

void PlatformServer::Stop() {
  if (!clock_) return;
  // Fail whatever is pending first so blocked handlers can answer.
  try {
    Call([](Platform& p) { p.Shutdown(); });
  } catch (...) {
  }
  servers_->data.stop();
  servers_->control.stop();
  Wait();
  clock_->Stop();
  platform_.reset();
  clock_.reset();
}

struct ArtifactServer::Impl {
  std::filesystem::path root;
  httplib::Server server;
  std::thread thread;
  std::atomic<std::uint64_t> requests{0};
  std::string host;
};

ArtifactServer::ArtifactServer(std::filesystem::path root, std::string host)
    : impl_(std::make_unique<Impl>()) {
  impl_->root = std::filesystem::weakly_canonical(root);
  impl_->host = host;
  Impl* impl = impl_.get();
  impl_->server.Get(R"(/(.*))", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->requests.fetch_add(1);
    const std::filesystem::path rel = std::filesystem::path(std::string(req.matches[1]));
    const std::filesystem::path full = (impl->root / rel).lexically_normal();
    const std::string full_s = full.string();
    if (full_s.compare(0, impl->root.string().size(), impl->root.string()) != 0) {
      res.status = 403;
      return;
    }
    std::error_code ec;
    if (std::filesystem::is_regular_file(full, ec)) {
      res.set_content(ReadFile(full), "application/octet-stream");
      return;
    }
    if (rel.filename() == "index.txt" && std::filesystem::is_directory(full.parent_path(), ec)) {
      res.set_content(ListDirectory(full.parent_path()), "text/plain");
      return;
    }
    res.status = 404;
  });
  port_ = impl_->server.bind_to_any_port(host);
  if (port_ < 0) throw Error(Errc::kInvalidArgument, "cannot bind artifact server");
  impl_->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

ArtifactServer::~ArtifactServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string ArtifactServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(port_);
}

std::uint64_t ArtifactServer::requests() const { return impl_->requests.load(); }

ControlClient::ControlClient(const std::string& base_url) {
  const std::string prefix = "http://";
  if (base_url.compare(0, prefix.size(), prefix) != 0) {
    throw std::invalid_argument("control URL must start with http://: " + base_url);
  }
  host_port_ = base_url.substr(prefix.size());
  while (!host_port_.empty() && host_port_.back() == '/') host_port_.pop_back();
  if (host_port_.empty()) throw std::invalid_argument("control URL has no host");
}

namespace {

HttpResult Convert(const httplib::Result& r, const std::string& what) {
  if (!r) throw TransportError(what + ": " + httplib::to_string(r.error()));
  HttpResult out;
  out.status = r->status;
  out.body = r->body;
  for (const auto& [k, v] : r->headers) out.headers[k] = v;
  return out;
}

}  // namespace

HttpResult ControlClient::Put(const std::string& path, const std::string& body,
                              const std::string& content_type) {
  httplib::Client c(host_port_);
  c.set_read_timeout(std::chrono::seconds(60));
  return Convert(c.Put(path, body, content_type), "PUT " + path);
}

HttpResult ControlClient::Get(const std::string& path) {
  httplib::Client c(host_port_);
  c.set_read_timeout(std::chrono::seconds(60));
  return Convert(c.Get(path), "GET " + path);
}

HttpResult ControlClient::Delete(const std::string& path) {
  httplib::Client c(host_port_);
  c.set_read_timeout(std::chrono::seconds(60));
  return Convert(c.Delete(path), "DELETE " + path);
}

HttpResult ControlClient::Post(const std::string& path, const std::string& body,
                               const std::string& content_type) {
  httplib::Client c(host_port_);
  c.set_read_timeout(std::chrono::seconds(60));
  return Convert(c.Post(path, body, content_type), "POST " + path);
}

}  // namespace miniserve

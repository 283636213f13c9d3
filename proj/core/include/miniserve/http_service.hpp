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

#ifndef MINISERVE_HTTP_SERVICE_HPP_
#define MINISERVE_HTTP_SERVICE_HPP_

#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "miniserve/clock.hpp"
#include "miniserve/platform.hpp"

namespace miniserve {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int data_port = 8080;     // 0 picks a free port
  int control_port = 8081;  // 0 picks a free port
  PlatformOptions platform;
  std::vector<std::filesystem::path> specs;  // applied at startup

  // Throws Error{kMalformedDocument | kInvalidArgument}.
  static ServiceConfig Load(const std::filesystem::path& path);
};

// The platform behind two HTTP listeners: the data plane
// (POST /v1/services/{name}:predict|:explain) and the control plane
// (/apis/v1/inferenceservices/..., GET /metrics). Platform work runs on a
// real-time clock loop; handlers post to it and wait for the result.
class PlatformServer {
 public:
  explicit PlatformServer(ServiceConfig config);
  ~PlatformServer();
  PlatformServer(const PlatformServer&) = delete;
  PlatformServer& operator=(const PlatformServer&) = delete;

  // Binds both ports and starts serving. Throws Error{kInvalidArgument} when
  // a port cannot be bound.
  void Start();
  void Stop();
  // Blocks until Stop() is called from another thread.
  void Wait();

  int data_port() const { return data_port_; }
  int control_port() const { return control_port_; }

  // Runs `f(platform)` on the clock loop and returns its result.
  template <typename F>
  auto Call(F&& f) -> std::invoke_result_t<F, Platform&> {
    using R = std::invoke_result_t<F, Platform&>;
    std::promise<R> p;
    auto fut = p.get_future();
    clock_->Post([&] {
      try {
        if constexpr (std::is_void_v<R>) {
          f(*platform_);
          p.set_value();
        } else {
          p.set_value(f(*platform_));
        }
      } catch (...) {
        p.set_exception(std::current_exception());
      }
    });
    return fut.get();
  }

 private:
  struct Servers;
  void Routes();

  ServiceConfig config_;
  std::unique_ptr<RealClock> clock_;
  std::unique_ptr<Platform> platform_;
  std::unique_ptr<Servers> servers_;
  std::thread data_thread_;
  std::thread control_thread_;
  int data_port_ = 0;
  int control_port_ = 0;
  bool started_ = false;
};

// Serves a directory tree over HTTP for http:// storage URIs. A GET on a
// directory path ending in "/index.txt" returns the relative file list.
class ArtifactServer {
 public:
  explicit ArtifactServer(std::filesystem::path root, std::string host = "127.0.0.1");
  ~ArtifactServer();
  ArtifactServer(const ArtifactServer&) = delete;
  ArtifactServer& operator=(const ArtifactServer&) = delete;

  int port() const { return port_; }
  std::string url() const;  // http://host:port
  std::uint64_t requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpResult {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

// Minimal blocking client for the control and data planes.
class ControlClient {
 public:
  // base_url like http://127.0.0.1:8081. Throws std::invalid_argument.
  explicit ControlClient(const std::string& base_url);

  // Throw TransportError when the server cannot be reached.
  HttpResult Put(const std::string& path, const std::string& body,
                 const std::string& content_type = "application/yaml");
  HttpResult Get(const std::string& path);
  HttpResult Delete(const std::string& path);
  HttpResult Post(const std::string& path, const std::string& body,
                  const std::string& content_type = "application/json");

 private:
  std::string host_port_;
};

}  // namespace miniserve

#endif  // MINISERVE_HTTP_SERVICE_HPP_

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

#ifndef MINISERVE_REQUEST_HPP_
#define MINISERVE_REQUEST_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "miniserve/clock.hpp"
#include "miniserve/predictor.hpp"
#include "miniserve/spec.hpp"

namespace miniserve {

enum class Verb { kPredict, kExplain };

// One inference request on its way from the gateway to a replica.
struct RequestEnvelope {
  std::uint64_t id = 0;
  std::string service;
  Verb verb = Verb::kPredict;
  Timestamp arrival{0};
  Instances payload;
  std::optional<RevisionId> routed_revision;
  std::optional<Timestamp> deadline;
  bool shadow = false;  // duplicate whose outcome never reaches a client
};

enum class ResponseStatus {
  kOk,
  kBadRequest,
  kUnknownService,
  kOverloaded,          // breaker queue full
  kBufferFull,          // activator queue full
  kActivationTimeout,   // no replica became ready in time
  kNotReady,
  kReplicaStopped,      // replica stopped before finishing the request
  kPredictorError,
  kTransformError,
  kExplainerNotConfigured,
};

std::string_view StatusName(ResponseStatus status);
int HttpStatusFor(ResponseStatus status);
inline bool IsRetriable(ResponseStatus s) {
  return s == ResponseStatus::kOverloaded || s == ResponseStatus::kBufferFull ||
         s == ResponseStatus::kActivationTimeout;
}

// Leave-one-out attribution for one instance.
struct Explanation {
  double base = 0;                   // f(x)
  std::vector<double> contributions;  // f(x) - f(x with feature i zeroed)
};

struct InferenceResponse {
  std::uint64_t request_id = 0;
  ResponseStatus status = ResponseStatus::kOk;
  std::vector<double> outputs;
  std::vector<Explanation> explanations;
  std::string message;
  std::string stage;  // failing pipeline stage, if any
  std::optional<RevisionId> served_revision;
  std::string replica;

  bool ok() const { return status == ResponseStatus::kOk; }
};

using ResponseCallback = std::function<void(InferenceResponse)>;

}  // namespace miniserve

#endif  // MINISERVE_REQUEST_HPP_

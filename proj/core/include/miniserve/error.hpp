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

#ifndef MINISERVE_ERROR_HPP_
#define MINISERVE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace miniserve {

// Failure kinds raised by control-plane and setup operations. Data-path
// outcomes are reported as response statuses instead of exceptions.
enum class Errc {
  kMalformedDocument,
  kUnknownField,
  kMissingRequiredField,
  kNameMismatch,
  kUnknownScheme,
  kUnsupportedScheme,
  kFetchFailed,
  kChecksumMismatch,
  kStartupFailed,
  kBatchShapeMismatch,
  kUnknownComponent,
  kExplainerNotConfigured,
  kNoCanary,
  kRevisionNotFound,
  kPlanRejected,
  kUnknownService,
  kUnknownMetric,
  kMalformedEventLog,
  kInvalidArgument,
  kAssertionFailed,
};

std::string_view ErrcName(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(ErrcName(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace miniserve

#endif  // MINISERVE_ERROR_HPP_

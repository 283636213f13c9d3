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

#include "miniserve/error.hpp"

namespace miniserve {

std::string_view ErrcName(Errc code) {
  switch (code) {
    case Errc::kMalformedDocument: return "MalformedDocument";
    case Errc::kUnknownField: return "UnknownField";
    case Errc::kMissingRequiredField: return "MissingRequiredField";
    case Errc::kNameMismatch: return "NameMismatch";
    case Errc::kUnknownScheme: return "UnknownScheme";
    case Errc::kUnsupportedScheme: return "UnsupportedScheme";
    case Errc::kFetchFailed: return "FetchFailed";
    case Errc::kChecksumMismatch: return "ChecksumMismatch";
    case Errc::kStartupFailed: return "StartupFailed";
    case Errc::kBatchShapeMismatch: return "BatchShapeMismatch";
    case Errc::kUnknownComponent: return "UnknownComponent";
    case Errc::kExplainerNotConfigured: return "ExplainerNotConfigured";
    case Errc::kNoCanary: return "NoCanary";
    case Errc::kRevisionNotFound: return "RevisionNotFound";
    case Errc::kPlanRejected: return "PlanRejected";
    case Errc::kUnknownService: return "UnknownService";
    case Errc::kUnknownMetric: return "UnknownMetric";
    case Errc::kMalformedEventLog: return "MalformedEventLog";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kAssertionFailed: return "AssertionFailed";
  }
  return "Unknown";
}

}  // namespace miniserve

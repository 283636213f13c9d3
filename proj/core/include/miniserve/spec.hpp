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

#ifndef MINISERVE_SPEC_HPP_
#define MINISERVE_SPEC_HPP_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace miniserve {

inline constexpr std::string_view kApiVersion = "miniserve/v1";
inline constexpr std::string_view kKind = "InferenceService";

struct PredictorResources {
  std::optional<int> container_concurrency;
  // Simulated artifact transfer delay added on top of size / bandwidth.
  std::optional<double> fetch_seconds;

  bool operator==(const PredictorResources&) const = default;
};

struct PredictorSpec {
  std::string runtime_kind;  // canonical kind, e.g. "linear" or "sleep"
  std::string storage_uri;
  std::optional<PredictorResources> resources;

  bool operator==(const PredictorSpec&) const = default;
};

// Transformer or explainer reference, resolved later against a component
// registry. Parameters are kept as the scalar text from the document.
struct ComponentSpec {
  std::string kind;
  std::map<std::string, std::string> params;

  bool operator==(const ComponentSpec&) const = default;
};

struct InferenceServiceSpec {
  std::string name;
  PredictorSpec default_predictor;
  std::optional<PredictorSpec> canary;
  int canary_traffic_percent = 0;
  std::optional<PredictorSpec> shadow;
  std::optional<ComponentSpec> transformer;
  std::optional<ComponentSpec> explainer;
  std::map<std::string, std::string> annotations;

  bool operator==(const InferenceServiceSpec&) const = default;
};

// Content hash of a predictor spec. Equal specs always hash equal.
struct RevisionId {
  std::uint64_t value = 0;

  std::string ToString() const;
  static RevisionId FromString(std::string_view hex);
  auto operator<=>(const RevisionId&) const = default;
};

enum class RevisionRole { kDefault, kCanary, kShadow };
std::string_view RoleName(RevisionRole role);

struct Revision {
  RevisionId id;
  std::string service;
  RevisionRole role = RevisionRole::kDefault;
  PredictorSpec predictor;
};

// Names of predictor runtimes the platform can start. Aliases let framework
// names from existing manifests (tensorflow, sklearn, ...) map onto a
// concrete runtime.
class RuntimeKinds {
 public:
  static const RuntimeKinds& Default();

  void Register(std::string kind) { kinds_.insert(std::move(kind)); }
  void Alias(std::string alias, std::string kind) {
    aliases_[std::move(alias)] = std::move(kind);
  }
  std::optional<std::string> Resolve(std::string_view name) const;

 private:
  std::set<std::string, std::less<>> kinds_;
  std::map<std::string, std::string, std::less<>> aliases_;
};

// Parses a versioned InferenceService document (YAML or JSON text).
// Throws Error{kMalformedDocument | kUnknownField | kMissingRequiredField}.
InferenceServiceSpec ParseSpec(std::string_view document,
                               const RuntimeKinds& kinds = RuntimeKinds::Default());
std::string SerializeSpec(const InferenceServiceSpec& spec);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport Validate(const InferenceServiceSpec& spec);

RevisionId RevisionHash(const PredictorSpec& predictor);
// Stable text form of a predictor spec; the input to RevisionHash.
std::string CanonicalPredictor(const PredictorSpec& predictor);

struct ChangeSet {
  bool default_changed = false;
  bool canary_added = false;
  bool canary_removed = false;
  bool canary_changed = false;
  std::optional<std::pair<int, int>> percent;  // old -> new
  bool shadow_changed = false;
  bool pipeline_changed = false;
  bool annotations_changed = false;

  bool IsNoOp() const;
  std::vector<std::string> Describe() const;
};

// Throws Error{kNameMismatch} when the specs name different services.
ChangeSet Diff(const InferenceServiceSpec& old_spec,
               const InferenceServiceSpec& new_spec);

// Annotation lookups. Values are validated by Validate(); these fall back to
// `fallback` when the key is absent.
double AnnotationDouble(const std::map<std::string, std::string>& annotations,
                        std::string_view key, double fallback);
bool AnnotationBool(const std::map<std::string, std::string>& annotations,
                    std::string_view key, bool fallback);

}  // namespace miniserve

#endif  // MINISERVE_SPEC_HPP_

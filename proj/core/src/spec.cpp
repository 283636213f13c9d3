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

#include "miniserve/spec.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <initializer_list>
#include <sstream>

#include "hash.hpp"
#include "miniserve/error.hpp"

namespace miniserve {
namespace {

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  // Keep doubles recognizable as floating point in emitted documents.
  if (s.find_first_of(".eE") == std::string::npos &&
      s.find_first_of("ni") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::optional<double> ParseNumber(std::string_view text) {
  double v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> ParseBool(std::string_view text) {
  if (text == "true" || text == "True" || text == "1") return true;
  if (text == "false" || text == "False" || text == "0") return false;
  return std::nullopt;
}

[[noreturn]] void Fail(Errc code, const std::string& where,
                       const std::string& what) {
  throw Error(code, where.empty() ? what : where + ": " + what);
}

void RequireMap(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) Fail(Errc::kMalformedDocument, where, "expected a mapping");
}

void CheckKeys(const YAML::Node& node, const std::string& where,
               std::initializer_list<std::string_view> allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      Fail(Errc::kUnknownField, where, "unknown field '" + key + "'");
    }
  }
}

YAML::Node Required(const YAML::Node& node, const char* key,
                    const std::string& where) {
  YAML::Node child = node[key];
  if (!child || child.IsNull()) {
    Fail(Errc::kMissingRequiredField, where, std::string("missing '") + key + "'");
  }
  return child;
}

std::string Scalar(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) Fail(Errc::kMalformedDocument, where, "expected a scalar");
  return node.Scalar();
}

double ScalarNumber(const YAML::Node& node, const std::string& where) {
  auto v = ParseNumber(Scalar(node, where));
  if (!v) Fail(Errc::kMalformedDocument, where, "expected a number");
  return *v;
}

int ScalarInt(const YAML::Node& node, const std::string& where) {
  const double v = ScalarNumber(node, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    Fail(Errc::kMalformedDocument, where, "expected an integer");
  }
  return static_cast<int>(v);
}

PredictorSpec ParsePredictor(const YAML::Node& section, const std::string& where,
                             const RuntimeKinds& kinds) {
  RequireMap(section, where);
  CheckKeys(section, where, {"predictor"});
  const std::string pwhere = where + ".predictor";
  YAML::Node predictor = Required(section, "predictor", where);
  RequireMap(predictor, pwhere);
  if (predictor.size() != 1) {
    Fail(Errc::kMalformedDocument, pwhere, "expected exactly one runtime kind");
  }
  const auto entry = *predictor.begin();
  const std::string kind_name = entry.first.as<std::string>();
  auto kind = kinds.Resolve(kind_name);
  if (!kind) Fail(Errc::kUnknownField, pwhere, "unknown runtime kind '" + kind_name + "'");

  const std::string kwhere = pwhere + "." + kind_name;
  const YAML::Node body = entry.second;
  RequireMap(body, kwhere);
  CheckKeys(body, kwhere, {"storageUri", "resources"});

  PredictorSpec out;
  out.runtime_kind = *kind;
  out.storage_uri = Scalar(Required(body, "storageUri", kwhere), kwhere + ".storageUri");
  if (const YAML::Node res = body["resources"]; res && !res.IsNull()) {
    const std::string rwhere = kwhere + ".resources";
    RequireMap(res, rwhere);
    CheckKeys(res, rwhere, {"containerConcurrency", "fetchSeconds"});
    PredictorResources r;
    if (res["containerConcurrency"]) {
      r.container_concurrency =
          ScalarInt(res["containerConcurrency"], rwhere + ".containerConcurrency");
    }
    if (res["fetchSeconds"]) {
      r.fetch_seconds = ScalarNumber(res["fetchSeconds"], rwhere + ".fetchSeconds");
    }
    if (r.container_concurrency || r.fetch_seconds) out.resources = r;
  }
  return out;
}

ComponentSpec ParseComponent(const YAML::Node& node, const std::string& where) {
  RequireMap(node, where);
  ComponentSpec c;
  c.kind = Scalar(Required(node, "kind", where), where + ".kind");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (key == "kind") continue;
    c.params[key] = Scalar(kv.second, where + "." + key);
  }
  return c;
}

void EmitPredictor(YAML::Emitter& out, const PredictorSpec& p) {
  out << YAML::BeginMap << YAML::Key << "predictor" << YAML::Value;
  out << YAML::BeginMap << YAML::Key << p.runtime_kind << YAML::Value;
  out << YAML::BeginMap;
  out << YAML::Key << "storageUri" << YAML::Value << p.storage_uri;
  if (p.resources) {
    out << YAML::Key << "resources" << YAML::Value << YAML::BeginMap;
    if (p.resources->container_concurrency) {
      out << YAML::Key << "containerConcurrency" << YAML::Value
          << *p.resources->container_concurrency;
    }
    if (p.resources->fetch_seconds) {
      out << YAML::Key << "fetchSeconds" << YAML::Value
          << FormatDouble(*p.resources->fetch_seconds);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::EndMap << YAML::EndMap;
}

void EmitComponent(YAML::Emitter& out, const ComponentSpec& c) {
  out << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << c.kind;
  for (const auto& [k, v] : c.params) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
}

struct AnnotationRule {
  std::string_view key;
  double min;
  bool integer;
  bool strict;  // min is exclusive
  bool boolean = false;
};

constexpr AnnotationRule kAnnotationRules[] = {
    {"autoscaling.target", 0, false, true},
    {"autoscaling.containerConcurrency", 1, true, false},
    {"autoscaling.minReplicas", 0, true, false},
    {"autoscaling.maxReplicas", 1, true, false},
    {"autoscaling.initialScale", 0, true, false},
    {"autoscaling.stableWindowSeconds", 0, false, true},
    {"autoscaling.panicWindowSeconds", 0, false, true},
    {"autoscaling.panicThreshold", 0, false, true},
    {"autoscaling.scaleToZeroGraceSeconds", 0, false, false},
    {"autoscaling.tickSeconds", 0, false, true},
    {"autoscaling.maxScaleUpRate", 0, false, true},
    {"queue.capacity", 0, true, false},
    {"batching.maxSize", 1, true, false},
    {"batching.maxLatencyMs", 0, false, false},
    {"activator.capacity", 0, true, false},
    {"activator.timeoutSeconds", 0, false, true},
    {"rollout.stepSize", 1, true, false},
    {"rollout.maxFailures", 1, true, false},
    {"drain.deadlineSeconds", 0, false, true},
    {"payloadLog.enabled", 0, false, false, true},
};

constexpr std::string_view kReservedPrefixes[] = {
    "autoscaling.", "queue.", "batching.", "activator.", "rollout.", "drain.",
    "payloadLog."};

void ValidatePredictor(const PredictorSpec& p, const std::string& where,
                       std::vector<std::string>& out) {
  const auto pos = p.storage_uri.find("://");
  if (pos == std::string::npos || pos == 0) {
    out.push_back(where + ": storageUri has no scheme prefix");
  }
  if (!RuntimeKinds::Default().Resolve(p.runtime_kind)) {
    out.push_back(where + ": unregistered runtime kind '" + p.runtime_kind + "'");
  }
  if (p.resources) {
    if (p.resources->container_concurrency && *p.resources->container_concurrency < 1) {
      out.push_back(where + ": containerConcurrency must be >= 1");
    }
    if (p.resources->fetch_seconds && *p.resources->fetch_seconds < 0) {
      out.push_back(where + ": fetchSeconds must be >= 0");
    }
  }
}

bool ValidName(const std::string& name) {
  if (name.empty() || name.size() > 63) return false;
  if (name.front() == '-' || name.back() == '-') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

}  // namespace

std::string RevisionId::ToString() const {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(value >> (56 - 8 * i));
  return internal::ToHex(bytes, 8);
}

RevisionId RevisionId::FromString(std::string_view hex) {
  RevisionId id;
  auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), id.value, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size() || hex.size() != 16) {
    throw Error(Errc::kInvalidArgument, "bad revision id '" + std::string(hex) + "'");
  }
  return id;
}

std::string_view RoleName(RevisionRole role) {
  switch (role) {
    case RevisionRole::kDefault: return "default";
    case RevisionRole::kCanary: return "canary";
    case RevisionRole::kShadow: return "shadow";
  }
  return "default";
}

const RuntimeKinds& RuntimeKinds::Default() {
  static const RuntimeKinds kinds = [] {
    RuntimeKinds k;
    k.Register("linear");
    k.Register("sleep");
    for (const char* alias : {"tensorflow", "sklearn", "xgboost", "pytorch", "onnx"}) {
      k.Alias(alias, "linear");
    }
    return k;
  }();
  return kinds;
}

std::optional<std::string> RuntimeKinds::Resolve(std::string_view name) const {
  if (auto it = kinds_.find(name); it != kinds_.end()) return *it;
  if (auto it = aliases_.find(name); it != aliases_.end()) return it->second;
  return std::nullopt;
}

InferenceServiceSpec ParseSpec(std::string_view document, const RuntimeKinds& kinds) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::kMalformedDocument, e.what());
  }
  if (!root || root.IsNull()) Fail(Errc::kMalformedDocument, "", "empty document");
  try {
    RequireMap(root, "document");
    CheckKeys(root, "document", {"apiVersion", "kind", "metadata", "spec"});
    const auto api = Scalar(Required(root, "apiVersion", "document"), "apiVersion");
    if (api != kApiVersion && api != "serving.kubeflow.org/v1alpha2" &&
        api != "serving.kubeflow.org/v1beta1") {
      Fail(Errc::kMalformedDocument, "apiVersion",
           "unsupported '" + api + "', expected " + std::string(kApiVersion));
    }
    const auto kind = Scalar(Required(root, "kind", "document"), "kind");
    if (kind != kKind) Fail(Errc::kMalformedDocument, "kind", "unsupported '" + kind + "'");

    InferenceServiceSpec spec;
    const YAML::Node meta = Required(root, "metadata", "document");
    RequireMap(meta, "metadata");
    CheckKeys(meta, "metadata", {"name", "annotations"});
    spec.name = Scalar(Required(meta, "name", "metadata"), "metadata.name");
    if (const YAML::Node ann = meta["annotations"]; ann && !ann.IsNull()) {
      RequireMap(ann, "metadata.annotations");
      for (const auto& kv : ann) {
        const auto key = kv.first.as<std::string>();
        spec.annotations[key] = Scalar(kv.second, "metadata.annotations." + key);
      }
    }

    const YAML::Node body = Required(root, "spec", "document");
    RequireMap(body, "spec");
    CheckKeys(body, "spec", {"default", "canary", "canaryTrafficPercent", "shadow",
                             "transformer", "explainer"});
    spec.default_predictor =
        ParsePredictor(Required(body, "default", "spec"), "spec.default", kinds);
    if (const YAML::Node c = body["canary"]; c && !c.IsNull()) {
      spec.canary = ParsePredictor(c, "spec.canary", kinds);
    }
    if (const YAML::Node s = body["shadow"]; s && !s.IsNull()) {
      spec.shadow = ParsePredictor(s, "spec.shadow", kinds);
    }
    if (const YAML::Node p = body["canaryTrafficPercent"]; p && !p.IsNull()) {
      spec.canary_traffic_percent = ScalarInt(p, "spec.canaryTrafficPercent");
    }
    if (const YAML::Node t = body["transformer"]; t && !t.IsNull()) {
      spec.transformer = ParseComponent(t, "spec.transformer");
    }
    if (const YAML::Node e = body["explainer"]; e && !e.IsNull()) {
      spec.explainer = ParseComponent(e, "spec.explainer");
    }
    return spec;
  } catch (const YAML::Exception& e) {
    throw Error(Errc::kMalformedDocument, e.what());
  }
}

std::string SerializeSpec(const InferenceServiceSpec& spec) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "apiVersion" << YAML::Value << std::string(kApiVersion);
  out << YAML::Key << "kind" << YAML::Value << std::string(kKind);
  out << YAML::Key << "metadata" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << spec.name;
  if (!spec.annotations.empty()) {
    out << YAML::Key << "annotations" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : spec.annotations) {
      out << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::Key << "spec" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "default" << YAML::Value;
  EmitPredictor(out, spec.default_predictor);
  if (spec.canary_traffic_percent != 0) {
    out << YAML::Key << "canaryTrafficPercent" << YAML::Value << spec.canary_traffic_percent;
  }
  if (spec.canary) {
    out << YAML::Key << "canary" << YAML::Value;
    EmitPredictor(out, *spec.canary);
  }
  if (spec.shadow) {
    out << YAML::Key << "shadow" << YAML::Value;
    EmitPredictor(out, *spec.shadow);
  }
  if (spec.transformer) {
    out << YAML::Key << "transformer" << YAML::Value;
    EmitComponent(out, *spec.transformer);
  }
  if (spec.explainer) {
    out << YAML::Key << "explainer" << YAML::Value;
    EmitComponent(out, *spec.explainer);
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ValidationReport Validate(const InferenceServiceSpec& spec) {
  ValidationReport report;
  auto& v = report.violations;
  if (!ValidName(spec.name)) {
    v.push_back("metadata.name: must be a nonempty lowercase identifier");
  }
  if (spec.canary_traffic_percent < 0 || spec.canary_traffic_percent > 100) {
    v.push_back("spec.canaryTrafficPercent: percent out of range (0..100)");
  }
  if (spec.canary_traffic_percent > 0 && !spec.canary) {
    v.push_back("spec.canary: canary required when canaryTrafficPercent > 0");
  }
  ValidatePredictor(spec.default_predictor, "spec.default", v);
  if (spec.canary) ValidatePredictor(*spec.canary, "spec.canary", v);
  if (spec.shadow) ValidatePredictor(*spec.shadow, "spec.shadow", v);

  for (const auto& [key, value] : spec.annotations) {
    const auto rule = std::find_if(std::begin(kAnnotationRules), std::end(kAnnotationRules),
                                   [&](const AnnotationRule& r) { return r.key == key; });
    if (rule == std::end(kAnnotationRules)) {
      for (auto prefix : kReservedPrefixes) {
        if (key.rfind(prefix, 0) == 0) {
          v.push_back("metadata.annotations." + key + ": unknown annotation");
          break;
        }
      }
      continue;
    }
    if (rule->boolean) {
      if (!ParseBool(value)) v.push_back("metadata.annotations." + key + ": expected a boolean");
      continue;
    }
    auto num = ParseNumber(value);
    if (!num) {
      v.push_back("metadata.annotations." + key + ": expected a number");
    } else if (rule->integer && *num != std::floor(*num)) {
      v.push_back("metadata.annotations." + key + ": expected an integer");
    } else if (rule->strict ? *num <= rule->min : *num < rule->min) {
      v.push_back("metadata.annotations." + key + ": value out of range");
    }
  }
  if (report.ok()) {
    const auto& a = spec.annotations;
    if (AnnotationDouble(a, "autoscaling.minReplicas", 0) >
        AnnotationDouble(a, "autoscaling.maxReplicas", 20)) {
      v.push_back("metadata.annotations: minReplicas exceeds maxReplicas");
    }
    if (AnnotationDouble(a, "autoscaling.panicWindowSeconds", 6) >
        AnnotationDouble(a, "autoscaling.stableWindowSeconds", 60)) {
      v.push_back("metadata.annotations: panic window exceeds stable window");
    }
  }
  return report;
}

std::string CanonicalPredictor(const PredictorSpec& p) {
  std::ostringstream os;
  os << "kind=" << p.runtime_kind << "\nstorageUri=" << p.storage_uri << "\n";
  if (p.resources) {
    if (p.resources->container_concurrency) {
      os << "containerConcurrency=" << *p.resources->container_concurrency << "\n";
    }
    if (p.resources->fetch_seconds) {
      os << "fetchSeconds=" << FormatDouble(*p.resources->fetch_seconds) << "\n";
    }
  }
  return os.str();
}

RevisionId RevisionHash(const PredictorSpec& predictor) {
  return RevisionId{internal::Sha256Prefix64(CanonicalPredictor(predictor))};
}

bool ChangeSet::IsNoOp() const {
  return !default_changed && !canary_added && !canary_removed && !canary_changed &&
         !percent && !shadow_changed && !pipeline_changed && !annotations_changed;
}

std::vector<std::string> ChangeSet::Describe() const {
  std::vector<std::string> out;
  if (default_changed) out.push_back("default revision changed");
  if (canary_added) out.push_back("canary added");
  if (canary_removed) out.push_back("canary removed");
  if (canary_changed) out.push_back("canary changed");
  if (percent) {
    out.push_back("percent " + std::to_string(percent->first) + "->" +
                  std::to_string(percent->second));
  }
  if (shadow_changed) out.push_back("shadow changed");
  if (pipeline_changed) out.push_back("pipeline changed");
  if (annotations_changed) out.push_back("annotations changed");
  if (out.empty()) out.push_back("no-op");
  return out;
}

ChangeSet Diff(const InferenceServiceSpec& a, const InferenceServiceSpec& b) {
  if (a.name != b.name) {
    throw Error(Errc::kNameMismatch, "'" + a.name + "' vs '" + b.name + "'");
  }
  ChangeSet cs;
  cs.default_changed =
      RevisionHash(a.default_predictor) != RevisionHash(b.default_predictor);
  cs.canary_added = !a.canary && b.canary;
  cs.canary_removed = a.canary && !b.canary;
  cs.canary_changed =
      a.canary && b.canary && RevisionHash(*a.canary) != RevisionHash(*b.canary);
  if (a.canary_traffic_percent != b.canary_traffic_percent) {
    cs.percent = std::make_pair(a.canary_traffic_percent, b.canary_traffic_percent);
  }
  cs.shadow_changed = a.shadow != b.shadow;
  cs.pipeline_changed = a.transformer != b.transformer || a.explainer != b.explainer;
  cs.annotations_changed = a.annotations != b.annotations;
  return cs;
}

double AnnotationDouble(const std::map<std::string, std::string>& annotations,
                        std::string_view key, double fallback) {
  auto it = annotations.find(std::string(key));
  if (it == annotations.end()) return fallback;
  return ParseNumber(it->second).value_or(fallback);
}

bool AnnotationBool(const std::map<std::string, std::string>& annotations,
                    std::string_view key, bool fallback) {
  auto it = annotations.find(std::string(key));
  if (it == annotations.end()) return fallback;
  return ParseBool(it->second).value_or(fallback);
}

}  // namespace miniserve

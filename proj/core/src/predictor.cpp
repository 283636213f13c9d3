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

#include "miniserve/predictor.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "miniserve/error.hpp"

namespace miniserve {
namespace fs = std::filesystem;
namespace {

nlohmann::json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kStartupFailed, "missing " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kStartupFailed, path.string() + ": " + e.what());
  }
}

ServiceTime ParseServiceTime(const nlohmann::json& j) {
  ServiceTime st;
  if (j.is_number()) {
    st.a = j.get<double>();
    return st;
  }
  const auto dist = j.value("dist", std::string("fixed"));
  if (dist == "fixed") {
    st.a = j.at("value").get<double>();
  } else if (dist == "exp") {
    st.dist = ServiceTime::Dist::kExponential;
    st.a = j.at("mean").get<double>();
  } else if (dist == "lognormal") {
    st.dist = ServiceTime::Dist::kLognormal;
    st.a = j.at("mu").get<double>();
    st.b = j.at("sigma").get<double>();
  } else {
    throw Error(Errc::kStartupFailed, "unknown service time dist '" + dist + "'");
  }
  return st;
}

}  // namespace

Duration ServiceTime::Sample(Rng& rng) const {
  double ms = 0;
  switch (dist) {
    case Dist::kFixed:
      ms = a;
      break;
    case Dist::kExponential:
      ms = a > 0 ? std::exponential_distribution<double>(1.0 / a)(rng) : 0;
      break;
    case Dist::kLognormal:
      ms = std::lognormal_distribution<double>(a, b)(rng);
      break;
  }
  return FromMillis(std::max(0.0, ms));
}

LinearPredictor::LinearPredictor(std::vector<double> weights, double bias,
                                 Duration load_time, ServiceTime service)
    : weights_(std::move(weights)), bias_(bias), service_(service) {
  load_time_ = load_time;
}

std::unique_ptr<Predictor> LinearPredictor::Load(const fs::path& model_dir) {
  const auto j = ReadJson(model_dir / "model.json");
  try {
    ServiceTime st;
    if (j.contains("service_time_ms")) st = ParseServiceTime(j.at("service_time_ms"));
    return std::make_unique<LinearPredictor>(
        j.at("weights").get<std::vector<double>>(), j.value("bias", 0.0),
        FromSeconds(j.value("load_seconds", 0.0)), st);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kStartupFailed, "model.json: " + std::string(e.what()));
  }
}

PredictOutcome LinearPredictor::Predict(const Instances& instances, Rng&) const {
  PredictOutcome out;
  out.outputs.reserve(instances.size());
  for (const auto& x : instances) {
    if (x.size() != weights_.size()) {
      return {false, {},
              "expected " + std::to_string(weights_.size()) + " features, got " +
                  std::to_string(x.size())};
    }
    double y = bias_;
    for (std::size_t i = 0; i < x.size(); ++i) y += weights_[i] * x[i];
    out.outputs.push_back(y);
  }
  return out;
}

Duration LinearPredictor::ExecutionTime(std::size_t, Rng& rng) const {
  return service_.Sample(rng);
}

SleepPredictor::SleepPredictor(ServiceTime service, double per_item_ms,
                               double error_rate, Duration load_time)
    : service_(service), per_item_ms_(per_item_ms), error_rate_(error_rate) {
  load_time_ = load_time;
}

std::unique_ptr<Predictor> SleepPredictor::Load(const fs::path& model_dir) {
  const auto j = ReadJson(model_dir / "server.json");
  try {
    return std::make_unique<SleepPredictor>(
        ParseServiceTime(j.at("service_time_ms")), j.value("per_item_ms", 0.0),
        j.value("error_rate", 0.0), FromSeconds(j.value("load_seconds", 0.0)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kStartupFailed, "server.json: " + std::string(e.what()));
  }
}

PredictOutcome SleepPredictor::Predict(const Instances& instances, Rng& rng) const {
  if (error_rate_ > 0 && std::bernoulli_distribution(std::min(1.0, error_rate_))(rng)) {
    return {false, {}, "injected predictor failure"};
  }
  PredictOutcome out;
  out.outputs.reserve(instances.size());
  for (const auto& x : instances) {
    double sum = 0;
    for (double v : x) sum += v;
    out.outputs.push_back(sum);
  }
  return out;
}

Duration SleepPredictor::ExecutionTime(std::size_t items, Rng& rng) const {
  const double extra = items > 1 ? per_item_ms_ * static_cast<double>(items - 1) : 0.0;
  return service_.Sample(rng) + FromMillis(extra);
}

PredictorRegistry& PredictorRegistry::Default() {
  static PredictorRegistry registry = [] {
    PredictorRegistry r;
    r.Register("linear", &LinearPredictor::Load);
    r.Register("sleep", &SleepPredictor::Load);
    return r;
  }();
  return registry;
}

void PredictorRegistry::Register(std::string kind, PredictorFactory factory) {
  factories_[std::move(kind)] = std::move(factory);
}

std::unique_ptr<Predictor> PredictorRegistry::Load(std::string_view kind,
                                                   const fs::path& model_dir) const {
  auto it = factories_.find(kind);
  if (it == factories_.end()) {
    throw Error(Errc::kStartupFailed, "no runtime for kind '" + std::string(kind) + "'");
  }
  return it->second(model_dir);
}

}  // namespace miniserve

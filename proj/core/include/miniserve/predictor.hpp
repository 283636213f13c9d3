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

#ifndef MINISERVE_PREDICTOR_HPP_
#define MINISERVE_PREDICTOR_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "miniserve/clock.hpp"

namespace miniserve {

using Instance = std::vector<double>;
using Instances = std::vector<Instance>;
using Rng = std::mt19937_64;

struct PredictOutcome {
  bool ok = true;
  std::vector<double> outputs;  // one per instance
  std::string error;
};

// Service time distribution of a simulated model server, in milliseconds.
struct ServiceTime {
  enum class Dist { kFixed, kExponential, kLognormal };
  Dist dist = Dist::kFixed;
  double a = 0;  // fixed: value; exp: mean; lognormal: mu (of ln ms)
  double b = 0;  // lognormal: sigma

  Duration Sample(Rng& rng) const;
};

// One loaded model. Predict is pure with respect to serving state apart from
// the caller-owned RNG.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string_view kind() const = 0;
  virtual PredictOutcome Predict(const Instances& instances, Rng& rng) const = 0;
  // Execution time for one breaker unit carrying `items` instances.
  virtual Duration ExecutionTime(std::size_t items, Rng& rng) const = 0;

  Duration load_time() const { return load_time_; }

 protected:
  Duration load_time_{0};
};

// Dot product plus bias. model.json: {"weights": [...], "bias": b,
// "load_seconds": s, "service_time_ms": ms}.
class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(std::vector<double> weights, double bias,
                  Duration load_time = Duration::zero(),
                  ServiceTime service = {});
  static std::unique_ptr<Predictor> Load(const std::filesystem::path& model_dir);

  std::string_view kind() const override { return "linear"; }
  PredictOutcome Predict(const Instances& instances, Rng& rng) const override;
  Duration ExecutionTime(std::size_t items, Rng& rng) const override;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
  ServiceTime service_;
};

// Simulated server: sleeps for a sampled service time and answers with the
// sum of each instance's features. server.json: {"service_time_ms": {"dist":
// "fixed"|"exp"|"lognormal", ...}, "per_item_ms": x, "error_rate": p,
// "load_seconds": s}.
class SleepPredictor final : public Predictor {
 public:
  SleepPredictor(ServiceTime service, double per_item_ms = 0,
                 double error_rate = 0, Duration load_time = Duration::zero());
  static std::unique_ptr<Predictor> Load(const std::filesystem::path& model_dir);

  std::string_view kind() const override { return "sleep"; }
  PredictOutcome Predict(const Instances& instances, Rng& rng) const override;
  Duration ExecutionTime(std::size_t items, Rng& rng) const override;

 private:
  ServiceTime service_;
  double per_item_ms_;
  double error_rate_;
};

using PredictorFactory =
    std::function<std::unique_ptr<Predictor>(const std::filesystem::path&)>;

class PredictorRegistry {
 public:
  static PredictorRegistry& Default();

  void Register(std::string kind, PredictorFactory factory);
  // Throws Error{kStartupFailed} on unknown kind or unreadable model files.
  std::unique_ptr<Predictor> Load(std::string_view kind,
                                  const std::filesystem::path& model_dir) const;

 private:
  std::map<std::string, PredictorFactory, std::less<>> factories_;
};

}  // namespace miniserve

#endif  // MINISERVE_PREDICTOR_HPP_

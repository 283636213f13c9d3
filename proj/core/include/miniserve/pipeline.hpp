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

#ifndef MINISERVE_PIPELINE_HPP_
#define MINISERVE_PIPELINE_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miniserve/predictor.hpp"
#include "miniserve/request.hpp"
#include "miniserve/spec.hpp"

namespace miniserve {

// Request/response transformation around the predictor. Either step may
// throw to signal a TransformError.
struct Transformer {
  std::string kind;
  std::function<Instances(const Instances&)> preprocess;
  std::function<std::vector<double>(const std::vector<double>&)> postprocess;
};

struct Explainer {
  std::string kind;  // only "leave_one_out" ships
};

class ComponentRegistry {
 public:
  using TransformerFactory = std::function<Transformer(const ComponentSpec&)>;
  using ExplainerFactory = std::function<Explainer(const ComponentSpec&)>;

  // scale (factor, outputFactor), identity; explainer leave_one_out.
  static const ComponentRegistry& Default();

  void RegisterTransformer(std::string kind, TransformerFactory factory);
  void RegisterExplainer(std::string kind, ExplainerFactory factory);
  // Throw Error{kUnknownComponent}.
  Transformer MakeTransformer(const ComponentSpec& spec) const;
  Explainer MakeExplainer(const ComponentSpec& spec) const;

 private:
  std::map<std::string, TransformerFactory, std::less<>> transformers_;
  std::map<std::string, ExplainerFactory, std::less<>> explainers_;
};

// Asynchronous predictor call, e.g. route + replica dispatch.
using PredictBackend = std::function<void(Instances, ResponseCallback)>;

class Pipeline {
 public:
  Pipeline() = default;
  Pipeline(RevisionId revision, std::optional<Transformer> transformer,
           std::optional<Explainer> explainer);

  // postprocess(predict(preprocess(x))); absent transforms are identity.
  void Predict(Instances input, const PredictBackend& backend,
               ResponseCallback done) const;
  // Leave-one-out over preprocessed features: d + 1 backend calls.
  void Explain(Instances input, const PredictBackend& backend,
               ResponseCallback done) const;

  const RevisionId& revision() const { return revision_; }
  bool has_transformer() const { return transformer_.has_value(); }
  bool has_explainer() const { return explainer_.has_value(); }

 private:
  std::optional<Instances> Preprocess(Instances input, InferenceResponse& err) const;

  RevisionId revision_;
  std::optional<Transformer> transformer_;
  std::optional<Explainer> explainer_;
};

// Throws Error{kUnknownComponent}.
Pipeline BuildPipeline(const InferenceServiceSpec& spec, RevisionId revision,
                       const ComponentRegistry& registry = ComponentRegistry::Default());

}  // namespace miniserve

#endif  // MINISERVE_PIPELINE_HPP_

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

#include "miniserve/pipeline.hpp"

#include <exception>
#include <memory>
#include <stdexcept>

#include "miniserve/error.hpp"

namespace miniserve {
namespace {

double ParamDouble(const ComponentSpec& spec, const std::string& key, double fallback) {
  auto it = spec.params.find(key);
  if (it == spec.params.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::kUnknownComponent,
                spec.kind + ": parameter '" + key + "' is not a number");
  }
}

InferenceResponse Failure(ResponseStatus status, std::string stage, std::string message) {
  InferenceResponse r;
  r.status = status;
  r.stage = std::move(stage);
  r.message = std::move(message);
  return r;
}

}  // namespace

const ComponentRegistry& ComponentRegistry::Default() {
  static const ComponentRegistry registry = [] {
    ComponentRegistry r;
    r.RegisterTransformer("identity", [](const ComponentSpec&) {
      return Transformer{"identity", nullptr, nullptr};
    });
    r.RegisterTransformer("scale", [](const ComponentSpec& spec) {
      const double in = ParamDouble(spec, "factor", 1.0);
      const double out = ParamDouble(spec, "outputFactor", 1.0);
      Transformer t;
      t.kind = "scale";
      t.preprocess = [in](const Instances& xs) {
        Instances ys = xs;
        for (auto& x : ys) {
          for (auto& v : x) v *= in;
        }
        return ys;
      };
      t.postprocess = [out](const std::vector<double>& ys) {
        std::vector<double> zs = ys;
        for (auto& v : zs) v *= out;
        return zs;
      };
      return t;
    });
    r.RegisterExplainer("leave_one_out", [](const ComponentSpec&) {
      return Explainer{"leave_one_out"};
    });
    return r;
  }();
  return registry;
}

void ComponentRegistry::RegisterTransformer(std::string kind, TransformerFactory factory) {
  transformers_[std::move(kind)] = std::move(factory);
}

void ComponentRegistry::RegisterExplainer(std::string kind, ExplainerFactory factory) {
  explainers_[std::move(kind)] = std::move(factory);
}

Transformer ComponentRegistry::MakeTransformer(const ComponentSpec& spec) const {
  auto it = transformers_.find(spec.kind);
  if (it == transformers_.end()) {
    throw Error(Errc::kUnknownComponent, "transformer '" + spec.kind + "'");
  }
  return it->second(spec);
}

Explainer ComponentRegistry::MakeExplainer(const ComponentSpec& spec) const {
  auto it = explainers_.find(spec.kind);
  if (it == explainers_.end()) {
    throw Error(Errc::kUnknownComponent, "explainer '" + spec.kind + "'");
  }
  return it->second(spec);
}

Pipeline::Pipeline(RevisionId revision, std::optional<Transformer> transformer,
                   std::optional<Explainer> explainer)
    : revision_(revision),
      transformer_(std::move(transformer)),
      explainer_(std::move(explainer)) {}

std::optional<Instances> Pipeline::Preprocess(Instances input,
                                              InferenceResponse& err) const {
  if (!transformer_ || !transformer_->preprocess) return input;
  try {
    return transformer_->preprocess(input);
  } catch (const std::exception& e) {
    err = Failure(ResponseStatus::kTransformError, "preprocess", e.what());
    return std::nullopt;
  }
}

void Pipeline::Predict(Instances input, const PredictBackend& backend,
                       ResponseCallback done) const {
  InferenceResponse err;
  auto features = Preprocess(std::move(input), err);
  if (!features) {
    done(std::move(err));
    return;
  }
  // Copy the postprocess step so the continuation does not borrow `this`.
  std::function<std::vector<double>(const std::vector<double>&)> post;
  if (transformer_) post = transformer_->postprocess;
  backend(std::move(*features),
          [post = std::move(post), done = std::move(done)](InferenceResponse resp) {
            if (resp.ok() && post) {
              try {
                resp.outputs = post(resp.outputs);
              } catch (const std::exception& e) {
                auto served = resp.served_revision;
                resp = Failure(ResponseStatus::kTransformError, "postprocess", e.what());
                resp.served_revision = served;
              }
            }
            done(std::move(resp));
          });
}

void Pipeline::Explain(Instances input, const PredictBackend& backend,
                       ResponseCallback done) const {
  if (!explainer_) {
    done(Failure(ResponseStatus::kExplainerNotConfigured, "explainer",
                 "no explainer configured"));
    return;
  }
  InferenceResponse err;
  auto features = Preprocess(std::move(input), err);
  if (!features) {
    done(std::move(err));
    return;
  }
  const Instances xs = std::move(*features);
  const std::size_t dims = xs.empty() ? 0 : xs.front().size();
  for (const auto& x : xs) {
    if (x.size() != dims) {
      done(Failure(ResponseStatus::kBadRequest, "explainer",
                   "instances must share one feature count"));
      return;
    }
  }

  // Slot 0 is f(x); slot i + 1 is f(x with feature i zeroed).
  struct Gather {
    std::vector<InferenceResponse> results;
    std::size_t remaining;
    ResponseCallback done;
    std::size_t instances;
  };
  auto g = std::make_shared<Gather>();
  g->results.resize(dims + 1);
  g->remaining = dims + 1;
  g->done = std::move(done);
  g->instances = xs.size();

  auto finish = [g] {
    InferenceResponse out;
    for (auto& r : g->results) {
      if (!r.ok()) {
        out = std::move(r);
        g->done(std::move(out));
        return;
      }
    }
    out.served_revision = g->results[0].served_revision;
    out.replica = g->results[0].replica;
    const auto& base = g->results[0].outputs;
    const std::size_t dims = g->results.size() - 1;
    for (std::size_t n = 0; n < g->instances; ++n) {
      Explanation e;
      e.base = base.at(n);
      for (std::size_t i = 0; i < dims; ++i) {
        e.contributions.push_back(base.at(n) - g->results[i + 1].outputs.at(n));
      }
      out.outputs.push_back(e.base);
      out.explanations.push_back(std::move(e));
    }
    g->done(std::move(out));
  };

  for (std::size_t slot = 0; slot <= dims; ++slot) {
    Instances call = xs;
    if (slot > 0) {
      for (auto& x : call) x[slot - 1] = 0.0;
    }
    backend(std::move(call), [g, slot, finish](InferenceResponse resp) {
      g->results[slot] = std::move(resp);
      if (--g->remaining == 0) finish();
    });
  }
}

Pipeline BuildPipeline(const InferenceServiceSpec& spec, RevisionId revision,
                       const ComponentRegistry& registry) {
  std::optional<Transformer> transformer;
  std::optional<Explainer> explainer;
  if (spec.transformer) transformer = registry.MakeTransformer(*spec.transformer);
  if (spec.explainer) explainer = registry.MakeExplainer(*spec.explainer);
  return Pipeline(revision, std::move(transformer), std::move(explainer));
}

}  // namespace miniserve

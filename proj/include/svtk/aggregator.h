// svtk/aggregator.h

// Copyright 2026 The svtk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Learnable weighted average of all hidden layers of an upstream encoder:
// o_t = sum_l w_l * h_{l,t}, with w = softmax(logits).

#ifndef SVTK_AGGREGATOR_H_
#define SVTK_AGGREGATOR_H_

#include <span>
#include <string>
#include <vector>

#include "svtk/autograd.h"
#include "svtk/params.h"
#include "svtk/signal.h"
#include "svtk/upstream.h"

namespace svtk {

/// Softmax of the logits. Throws NumericError on non-finite input.
std::vector<double> normalized_weights(std::span<const double> logits);

/// Weighted sum of the stack's layers. weights.size() must equal L+1.
FeatureMatrix aggregate(const LayerStack& stack, std::span<const double> weights);

class Aggregator {
 public:
  /// Logits start at zero, i.e. uniform weights.
  explicit Aggregator(std::size_t num_layers);

  std::size_t num_layers() const { return static_cast<std::size_t>(logits_.cols()); }
  ag::Var logits() const { return logits_; }
  std::vector<double> logit_values() const;
  std::vector<double> weights() const { return normalized_weights(logit_values()); }
  void set_logits(std::span<const double> logits);

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Differentiable aggregation; gradients reach the logits and any layer
  /// that requires them.
  ag::Var forward(std::span<const ag::Var> layers) const;

 private:
  ParamSet params_;
  ag::Var logits_;
};

struct WeightRow {
  std::string label;
  double weight;
};

/// One row per layer, layer 0 first. Empty labels default to layer_0..layer_L.
std::vector<WeightRow> export_weights(std::span<const double> weights,
                                      std::span<const std::string> labels = {});

/// "layer,weight" header, LF line endings, weights with 6 decimals.
std::string weights_csv(std::span<const WeightRow> rows);

}  // namespace svtk

#endif  // SVTK_AGGREGATOR_H_

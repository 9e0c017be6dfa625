// svtk/src/aggregator.cc

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

#include "svtk/aggregator.h"

#include <algorithm>
#include <limits>

#include <cmath>
#include <cstdio>

#include "svtk/error.h"

namespace svtk {

std::vector<double> normalized_weights(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("no aggregation logits");
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("aggregation logits must be finite");
    mx = std::max(mx, z);
  }
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] - mx);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

FeatureMatrix aggregate(const LayerStack& stack, std::span<const double> weights) {
  if (weights.size() != stack.num_layers())
    throw NumericError("aggregate: " + std::to_string(weights.size()) + " weights for " +
                       std::to_string(stack.num_layers()) + " layers");
  stack.validate();
  FeatureMatrix out;
  out.frame_rate_hz = stack.frame_rate_hz;
  out.frames = ag::Matrix::Zero(stack.num_frames(), stack.dim());
  for (std::size_t l = 0; l < weights.size(); ++l) out.frames += weights[l] * stack.layers[l];
  return out;
}

Aggregator::Aggregator(std::size_t num_layers) {
  if (num_layers < 2) throw ConfigError("aggregator needs at least 2 layers");
  logits_ = params_.add("aggregator.logits",
                        ag::Matrix::Zero(1, static_cast<Eigen::Index>(num_layers)));
}

std::vector<double> Aggregator::logit_values() const {
  const auto& v = logits_.value();
  return {v.data(), v.data() + v.size()};
}

void Aggregator::set_logits(std::span<const double> logits) {
  if (logits.size() != num_layers()) throw NumericError("logit count mismatch");
  for (std::size_t i = 0; i < logits.size(); ++i)
    logits_.mutable_value()(0, static_cast<Eigen::Index>(i)) = logits[i];
}

ag::Var Aggregator::forward(std::span<const ag::Var> layers) const {
  if (layers.size() != num_layers())
    throw NumericError("aggregate: " + std::to_string(num_layers()) + " weights for " +
                       std::to_string(layers.size()) + " layers");
  return ag::weighted_sum(layers, ag::softmax(logits_));
}

std::vector<WeightRow> export_weights(std::span<const double> weights,
                                      std::span<const std::string> labels) {
  if (!labels.empty() && labels.size() != weights.size())
    throw ConfigError("export_weights: label count does not match weight count");
  std::vector<WeightRow> rows;
  for (std::size_t i = 0; i < weights.size(); ++i)
    rows.push_back({labels.empty() ? "layer_" + std::to_string(i) : labels[i], weights[i]});
  return rows;
}

std::string weights_csv(std::span<const WeightRow> rows) {
  std::string out = "layer,weight\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.weight);
    out += r.label + "," + buf + "\n";
  }
  return out;
}

}  // namespace svtk

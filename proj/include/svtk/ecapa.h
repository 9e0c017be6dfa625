// svtk/ecapa.h

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

// ECAPA-TDNN speaker embedding extractor:
//   stem conv (k=5) -> 3 SE-Res2Blocks (dilations 2,3,4)
//   -> multi-layer feature aggregation (concat + 1x1 conv)
//   -> attentive statistics pooling -> affine projection.
// Each conv is followed by ReLU and a per-channel affine (scale, shift), the
// inference-time form of batch normalization. Convolutions use "same"
// padding with edge replication.

#ifndef SVTK_ECAPA_H_
#define SVTK_ECAPA_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "svtk/autograd.h"
#include "svtk/params.h"
#include "svtk/signal.h"

namespace svtk {

struct EcapaConfig {
  int in_dim = 64;
  int channels = 64;
  int res2_scale = 8;
  std::array<int, 3> dilations = {2, 3, 4};
  int se_bottleneck = 32;
  int attention_channels = 32;
  int embed_dim = 64;
  int stem_kernel = 5;

  /// The "small" published configuration: C=512, E=192.
  static EcapaConfig voxceleb(int in_dim = 40);
  void validate() const;
};

/// conv -> relu -> per-channel affine.
struct ConvUnit {
  ag::Var weight, bias, scale, shift;
  int kernel = 1;
  int dilation = 1;

  ag::Var operator()(const ag::Var& x) const;
};

struct SeParams {
  ag::Var w1, b1, w2, b2;
};

struct Res2BlockParams {
  ConvUnit conv1;
  std::vector<ConvUnit> res2;  // res2_scale - 1 dilated 3-tap units
  ConvUnit conv2;
  SeParams se;
};

struct AttentionParams {
  ag::Var w, b, v;
};

/// s = sigmoid(W2 relu(W1 mean_t(x) + b1) + b2); returns x scaled per channel.
ag::Var se_gate(const ag::Var& x, const SeParams& p);

/// 1x1 conv, hierarchical dilated Res2 convolutions over res2_scale channel
/// groups, 1x1 conv, SE gate and residual add of the input.
ag::Var se_res2_block(const ag::Var& x, const Res2BlockParams& p, int res2_scale);

inline constexpr double kPoolVarianceFloor = 1e-8;

/// Single attention distribution over frames, alpha = softmax_t(v . tanh(W x_t + b));
/// returns [weighted mean, weighted std] as a 1 x 2C row.
ag::Var attentive_stats_pool(const ag::Var& x, const AttentionParams& p);

class Ecapa {
 public:
  Ecapa(const EcapaConfig& cfg, std::uint64_t seed);

  const EcapaConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  const ConvUnit& stem() const { return stem_; }
  const Res2BlockParams& block(int i) const { return blocks_[static_cast<std::size_t>(i)]; }
  const ConvUnit& mfa() const { return mfa_; }
  const AttentionParams& attention() const { return attention_; }
  ag::Var fc_weight() const { return fc_w_; }
  ag::Var fc_bias() const { return fc_b_; }

  /// T x in_dim features -> 1 x embed_dim embedding.
  ag::Var forward(const ag::Var& features) const;
  Eigen::RowVectorXd embed(const FeatureMatrix& features) const;
  std::vector<Eigen::RowVectorXd> embed_batch(std::span<const FeatureMatrix> batch) const;

 private:
  EcapaConfig cfg_;
  ParamSet params_;
  ConvUnit stem_;
  std::vector<Res2BlockParams> blocks_;
  ConvUnit mfa_;
  AttentionParams attention_;
  ag::Var fc_w_, fc_b_;
};

}  // namespace svtk

#endif  // SVTK_ECAPA_H_

// svtk/src/ecapa.cc

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

#include "svtk/ecapa.h"

#include <cmath>
#include <string>

#include "svtk/error.h"
#include "svtk/random.h"

namespace svtk {

namespace {

ag::Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

ConvUnit make_unit(ParamSet& ps, Rng& rng, const std::string& name, int cin, int cout,
                   int kernel, int dilation) {
  ConvUnit u;
  u.kernel = kernel;
  u.dilation = dilation;
  const double fan_in = static_cast<double>(kernel) * cin;
  u.weight = ps.add(name + ".weight", gaussian(rng, kernel * cin, cout, std::sqrt(2.0 / fan_in)));
  u.bias = ps.add(name + ".bias", ag::Matrix::Zero(1, cout));
  u.scale = ps.add(name + ".scale", ag::Matrix::Ones(1, cout));
  u.shift = ps.add(name + ".shift", ag::Matrix::Zero(1, cout));
  return u;
}

}  // namespace

EcapaConfig EcapaConfig::voxceleb(int in_dim) {
  EcapaConfig c;
  c.in_dim = in_dim;
  c.channels = 512;
  c.res2_scale = 8;
  c.se_bottleneck = 128;
  c.attention_channels = 128;
  c.embed_dim = 192;
  return c;
}

void EcapaConfig::validate() const {
  if (in_dim < 1) throw ConfigError("ecapa.in_dim must be >= 1");
  if (channels < 1) throw ConfigError("ecapa.channels must be >= 1");
  if (res2_scale < 1 || channels % res2_scale != 0)
    throw ConfigError("ecapa.channels must be divisible by ecapa.res2_scale");
  for (int d : dilations)
    if (d < 1) throw ConfigError("ecapa.dilations must be positive");
  if (se_bottleneck < 1) throw ConfigError("ecapa.se_bottleneck must be >= 1");
  if (attention_channels < 1) throw ConfigError("ecapa.attention_channels must be >= 1");
  if (embed_dim < 1) throw ConfigError("ecapa.embed_dim must be >= 1");
  if (stem_kernel < 1 || stem_kernel % 2 == 0)
    throw ConfigError("ecapa.stem_kernel must be odd");
}

ag::Var ConvUnit::operator()(const ag::Var& x) const {
  ag::Var y = kernel == 1 ? ag::linear(x, weight, bias)
                          : ag::conv1d(x, weight, bias, kernel, dilation);
  return ag::add_row(ag::mul_row(ag::relu(y), scale), shift);
}

ag::Var se_gate(const ag::Var& x, const SeParams& p) {
  if (x.rows() < 1) throw NumericError("se_gate: empty input");
  ag::Var squeeze = ag::mean_rows(x);
  ag::Var hidden = ag::relu(ag::linear(squeeze, p.w1, p.b1));
  ag::Var gate = ag::sigmoid(ag::linear(hidden, p.w2, p.b2));
  return ag::mul_row(x, gate);
}

ag::Var se_res2_block(const ag::Var& x, const Res2BlockParams& p, int res2_scale) {
  const Eigen::Index c = x.cols();
  if (res2_scale < 1 || c % res2_scale != 0)
    throw NumericError("se_res2_block: channels not divisible by res2 scale");
  if (static_cast<int>(p.res2.size()) != res2_scale - 1)
    throw NumericError("se_res2_block: wrong number of res2 convolutions");
  ag::Var y = p.conv1(x);
  if (y.cols() != c) throw NumericError("se_res2_block: shape mismatch");
  const Eigen::Index width = c / res2_scale;
  std::vector<ag::Var> outs;
  outs.reserve(static_cast<std::size_t>(res2_scale));
  for (int i = 0; i < res2_scale; ++i) {
    ag::Var part = ag::slice_cols(y, i * width, width);
    if (i == 0)
      outs.push_back(part);
    else if (i == 1)
      outs.push_back(p.res2[0](part));
    else
      outs.push_back(p.res2[static_cast<std::size_t>(i - 1)](ag::add(part, outs.back())));
  }
  ag::Var z = p.conv2(ag::concat_cols(outs));
  return ag::add(se_gate(z, p.se), x);
}

ag::Var attentive_stats_pool(const ag::Var& x, const AttentionParams& p) {
  if (x.rows() < 1) throw NumericError("attentive_stats_pool: empty input");
  ag::Var scores = ag::matmul(ag::tanh(ag::linear(x, p.w, p.b)), p.v);  // T x 1
  ag::Var alpha_t = ag::transpose(ag::softmax(scores));                 // 1 x T
  ag::Var mean = ag::matmul(alpha_t, x);
  ag::Var centered = ag::add_row(x, ag::scale(mean, -1.0));
  ag::Var var = ag::matmul(alpha_t, ag::mul(centered, centered));
  ag::Var stdev = ag::sqrt(ag::clamp_min(var, kPoolVarianceFloor));
  const ag::Var parts[] = {mean, stdev};
  return ag::concat_cols(parts);
}

Ecapa::Ecapa(const EcapaConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(seed, "ecapa"));
  const int c = cfg_.channels;
  stem_ = make_unit(params_, rng, "ecapa.stem", cfg_.in_dim, c, cfg_.stem_kernel, 1);
  const int width = c / cfg_.res2_scale;
  for (int b = 0; b < 3; ++b) {
    const std::string base = "ecapa.block" + std::to_string(b + 1);
    Res2BlockParams bp;
    bp.conv1 = make_unit(params_, rng, base + ".conv1", c, c, 1, 1);
    for (int i = 1; i < cfg_.res2_scale; ++i)
      bp.res2.push_back(make_unit(params_, rng, base + ".res2." + std::to_string(i), width,
                                  width, 3, cfg_.dilations[static_cast<std::size_t>(b)]));
    bp.conv2 = make_unit(params_, rng, base + ".conv2", c, c, 1, 1);
    bp.se.w1 = params_.add(base + ".se.w1",
                           gaussian(rng, c, cfg_.se_bottleneck, std::sqrt(2.0 / c)));
    bp.se.b1 = params_.add(base + ".se.b1", ag::Matrix::Zero(1, cfg_.se_bottleneck));
    bp.se.w2 = params_.add(base + ".se.w2", gaussian(rng, cfg_.se_bottleneck, c,
                                                     std::sqrt(1.0 / cfg_.se_bottleneck)));
    bp.se.b2 = params_.add(base + ".se.b2", ag::Matrix::Zero(1, c));
    blocks_.push_back(std::move(bp));
  }
  mfa_ = make_unit(params_, rng, "ecapa.mfa", 3 * c, 3 * c, 1, 1);
  const int a = cfg_.attention_channels;
  attention_.w = params_.add("ecapa.pool.w", gaussian(rng, 3 * c, a, std::sqrt(1.0 / (3 * c))));
  attention_.b = params_.add("ecapa.pool.b", ag::Matrix::Zero(1, a));
  attention_.v = params_.add("ecapa.pool.v", gaussian(rng, a, 1, std::sqrt(1.0 / a)));
  fc_w_ = params_.add("ecapa.fc.weight",
                      gaussian(rng, 6 * c, cfg_.embed_dim, std::sqrt(1.0 / (6 * c))));
  fc_b_ = params_.add("ecapa.fc.bias", ag::Matrix::Zero(1, cfg_.embed_dim));
}

ag::Var Ecapa::forward(const ag::Var& features) const {
  if (features.cols() != cfg_.in_dim)
    throw NumericError("ecapa: feature dim " + std::to_string(features.cols()) +
                       " does not match in_dim " + std::to_string(cfg_.in_dim));
  if (features.rows() < 1) throw NumericError("ecapa: no frames");
  ag::Var h = stem_(features);
  std::vector<ag::Var> outs;
  for (const auto& b : blocks_) {
    h = se_res2_block(h, b, cfg_.res2_scale);
    outs.push_back(h);
  }
  ag::Var agg = mfa_(ag::concat_cols(outs));
  ag::Var pooled = attentive_stats_pool(agg, attention_);
  return ag::linear(pooled, fc_w_, fc_b_);
}

Eigen::RowVectorXd Ecapa::embed(const FeatureMatrix& features) const {
  ag::NoGradGuard guard;
  return forward(ag::Var::constant(features.frames)).value().row(0);
}

std::vector<Eigen::RowVectorXd> Ecapa::embed_batch(std::span<const FeatureMatrix> batch) const {
  std::vector<Eigen::RowVectorXd> out;
  out.reserve(batch.size());
  for (const auto& f : batch) out.push_back(embed(f));
  return out;
}

}  // namespace svtk

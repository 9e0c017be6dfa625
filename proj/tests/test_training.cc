// svtk/tests/test_training.cc

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

#include "svtk/training.h"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "svtk/checkpoint.h"
#include "svtk/error.h"
#include "testing.h"

namespace svtk {
namespace {

using ag::Matrix;
using ag::Var;
using testing::random_matrix;

double loss_of(const Matrix& e, std::span<const int> y, const Matrix& a, double m, double s) {
  AamConfig cfg;
  cfg.margin = m;
  cfg.scale = s;
  return aam_loss(Var::constant(e), y, Var::constant(a), cfg).value()(0, 0);
}

double softmax_ce(const Matrix& logits, std::span<const int> y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    long double z = 0.0L;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) z += std::exp(static_cast<long double>(logits(i, j)));
    total += static_cast<double>(std::log(z) - logits(i, y[static_cast<std::size_t>(i)]));
  }
  return total / static_cast<double>(logits.rows());
}

Matrix unit_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

TEST_CASE("aam config validation") {
  AamConfig c;
  CHECK_NOTHROW(c.validate());
  c.margin = std::numbers::pi / 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.margin = 0.2;
  c.scale = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("zero margin and unit scale is softmax cross-entropy over cosines") {
  Rng rng(1);
  const Matrix e = random_matrix(rng, 6, 5), a = random_matrix(rng, 4, 5);
  const std::vector<int> y = {0, 3, 1, 2, 2, 0};
  const Matrix cos = unit_rows(e) * unit_rows(a).transpose();
  CHECK(loss_of(e, y, a, 0.0, 1.0) == doctest::Approx(softmax_ce(cos, y)).epsilon(1e-12));
}

TEST_CASE("two-class closed form") {
  Matrix e(1, 2), a(2, 2);
  e << 1.0, 0.0;
  a << 1.0, 0.0, -1.0, 0.0;
  const std::vector<int> y = {0};
  const long double eps = 1e-7L, s = 30.0L, m = 0.2L;
  // Both cosines hit the clamp; the target angle is acos(1 - eps).
  const long double ct = 1.0L - eps;
  const long double target = s * (ct * std::cos(m) - std::sqrt(1.0L - ct * ct) * std::sin(m));
  const long double other = s * (-1.0L + eps);
  const long double oracle = std::log1p(std::exp(other - target));
  const double got = loss_of(e, y, a, 0.2, 30.0);
  CHECK(std::abs(got - static_cast<double>(oracle)) <= 1e-9 * static_cast<double>(oracle));
  // Without the clamp the value is -log(e^{30 cos 0.2} / (e^{30 cos 0.2} + e^{-30})).
  const long double unclamped = std::log1p(std::exp(-s - s * std::cos(m)));
  CHECK(std::abs(got - static_cast<double>(unclamped)) < 1e-2 * static_cast<double>(unclamped));
  CHECK(got > 0.0);
}

TEST_CASE("gradients match finite differences") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial)
  for (double m : {0.0, 0.2, 0.5}) {
    Var e = Var::parameter(random_matrix(rng, 5, 4));
    Var a = Var::parameter(random_matrix(rng, 3, 4));
    const std::vector<int> y = {0, 1, 2, 1, 0};
    AamConfig cfg;
    cfg.margin = m;
    CHECK(testing::fd_max_rel_error({e, a}, [&] { return aam_loss(e, y, a, cfg); }) < 1e-4);
  }
}

TEST_CASE("fallback branch is used beyond pi - m and stays differentiable") {
  const double m = 0.5;
  Matrix e(1, 2), a(2, 2);
  e << -1.0, 0.05;  // nearly opposite to the target anchor
  a << 1.0, 0.0, 0.0, 1.0;
  const std::vector<int> y = {0};
  const Eigen::RowVectorXd u = e.row(0).normalized();
  const double c = u(0);
  REQUIRE(c <= std::cos(std::numbers::pi - m));
  const double s = 30.0;
  Matrix logits(1, 2);
  logits << s * (c - m * std::sin(m)), s * u(1);
  CHECK(loss_of(e, y, a, m, s) == doctest::Approx(softmax_ce(logits, y)).epsilon(1e-12));

  Var ev = Var::parameter(e), av = Var::parameter(a);
  AamConfig cfg;
  cfg.margin = m;
  CHECK(testing::fd_max_rel_error({ev, av}, [&] { return aam_loss(ev, y, av, cfg); }) < 1e-4);
}

TEST_CASE("errors") {
  Rng rng(3);
  const Matrix e = random_matrix(rng, 2, 3), a = random_matrix(rng, 2, 3);
  const std::vector<int> bad = {0, 2};
  CHECK_THROWS_AS(loss_of(e, bad, a, 0.2, 30), ConfigError);
  const std::vector<int> neg = {-1, 0};
  CHECK_THROWS_AS(loss_of(e, neg, a, 0.2, 30), ConfigError);
  Matrix z = e;
  z.row(1).setZero();
  const std::vector<int> ok = {0, 1};
  CHECK_THROWS_AS(loss_of(z, ok, a, 0.2, 30), NumericError);
  const std::vector<int> shortlabels = {0};
  CHECK_THROWS_AS(loss_of(e, shortlabels, a, 0.2, 30), NumericError);
}

TEST_CASE("loss is invariant to rescaling any single embedding") {
  Rng rng(4);
  const Matrix e = random_matrix(rng, 4, 6), a = random_matrix(rng, 5, 6);
  const std::vector<int> y = {4, 0, 2, 2};
  const double base = loss_of(e, y, a, 0.2, 30.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix f = e;
    f.row(trial % 4) *= scale(rng);
    CHECK(std::abs(loss_of(f, y, a, 0.2, 30.0) - base) < 1e-6);
  }
}

TEST_CASE("one gradient step decreases the margin-free loss on a separable problem") {
  Rng rng(5);
  Matrix a = Matrix::Identity(3, 3);
  Matrix e(6, 3);
  e << 2, 0.3, 0.1, 1.5, -0.2, 0.2, 0.1, 2, 0.3, -0.3, 1.7, 0.1, 0.2, 0.1, 2, 0.3, -0.1, 1.2;
  const std::vector<int> y = {0, 0, 1, 1, 2, 2};
  AamConfig cfg;
  cfg.margin = 0.0;
  Var ev = Var::parameter(e), av = Var::parameter(a);
  const Var loss = aam_loss(ev, y, av, cfg);
  ag::backward(loss);
  const double before = loss.value()(0, 0);
  const Matrix e2 = e - 1e-3 * ev.grad(), a2 = a - 1e-3 * av.grad();
  CHECK(loss_of(e2, y, a2, 0.0, 30.0) < before);
}

TEST_CASE("crop_random") {
  Rng rng(6);
  std::vector<double> three(48000);
  for (std::size_t i = 0; i < three.size(); ++i) three[i] = std::sin(0.01 * static_cast<double>(i));
  const Waveform w3(three);
  CHECK(crop_random(w3, 3.0, rng) == w3);

  std::vector<double> one(three.begin(), three.begin() + 16000);
  const Waveform tiled = crop_random(Waveform(one), 3.0, rng);
  REQUIRE(tiled.size() == 48000);
  for (std::size_t i = 0; i < 48000; ++i) CHECK(tiled.samples()[i] == one[i % 16000]);

  Rng r1(9), r2(9);
  const Waveform c1 = crop_random(w3, 1.0, r1), c2 = crop_random(w3, 1.0, r2);
  CHECK(c1 == c2);
  CHECK(c1.size() == 16000);
  // The crop is a contiguous window of the source.
  const auto it = std::search(three.begin(), three.end(), c1.samples().begin(), c1.samples().end());
  CHECK(it != three.end());

  // Every offset is reachable: first samples over many draws cover the range.
  Rng r3(10);
  std::vector<double> ramp(100);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 1000.0;
  std::set<double> starts;
  for (int i = 0; i < 2000; ++i) starts.insert(crop_random(Waveform(ramp), 95.0 / 16000.0, r3).samples()[0]);
  CHECK(starts.size() == 6);
  CHECK_THROWS_AS(crop_random(w3, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(Waveform(std::vector<double>{}), NumericError);
}

TEST_CASE("schedule defaults and validation") {
  TrainSchedule s;
  CHECK(s.stage1_epochs == 10);
  CHECK(s.stage2_epochs == 5);
  CHECK(s.lmft_epochs == 2);
  CHECK(s.crop_seconds == 3.0);
  CHECK(s.lmft_crop_seconds == 6.0);
  CHECK(s.lmft_margin == 0.5);
  s.stage2_epochs = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.stage2_epochs = 0;
  s.crop_seconds = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(parse_upstream_mode("mock") == UpstreamMode::kMock);
  CHECK(std::string(to_string(UpstreamMode::kImport)) == "import");
  CHECK_THROWS_AS(parse_upstream_mode("wavlm"), ConfigError);
}

ModelConfig tiny_model(UpstreamMode mode = UpstreamMode::kMock) {
  ModelConfig m;
  m.mode = mode;
  m.upstream.n_layers = 3;
  m.upstream.dim = 8;
  m.upstream.conv_strides = {10, 16};
  m.upstream.conv_channels = 8;
  m.ecapa.channels = 16;
  m.ecapa.res2_scale = 4;
  m.ecapa.se_bottleneck = 8;
  m.ecapa.attention_channels = 8;
  m.ecapa.embed_dim = 8;
  m.seed = 3;
  return m;
}

// Each speaker is a distinct tone plus noise.
std::vector<TrainItem> tone_data(int speakers, int utts, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<TrainItem> out;
  for (int s = 0; s < speakers; ++s)
    for (int u = 0; u < utts; ++u) {
      std::vector<double> x(8000);
      const double f = 200.0 + 350.0 * s;
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = 0.3 * std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / 16000.0) + noise(rng);
      out.push_back({"s" + std::to_string(s) + "u" + std::to_string(u), "s" + std::to_string(s), Waveform(x)});
    }
  return out;
}

TrainOptions tiny_options(int e1, int e2, int e3) {
  TrainOptions o;
  o.schedule.stage1_epochs = e1;
  o.schedule.stage2_epochs = e2;
  o.schedule.lmft_epochs = e3;
  o.schedule.crop_seconds = 0.3;
  o.schedule.lmft_crop_seconds = 0.4;
  o.schedule.batch_size = 4;
  o.seed = 11;
  return o;
}

TEST_CASE("empty schedule leaves the initialization unchanged") {
  SpeakerModel model(tiny_model());
  const std::string before = encode_checkpoint(model.tensors());
  const auto data = tone_data(3, 2, 1);
  const TrainResult r = train(model, data, tiny_options(0, 0, 0));
  CHECK(encode_checkpoint(model.tensors()) == before);
  CHECK(r.log.empty());
  CHECK(r.speakers == std::vector<std::string>{"s0", "s1", "s2"});
  CHECK(r.anchors->anchors().rows() == 3);
}

TEST_CASE("stage 1 freezes the upstream and stage 2 trains it") {
  const auto data = tone_data(3, 2, 2);
  SpeakerModel model(tiny_model());
  const std::string up0 = encode_checkpoint(model.upstream_params().tensors());
  const std::string head0 = encode_checkpoint(model.head_params().tensors());
  train(model, data, tiny_options(1, 0, 0));
  CHECK(encode_checkpoint(model.upstream_params().tensors()) == up0);
  CHECK(encode_checkpoint(model.head_params().tensors()) != head0);
  CHECK(model.aggregator().logit_values() != std::vector<double>(4, 0.0));

  SpeakerModel model2(tiny_model());
  const TrainResult r = train(model2, data, tiny_options(0, 1, 1));
  CHECK(encode_checkpoint(model2.upstream_params().tensors()) != up0);
  REQUIRE(r.log.size() == 2);
  CHECK(r.log[0].stage == "stage2");
  CHECK(r.log[1].stage == "lmft");
  CHECK(r.log[1].epoch == 2);
}

TEST_CASE("fbank front end logs a notice in stage 2") {
  const auto data = tone_data(2, 2, 3);
  SpeakerModel model(tiny_model(UpstreamMode::kFbank));
  CHECK_FALSE(model.has_aggregator());
  CHECK(model.upstream_params().size() == 0);
  std::ostringstream log;
  TrainOptions o = tiny_options(0, 1, 0);
  o.log = &log;
  train(model, data, o);
  CHECK(log.str().find("notice") != std::string::npos);
}

TEST_CASE("training loss decreases and runs are deterministic") {
  const auto data = tone_data(4, 4, 4);
  SpeakerModel a(tiny_model()), b(tiny_model());
  const TrainResult ra = train(a, data, tiny_options(6, 0, 0));
  const TrainResult rb = train(b, data, tiny_options(6, 0, 0));
  REQUIRE(ra.log.size() == 6);
  CHECK(ra.log.back().loss < ra.log.front().loss);
  CHECK(encode_checkpoint(a.tensors()) == encode_checkpoint(b.tensors()));
  CHECK(train_log_csv(ra.log) == train_log_csv(rb.log));
  CHECK(train_log_csv(ra.log).rfind("epoch,stage,loss,lr\n1,stage1,", 0) == 0);
}

TEST_CASE("single-speaker data is rejected") {
  const auto data = tone_data(1, 3, 5);
  SpeakerModel model(tiny_model());
  CHECK_THROWS_AS(train(model, data, tiny_options(1, 0, 0)), NumericError);
}

TEST_CASE("load restores every model tensor and ignores anchors") {
  SpeakerModel a(tiny_model());
  ModelConfig other = tiny_model();
  other.seed = 99;
  SpeakerModel b(other);
  NamedTensors t = a.tensors();
  t.push_back({kAnchorTensor, Matrix::Ones(2, 8)});
  b.load(t);
  CHECK(encode_checkpoint(b.tensors()) == encode_checkpoint(a.tensors()));
}

TEST_CASE("grad_check components") {
  for (const char* name : {"aggregator", "ecapa", "aam", "calibration", "upstream"}) {
    INFO(name);
    const GradCheckReport r = grad_check(name, 2, 1e-5);
    CHECK(r.component == name);
    CHECK_FALSE(r.entries.empty());
    CHECK(r.max_rel_error() < 1e-4);
  }
  CHECK_THROWS_AS(grad_check("fbank", 1, 1e-5), ConfigError);
  CHECK_THROWS_AS(grad_check("nope", 1, 1e-5), ConfigError);
}

}  // namespace
}  // namespace svtk

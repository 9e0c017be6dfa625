// svtk/tests/test_upstream.cc

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

#include "svtk/upstream.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "svtk/checkpoint.h"
#include "svtk/error.h"
#include "testing.h"

namespace svtk {
namespace {

Waveform random_wave(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = uniform(rng, -0.5, 0.5);
  return Waveform(x);
}

// Values representable in f32 so the SVHS round trip can be exact.
LayerStack random_stack(Rng& rng, int layers, Eigen::Index t, Eigen::Index d) {
  LayerStack s;
  for (int l = 0; l < layers; ++l) {
    ag::Matrix m = testing::random_matrix(rng, t, d);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    s.layers.push_back(m);
  }
  return s;
}

TEST_CASE("mock forward shapes and determinism") {
  Rng rng(1);
  MockUpstreamConfig cfg;
  CHECK(cfg.total_stride() == 320);
  CHECK(cfg.frame_rate_hz() == 50.0);
  const MockUpstream up(cfg);
  const Waveform w = random_wave(rng, 16000);
  const LayerStack s = up.run(w);
  CHECK(s.num_layers() == 13);
  CHECK(s.num_frames() == 50);
  CHECK(s.dim() == 64);
  CHECK(s.frame_rate_hz == 50.0);
  CHECK(up.run(w) == s);
  CHECK(MockUpstream(cfg).run(w) == s);

  MockUpstreamConfig other = cfg;
  other.seed = 1;
  CHECK_FALSE(MockUpstream(other).run(w) == s);
  CHECK_THROWS_AS(up.run(random_wave(rng, 319)), NumericError);
}

TEST_CASE("frame count depends only on length and strides") {
  Rng rng(2);
  const MockUpstream up(MockUpstreamConfig{});
  for (int i = 0; i < 10; ++i) {
    const std::size_t n = 320 + uniform_index(rng, 5000);
    const auto a = up.run(random_wave(rng, n));
    const auto b = up.run(Waveform(std::vector<double>(n, 0.0)));
    CHECK(a.num_frames() == static_cast<Eigen::Index>(n / 320));
    CHECK(b.num_frames() == a.num_frames());
  }
}

TEST_CASE("zero waveform gives the bias-only response in H_0") {
  MockUpstreamConfig cfg;
  const MockUpstream up(cfg);
  const LayerStack s = up.run(Waveform(std::vector<double>(3200, 0.0)));
  // Direct formula: a constant input c maps through a stride-k conv to
  // tanh(c * sum_j W_j + b).
  Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(1);
  for (std::size_t i = 0; i < cfg.conv_strides.size(); ++i) {
    const std::string base = "upstream.conv" + std::to_string(i);
    const auto& w = up.params().get(base + ".weight").value();
    const auto& b = up.params().get(base + ".bias").value();
    const auto cin = a.size();
    ag::Matrix wsum = ag::Matrix::Zero(cin, w.cols());
    for (int j = 0; j < cfg.conv_strides[i]; ++j) wsum += w.middleRows(j * cin, cin);
    a = (a * wsum + b).array().tanh();
  }
  for (Eigen::Index t = 0; t < s.num_frames(); ++t)
    CHECK((s.layers[0].row(t) - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("plant_speaker_info") {
  Rng rng(3);
  const LayerStack s = random_stack(rng, 4, 6, 5);
  CHECK(plant_speaker_info(s, "alice", 2, 0.0) == s);
  CHECK_THROWS_AS(plant_speaker_info(s, "alice", 3 + 3, 1.0), ConfigError);
  CHECK_THROWS_AS(plant_speaker_info(s, "alice", -1, 1.0), ConfigError);

  const Eigen::RowVectorXd v = speaker_direction("alice", 5);
  CHECK(v.norm() == doctest::Approx(1.0));
  CHECK(speaker_direction("alice", 5) == v);
  CHECK_FALSE(speaker_direction("bob", 5) == v);

  const LayerStack p = plant_speaker_info(s, "alice", 2, 1.5);
  for (int l = 0; l < 4; ++l) {
    if (l == 2) continue;
    CHECK(p.layers[static_cast<std::size_t>(l)] == s.layers[static_cast<std::size_t>(l)]);
  }
  for (Eigen::Index t = 0; t < 6; ++t)
    CHECK(((p.layers[2].row(t) - s.layers[2].row(t)) - 1.5 * v).cwiseAbs().maxCoeff() < 1e-12);

  const LayerStack s2 = random_stack(rng, 4, 6, 5);
  const LayerStack p2 = plant_speaker_info(s2, "alice", 2, 1.5);
  CHECK(((p2.layers[2] - s2.layers[2]) - (p.layers[2] - s.layers[2])).cwiseAbs().maxCoeff() < 1e-12);

  const auto ab = plant_speaker_info(plant_speaker_info(s, "alice", 1, 0.7), "alice", 3, 2.0);
  const auto ba = plant_speaker_info(plant_speaker_info(s, "alice", 3, 2.0), "alice", 1, 0.7);
  CHECK(ab == ba);

  std::vector<ag::Var> vars;
  for (const auto& l : s.layers) vars.push_back(ag::Var::constant(l));
  plant_speaker_info(vars, "alice", 2, 1.5);
  CHECK(vars[2].value() == p.layers[2]);
}

TEST_CASE("SVHS round trip is exact, including subnormals") {
  Rng rng(4);
  LayerStack s = random_stack(rng, 3, 7, 4);
  s.frame_rate_hz = 50.0;
  s.layers[1](0, 0) = static_cast<double>(std::numeric_limits<float>::denorm_min());
  s.layers[1](0, 1) = static_cast<double>(std::numeric_limits<float>::min() / 8);
  s.layers[2](3, 2) = -0.0;
  const LayerStack back = decode_stack(encode_stack(s));
  CHECK(back == s);
  CHECK(back.layers[1](0, 0) > 0.0);
  CHECK(std::signbit(back.layers[2](3, 2)));

  const auto dir = testing::temp_dir("svhs");
  save_stack(s, dir / "a.svhs");
  CHECK(load_stack(dir / "a.svhs") == s);
}

TEST_CASE("SVHS rejects bad input") {
  Rng rng(5);
  const std::string good = encode_stack(random_stack(rng, 2, 3, 2));
  std::string bad = good;
  bad.replace(0, 4, "XXXX");
  CHECK_THROWS_WITH_AS(decode_stack(bad), "bad magic", FormatError);
  CHECK_THROWS_WITH_AS(decode_stack(good.substr(0, good.size() - 4)), "truncated", FormatError);
  // Header claiming 2^32-1 frames of 2^32-1 dims overflows any payload.
  std::string huge = good;
  for (int i = 12; i < 20; ++i) huge[static_cast<std::size_t>(i)] = '\xff';
  CHECK_THROWS_WITH_AS(decode_stack(huge), "dimension overflow", FormatError);
  CHECK_THROWS_AS(decode_stack(good + "x"), FormatError);
  CHECK_THROWS_AS(decode_stack("SV"), FormatError);
}

TEST_CASE("LayerStack validation") {
  LayerStack one;
  one.layers.push_back(ag::Matrix::Zero(2, 2));
  CHECK_THROWS_AS(one.validate(), NumericError);
  LayerStack ragged = one;
  ragged.layers.push_back(ag::Matrix::Zero(3, 2));
  CHECK_THROWS_AS(ragged.validate(), NumericError);
  LayerStack nan = one;
  nan.layers.push_back(ag::Matrix::Constant(2, 2, NAN));
  CHECK_THROWS_AS(nan.validate(), NumericError);
}

TEST_CASE("crop_stack wraps short stacks") {
  Rng rng(6);
  const LayerStack s = random_stack(rng, 2, 3, 2);
  const LayerStack c = crop_stack(s, 7, rng);
  CHECK(c.num_frames() == 7);
  for (Eigen::Index t = 0; t < 7; ++t) CHECK(c.layers[1].row(t) == s.layers[1].row(t % 3));
  CHECK(crop_stack(s, 3, rng) == s);
  const LayerStack longer = random_stack(rng, 2, 20, 2);
  Rng a(9), b(9);
  CHECK(crop_stack(longer, 5, a) == crop_stack(longer, 5, b));
}

TEST_CASE("manifest IO") {
  const auto dir = testing::temp_dir("manifest");
  std::ofstream(dir / "m.tsv") << "u1\tspkA\twav/u1.wav\nu2\tspkB\t/abs/u2.wav\n\n";
  const Manifest m = read_manifest(dir / "m.tsv");
  REQUIRE(m.rows.size() == 2);
  CHECK(m.rows[0].path == dir / "wav/u1.wav");
  CHECK(m.rows[1].path == "/abs/u2.wav");
  CHECK(m.speakers() == std::vector<std::string>{"spkA", "spkB"});
  CHECK(m.find("u2")->speaker_id == "spkB");
  CHECK(m.find("nope") == nullptr);

  std::ofstream(dir / "dup.tsv") << "u1\ta\tx.wav\nu1\tb\ty.wav\n";
  CHECK_THROWS_AS(read_manifest(dir / "dup.tsv"), FormatError);
  std::ofstream(dir / "cols.tsv") << "u1 a x.wav\n";
  CHECK_THROWS_AS(read_manifest(dir / "cols.tsv"), FormatError);
  CHECK_THROWS_AS(read_manifest(dir / "missing.tsv"), FormatError);
}

}  // namespace
}  // namespace svtk

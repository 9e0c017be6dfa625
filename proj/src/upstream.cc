// svtk/src/upstream.cc

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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "svtk/bytes.h"
#include "svtk/checkpoint.h"
#include "svtk/error.h"

namespace svtk {

namespace {

ag::Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace

void LayerStack::validate() const {
  if (layers.size() < 2) throw NumericError("layer stack needs at least 2 layers (L >= 1)");
  const Eigen::Index t = layers[0].rows(), d = layers[0].cols();
  if (t < 1 || d < 1) throw NumericError("layer stack has empty layers");
  for (const auto& l : layers) {
    if (l.rows() != t || l.cols() != d)
      throw NumericError("layer stack layers disagree in shape");
    if (!l.allFinite()) throw NumericError("layer stack has non-finite entries");
  }
}

bool LayerStack::operator==(const LayerStack& o) const {
  if (frame_rate_hz != o.frame_rate_hz || layers.size() != o.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (layers[l].rows() != o.layers[l].rows() || layers[l].cols() != o.layers[l].cols() ||
        layers[l] != o.layers[l])
      return false;
  return true;
}

int MockUpstreamConfig::total_stride() const {
  int p = 1;
  for (int s : conv_strides) p *= s;
  return p;
}

void MockUpstreamConfig::validate() const {
  if (n_layers < 1) throw ConfigError("upstream.n_layers must be >= 1");
  if (dim < 1) throw ConfigError("upstream.dim must be >= 1");
  if (conv_strides.empty()) throw ConfigError("upstream.conv_strides must not be empty");
  for (int s : conv_strides)
    if (s < 1) throw ConfigError("upstream.conv_strides entries must be positive");
  if (conv_channels < 1) throw ConfigError("upstream.conv_channels must be >= 1");
  if (smoothing < 1 || smoothing % 2 == 0)
    throw ConfigError("upstream.smoothing must be a positive odd width");
}

MockUpstream::MockUpstream(const MockUpstreamConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(cfg_.seed, "mock-upstream"));
  Eigen::Index cin = 1;
  for (std::size_t i = 0; i < cfg_.conv_strides.size(); ++i) {
    const int k = cfg_.conv_strides[i];
    const Eigen::Index cout =
        i + 1 == cfg_.conv_strides.size() ? cfg_.dim : cfg_.conv_channels;
    const std::string base = "upstream.conv" + std::to_string(i);
    params_.add(base + ".weight",
                gaussian(rng, k * cin, cout, 1.0 / std::sqrt(static_cast<double>(k * cin))));
    params_.add(base + ".bias", gaussian(rng, 1, cout, 0.1));
    cin = cout;
  }
  for (int l = 1; l <= cfg_.n_layers; ++l) {
    const std::string base = "upstream.layer" + std::to_string(l);
    params_.add(base + ".weight",
                gaussian(rng, cfg_.dim, cfg_.dim, 1.0 / std::sqrt(static_cast<double>(cfg_.dim))));
    params_.add(base + ".bias", gaussian(rng, 1, cfg_.dim, 0.05));
  }
}

std::vector<ag::Var> MockUpstream::forward(const Waveform& wav) const {
  const auto n = static_cast<Eigen::Index>(wav.size());
  if (n < cfg_.total_stride())
    throw NumericError("waveform too short for the conv front end (" + std::to_string(n) +
                       " < " + std::to_string(cfg_.total_stride()) + " samples)");
  ag::Matrix samples(n, 1);
  const auto s = wav.samples();
  for (Eigen::Index i = 0; i < n; ++i) samples(i, 0) = s[static_cast<std::size_t>(i)];
  ag::Var x = ag::Var::constant(std::move(samples));

  const auto& items = params_.items();
  std::size_t p = 0;
  for (int k : cfg_.conv_strides) {
    x = ag::tanh(ag::conv1d_strided(x, items[p].var, items[p + 1].var, k, k));
    p += 2;
  }
  std::vector<ag::Var> layers;
  layers.reserve(static_cast<std::size_t>(cfg_.n_layers + 1));
  layers.push_back(x);
  for (int l = 1; l <= cfg_.n_layers; ++l) {
    x = ag::moving_average(ag::tanh(ag::linear(x, items[p].var, items[p + 1].var)),
                           cfg_.smoothing);
    p += 2;
    layers.push_back(x);
  }
  return layers;
}

LayerStack MockUpstream::run(const Waveform& wav) const {
  ag::NoGradGuard guard;
  LayerStack out;
  out.frame_rate_hz = cfg_.frame_rate_hz();
  for (auto& v : forward(wav)) out.layers.push_back(v.value());
  return out;
}

Eigen::RowVectorXd speaker_direction(const std::string& speaker_id, Eigen::Index dim) {
  Rng rng(splitmix64(fnv1a(speaker_id) ^ 0x5bd1e995ULL));
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::RowVectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = dist(rng);
  return v / v.norm();
}

LayerStack plant_speaker_info(const LayerStack& stack, const std::string& speaker_id,
                              int layer_k, double strength) {
  if (layer_k < 0 || static_cast<std::size_t>(layer_k) >= stack.num_layers())
    throw ConfigError("plant layer " + std::to_string(layer_k) + " out of range [0, " +
                      std::to_string(stack.num_layers() - 1) + "]");
  if (!(strength >= 0.0)) throw ConfigError("plant strength must be >= 0");
  LayerStack out = stack;
  if (strength == 0.0) return out;
  const Eigen::RowVectorXd offset = strength * speaker_direction(speaker_id, stack.dim());
  out.layers[static_cast<std::size_t>(layer_k)].rowwise() += offset;
  return out;
}

void plant_speaker_info(std::vector<ag::Var>& layers, const std::string& speaker_id,
                        int layer_k, double strength) {
  if (layer_k < 0 || static_cast<std::size_t>(layer_k) >= layers.size())
    throw ConfigError("plant layer " + std::to_string(layer_k) + " out of range [0, " +
                      std::to_string(layers.size() - 1) + "]");
  if (!(strength >= 0.0)) throw ConfigError("plant strength must be >= 0");
  if (strength == 0.0) return;
  auto& target = layers[static_cast<std::size_t>(layer_k)];
  ag::Matrix offset = strength * speaker_direction(speaker_id, target.cols());
  target = ag::add_row(target, ag::Var::constant(std::move(offset)));
}

std::string encode_stack(const LayerStack& stack) {
  stack.validate();
  ByteWriter w;
  w.raw("SVHS");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(stack.num_layers()));
  w.u32(static_cast<std::uint32_t>(stack.num_frames()));
  w.u32(static_cast<std::uint32_t>(stack.dim()));
  w.f32(static_cast<float>(stack.frame_rate_hz));
  for (const auto& l : stack.layers)
    for (Eigen::Index t = 0; t < l.rows(); ++t)
      for (Eigen::Index d = 0; d < l.cols(); ++d) w.f32(static_cast<float>(l(t, d)));
  return w.take();
}

LayerStack decode_stack(const std::string& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "SVHS") throw FormatError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("unsupported SVHS version " + std::to_string(version));
  const std::uint64_t nl = r.u32(), t = r.u32(), d = r.u32();
  const float rate = r.f32();
  // Each factor is < 2^32, so check the product in two steps to avoid overflow.
  const std::uint64_t per_layer = t * d;
  if (nl != 0 && per_layer > std::numeric_limits<std::uint64_t>::max() / 4 / nl)
    throw FormatError("dimension overflow");
  if (nl * per_layer > r.remaining() / 4) throw FormatError("truncated");
  if (nl * per_layer * 4 != r.remaining()) throw FormatError("trailing bytes after payload");
  LayerStack out;
  out.frame_rate_hz = rate;
  out.layers.resize(nl);
  for (auto& l : out.layers) {
    l.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < l.rows(); ++i)
      for (Eigen::Index j = 0; j < l.cols(); ++j) l(i, j) = r.f32();
  }
  out.validate();
  return out;
}

void save_stack(const LayerStack& stack, const std::filesystem::path& path) {
  write_file(path, encode_stack(stack));
}

LayerStack load_stack(const std::filesystem::path& path) {
  try {
    return decode_stack(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

LayerStack crop_stack(const LayerStack& stack, Eigen::Index frames, Rng& rng) {
  if (frames < 1) throw ConfigError("crop length must be positive");
  const Eigen::Index t = stack.num_frames();
  if (t < 1) throw NumericError("empty layer stack");
  Eigen::Index offset = 0;
  if (t > frames)
    offset = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(t - frames + 1)));
  LayerStack out;
  out.frame_rate_hz = stack.frame_rate_hz;
  for (const auto& l : stack.layers) {
    ag::Matrix c(frames, l.cols());
    for (Eigen::Index i = 0; i < frames; ++i) c.row(i) = l.row((offset + i) % t);
    out.layers.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> Manifest::speakers() const {
  std::set<std::string> s;
  for (const auto& r : rows) s.insert(r.speaker_id);
  return {s.begin(), s.end()};
}

const ManifestRow* Manifest::find(const std::string& utt_id) const {
  for (const auto& r : rows)
    if (r.utt_id == utt_id) return &r;
  return nullptr;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open manifest");
  const auto base = path.parent_path();
  Manifest m;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected utt_id<TAB>speaker_id<TAB>path");
    if (!seen.insert(fields[0]).second)
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": duplicate utt_id " + fields[0]);
    std::filesystem::path p = fields[2];
    if (p.is_relative()) p = base / p;
    m.rows.push_back({fields[0], fields[1], p});
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ostringstream out;
  for (const auto& r : m.rows)
    out << r.utt_id << '\t' << r.speaker_id << '\t' << r.path.generic_string() << '\n';
  write_file(path, out.str());
}

}  // namespace svtk

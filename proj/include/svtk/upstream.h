// svtk/upstream.h

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

// Layer stacks H_0..H_L of a pre-trained speech encoder, either produced by a
// seeded mock (strided conv front end followed by L fixed random mixing
// layers) or imported from files exported by a real model.

#ifndef SVTK_UPSTREAM_H_
#define SVTK_UPSTREAM_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svtk/autograd.h"
#include "svtk/params.h"
#include "svtk/signal.h"

namespace svtk {

/// (L+1) layers of T x D hidden states; index 0 is the transformer input.
struct LayerStack {
  std::vector<ag::Matrix> layers;
  double frame_rate_hz = 50.0;

  std::size_t num_layers() const { return layers.size(); }  // L + 1
  Eigen::Index num_frames() const { return layers.empty() ? 0 : layers[0].rows(); }
  Eigen::Index dim() const { return layers.empty() ? 0 : layers[0].cols(); }

  /// Throws NumericError unless L >= 1, shapes agree and entries are finite.
  void validate() const;
  bool operator==(const LayerStack& o) const;
};

struct MockUpstreamConfig {
  int n_layers = 12;
  int dim = 64;
  std::uint64_t seed = 0;
  std::vector<int> conv_strides = {5, 4, 4, 4};
  int conv_channels = 32;
  int smoothing = 3;  // moving-average width applied after each mixing layer

  int total_stride() const;
  double frame_rate_hz() const { return static_cast<double>(kSampleRate) / total_stride(); }
  void validate() const;
};

/// Seeded stand-in for a conv + transformer encoder. Conv kernels equal their
/// strides, so T = floor(N / prod(strides)) regardless of sample values.
class MockUpstream {
 public:
  explicit MockUpstream(const MockUpstreamConfig& cfg);

  const MockUpstreamConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Differentiable forward: one Var per layer, T x D each.
  std::vector<ag::Var> forward(const Waveform& wav) const;
  /// Value-only forward.
  LayerStack run(const Waveform& wav) const;

 private:
  MockUpstreamConfig cfg_;
  ParamSet params_;
};

/// Fixed unit vector for a speaker id, derived from a hash of the id.
Eigen::RowVectorXd speaker_direction(const std::string& speaker_id, Eigen::Index dim);

/// Adds strength * speaker_direction(id) to every frame of layer k.
LayerStack plant_speaker_info(const LayerStack& stack, const std::string& speaker_id,
                              int layer_k, double strength);
/// Differentiable counterpart used during training.
void plant_speaker_info(std::vector<ag::Var>& layers, const std::string& speaker_id,
                        int layer_k, double strength);

/// SVHS: "SVHS", u32 version=1, u32 L+1, u32 T, u32 D, f32 frame rate, then
/// (L+1)*T*D f32 values, layer-major, frame-major, channel-minor. All LE.
std::string encode_stack(const LayerStack& stack);
LayerStack decode_stack(const std::string& bytes);
void save_stack(const LayerStack& stack, const std::filesystem::path& path);
LayerStack load_stack(const std::filesystem::path& path);

/// Keeps `frames` consecutive frames starting at a random offset; shorter
/// stacks are tiled.
LayerStack crop_stack(const LayerStack& stack, Eigen::Index frames, Rng& rng);

struct ManifestRow {
  std::string utt_id;
  std::string speaker_id;
  std::filesystem::path path;
};

struct Manifest {
  std::vector<ManifestRow> rows;

  std::vector<std::string> speakers() const;  // sorted, unique
  const ManifestRow* find(const std::string& utt_id) const;
};

/// Tab-separated utt_id, speaker_id, path. Relative paths are resolved
/// against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

}  // namespace svtk

#endif  // SVTK_UPSTREAM_H_

// svtk/training.h

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

// AAM-softmax objective, the speaker model that chains a front end (Fbank,
// mock upstream or imported layer stacks) through the aggregator into ECAPA,
// and the staged training loop.

#ifndef SVTK_TRAINING_H_
#define SVTK_TRAINING_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "svtk/aggregator.h"
#include "svtk/autograd.h"
#include "svtk/checkpoint.h"
#include "svtk/ecapa.h"
#include "svtk/params.h"
#include "svtk/signal.h"
#include "svtk/upstream.h"

namespace svtk {

struct AamConfig {
  double margin = 0.2;
  double scale = 30.0;
  int n_classes = 0;

  void validate() const;
};

inline constexpr double kAamCosineClamp = 1e-7;

/// Mean additive-angular-margin cross-entropy. embeddings is B x E, anchors
/// is n_classes x E; both are unit-normalized inside. Throws ConfigError on an
/// out-of-range label and NumericError on a zero-norm row.
ag::Var aam_loss(const ag::Var& embeddings, std::span<const int> labels,
                 const ag::Var& anchors, const AamConfig& cfg);

/// Contiguous crop of round(seconds * 16000) samples at a uniform offset.
/// Shorter input is tiled; an exact fit is returned unchanged.
Waveform crop_random(const Waveform& wav, double seconds, Rng& rng);

struct TrainSchedule {
  int stage1_epochs = 10;
  int stage2_epochs = 5;
  int lmft_epochs = 2;
  double crop_seconds = 3.0;
  double lmft_crop_seconds = 6.0;
  double lmft_margin = 0.5;
  int batch_size = 8;
  double lr_stage1 = 1e-3;
  double lr_stage2 = 1e-4;
  double lr_lmft = 1e-4;

  void validate() const;
};

enum class UpstreamMode { kFbank, kMock, kImport };

const char* to_string(UpstreamMode m);
UpstreamMode parse_upstream_mode(const std::string& s);

struct ModelConfig {
  UpstreamMode mode = UpstreamMode::kMock;
  FbankConfig fbank;
  MockUpstreamConfig upstream;
  EcapaConfig ecapa;  // in_dim is derived from the front end
  int import_layers = 0;  // L+1, import mode only
  int import_dim = 0;     // D, import mode only
  int plant_layer = -1;   // < 0 disables planting
  double plant_strength = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Waveform for the Fbank and mock front ends, pre-computed stack for import.
using ModelInput = std::variant<Waveform, LayerStack>;

class SpeakerModel {
 public:
  explicit SpeakerModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  bool has_aggregator() const { return aggregator_ != nullptr; }
  bool has_trainable_upstream() const { return upstream_ != nullptr; }

  Ecapa& ecapa() { return *ecapa_; }
  const Ecapa& ecapa() const { return *ecapa_; }
  Aggregator& aggregator();
  const Aggregator& aggregator() const;
  MockUpstream& upstream();
  const MockUpstream& upstream() const;

  /// Frame-level features fed to ECAPA. The upstream only records gradients
  /// when train_upstream is set.
  ag::Var features(const ModelInput& input, const std::string& speaker_id,
                   bool train_upstream) const;
  ag::Var forward(const ModelInput& input, const std::string& speaker_id,
                  bool train_upstream) const;
  /// Gradient-free embedding of a whole utterance.
  Eigen::RowVectorXd embed(const ModelInput& input, const std::string& speaker_id) const;

  /// Parameters trained in stage 1 (aggregator + ECAPA).
  ParamSet head_params() const;
  /// Mock upstream parameters, empty for other front ends.
  ParamSet upstream_params() const;
  ParamSet all_params() const;

  NamedTensors tensors() const { return all_params().tensors(); }
  /// Loads every model tensor by name; extra tensors (anchors) are ignored.
  void load(const NamedTensors& tensors);

 private:
  ModelConfig cfg_;
  std::unique_ptr<MockUpstream> upstream_;
  std::unique_ptr<Aggregator> aggregator_;
  std::unique_ptr<Ecapa> ecapa_;
};

/// Learnable class anchors for the AAM objective, stored as "aam.anchors".
class ClassAnchors {
 public:
  ClassAnchors(int n_classes, int embed_dim, std::uint64_t seed);

  ag::Var anchors() const { return anchors_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  ParamSet params_;
  ag::Var anchors_;
};

inline constexpr const char* kAnchorTensor = "aam.anchors";

/// Adam with per-tensor moment buffers.
class Adam {
 public:
  explicit Adam(ParamSet params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();
  void zero_grad() { params_.zero_grad(); }
  double lr() const { return lr_; }

 private:
  ParamSet params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ag::Matrix> m_, v_;
};

struct TrainItem {
  std::string utt_id;
  std::string speaker_id;
  ModelInput input;
};

/// Loads waveforms (or SVHS stacks in import mode) for every manifest row.
std::vector<TrainItem> load_training_set(const Manifest& manifest, UpstreamMode mode);

struct TrainOptions {
  TrainSchedule schedule;
  AamConfig aam;  // n_classes is filled in from the data
  bool augment = false;
  AugmentConfig augment_cfg;
  AugmentBanks banks;
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;  // notices and per-epoch lines
};

struct TrainLogRow {
  int epoch;
  std::string stage;
  double loss;
  double lr;
};

struct TrainResult {
  std::vector<std::string> speakers;  // class index -> speaker id
  std::shared_ptr<ClassAnchors> anchors;
  std::vector<TrainLogRow> log;
};

/// Runs stage 1 (front end frozen), stage 2 (mock upstream unfrozen) and
/// large-margin fine-tuning. Throws NumericError on fewer than 2 speakers.
TrainResult train(SpeakerModel& model, std::span<const TrainItem> data,
                  const TrainOptions& opts);

/// "epoch,stage,loss,lr".
std::string train_log_csv(std::span<const TrainLogRow> rows);

/// Absolute floor of the relative-error denominator. At s = 30 the central
/// difference of the AAM loss carries ~3e-10 of round-off, so gradients below
/// this are compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-5;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  int samples = 0;
  int skipped = 0;  // probes that straddled a non-differentiable point
};

struct GradCheckReport {
  std::string component;
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
};

/// Central-difference check of every parameter group of a component on small
/// random inputs: "aggregator", "ecapa", "aam", "calibration" or "upstream".
/// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
GradCheckReport grad_check(const std::string& component, int trials, double epsilon,
                           std::uint64_t seed = 7);

}  // namespace svtk

#endif  // SVTK_TRAINING_H_

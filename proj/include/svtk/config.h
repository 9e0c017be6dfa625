// svtk/config.h

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

// Run configuration: flat "section.key = value" text, '#' comments. Unknown
// keys are rejected and every section is validated by its owning module.

#ifndef SVTK_CONFIG_H_
#define SVTK_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svtk/ecapa.h"
#include "svtk/signal.h"
#include "svtk/synthcorpus.h"
#include "svtk/training.h"
#include "svtk/upstream.h"

namespace svtk {

struct PathsConfig {
  std::string manifest;
  std::string checkpoint;
  std::string noise_dir;
  std::string rir_dir;
};

struct RunConfig {
  FbankConfig fbank;
  UpstreamMode mode = UpstreamMode::kMock;
  MockUpstreamConfig upstream;
  int import_layers = 0;
  int import_dim = 0;
  int plant_layer = -1;
  double plant_strength = 0.0;
  EcapaConfig ecapa;
  AamConfig aam;
  TrainSchedule train;
  bool augment_enabled = false;
  AugmentConfig augment;
  std::size_t cohort_top_k = 600;
  std::size_t calibration_trials = 30000;
  SynthSpec synth;
  PathsConfig paths;
  std::uint64_t seed = 0;
  int jobs = 1;

  /// Assigns one "section.key" from its text form. Throws ConfigError on an
  /// unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Every key, one per line, in a form parse_config reads back exactly.
  std::string dump() const;
  void validate() const;

  ModelConfig model_config() const;
  TrainOptions train_options() const;
};

RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Applies "key=value" overrides in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace svtk

#endif  // SVTK_CONFIG_H_

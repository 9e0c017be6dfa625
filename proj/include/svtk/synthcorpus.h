// svtk/synthcorpus.h

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

// Deterministic synthetic speakers: a pulse train at a fixed pitch through a
// fixed bank of formant resonators, with small per-utterance jitter.

#ifndef SVTK_SYNTHCORPUS_H_
#define SVTK_SYNTHCORPUS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svtk/random.h"
#include "svtk/scoring.h"
#include "svtk/signal.h"
#include "svtk/upstream.h"

namespace svtk {

struct SynthSpec {
  int n_speakers = 20;
  int utts_per_speaker = 10;
  double utt_seconds = 3.0;
  std::uint64_t seed = 0;
  int n_formants = 4;
  double formant_jitter = 0.02;
  int heldout_per_speaker = 4;
  double noise_floor = 0.01;  // noise RMS relative to the voiced signal RMS

  void validate() const;
};

struct SpeakerProfile {
  int index = 0;
  std::string id;
  std::vector<double> formants_hz;    // ascending, 300..3500
  std::vector<double> bandwidths_hz;  // 50..200
  double pitch_hz = 0.0;              // 80..300

  bool operator==(const SpeakerProfile&) const = default;
};

inline constexpr double kSynthPeak = 0.5;

/// "spk007" style id.
std::string synth_speaker_id(int index);
std::string synth_utterance_id(int speaker_index, int utt_index);

SpeakerProfile synth_speaker(const SynthSpec& spec, int speaker_index);

/// Voiced excitation through the speaker's resonators. Formants and pitch are
/// perturbed by up to +-jitter (relative); the pulse phase and noise floor
/// come from rng. Peak-normalized to 0.5.
Waveform synth_utterance(const SpeakerProfile& profile, int utt_index, double seconds,
                         double jitter, Rng& rng, double noise_floor = 0.01);

struct SynthCorpus {
  Manifest all;
  Manifest train;
  Manifest heldout;
  TrialList trials;
};

/// Writes wav/*.wav, manifest.tsv, train.tsv, heldout.tsv and trials.txt.
/// The last heldout_per_speaker utterances of each speaker are held out; the
/// trial list holds every held-out target pair and as many distinct nontarget
/// pairs.
SynthCorpus synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace svtk

#endif  // SVTK_SYNTHCORPUS_H_

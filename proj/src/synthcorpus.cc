// svtk/src/synthcorpus.cc

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

#include "svtk/synthcorpus.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <set>

#include "svtk/checkpoint.h"
#include "svtk/error.h"

namespace svtk {

void SynthSpec::validate() const {
  if (n_speakers < 2) throw ConfigError("synth.n_speakers must be >= 2");
  if (utts_per_speaker < 2) throw ConfigError("synth.utts_per_speaker must be >= 2");
  if (!(utt_seconds >= 1.0)) throw ConfigError("synth.utt_seconds must be >= 1");
  if (n_formants < 1) throw ConfigError("synth.n_formants must be >= 1");
  if (!(formant_jitter >= 0.0 && formant_jitter < 0.5))
    throw ConfigError("synth.formant_jitter must be in [0, 0.5)");
  if (heldout_per_speaker < 2 || heldout_per_speaker >= utts_per_speaker)
    throw ConfigError("synth.heldout_per_speaker must be in [2, utts_per_speaker)");
  if (!(noise_floor >= 0.0)) throw ConfigError("synth.noise_floor must be >= 0");
}

std::string synth_speaker_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", index);
  return buf;
}

std::string synth_utterance_id(int speaker_index, int utt_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%03d_u%03d", speaker_index, utt_index);
  return buf;
}

SpeakerProfile synth_speaker(const SynthSpec& spec, int speaker_index) {
  if (speaker_index < 0 || speaker_index >= spec.n_speakers)
    throw ConfigError("speaker index " + std::to_string(speaker_index) + " out of range [0, " +
                      std::to_string(spec.n_speakers) + ")");
  Rng rng(derive_seed(spec.seed, "synth-speaker/" + std::to_string(speaker_index)));
  SpeakerProfile p;
  p.index = speaker_index;
  p.id = synth_speaker_id(speaker_index);
  for (int i = 0; i < spec.n_formants; ++i) p.formants_hz.push_back(uniform(rng, 300.0, 3500.0));
  std::sort(p.formants_hz.begin(), p.formants_hz.end());
  for (int i = 0; i < spec.n_formants; ++i) p.bandwidths_hz.push_back(uniform(rng, 50.0, 200.0));
  p.pitch_hz = uniform(rng, 80.0, 300.0);
  return p;
}

Waveform synth_utterance(const SpeakerProfile& profile, int utt_index, double seconds,
                         double jitter, Rng& rng, double noise_floor) {
  (void)utt_index;  // variation comes from rng, which callers seed per utterance
  const auto n = static_cast<std::size_t>(std::llround(seconds * kSampleRate));
  const double fs = kSampleRate;
  auto perturb = [&](double v) { return v * (1.0 + jitter * uniform(rng, -1.0, 1.0)); };

  const double pitch = perturb(profile.pitch_hz);
  const double period = fs / pitch;
  double phase = uniform(rng, 0.0, period);
  std::vector<double> excitation(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    phase += 1.0;
    if (phase >= period) {
      phase -= period;
      excitation[i] = 1.0;
    }
  }

  std::vector<double> voiced(n, 0.0);
  for (std::size_t k = 0; k < profile.formants_hz.size(); ++k) {
    const double f = std::clamp(perturb(profile.formants_hz[k]), 50.0, fs / 2 - 50.0);
    const double r = std::exp(-std::numbers::pi * profile.bandwidths_hz[k] / fs);
    const double theta = 2.0 * std::numbers::pi * f / fs;
    const double a1 = 2.0 * r * std::cos(theta), a2 = -r * r;
    // Unit gain at the resonance peak.
    const double gain = (1.0 - r) * std::abs(std::complex<double>(1.0, 0.0) -
                                             r * std::polar(1.0, -2.0 * theta));
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = gain * excitation[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      voiced[i] += y;
    }
  }

  double energy = 0.0;
  for (double v : voiced) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(n));
  std::normal_distribution<double> normal(0.0, noise_floor * rms);
  double peak = 0.0;
  for (auto& v : voiced) {
    if (noise_floor > 0.0) v += normal(rng);
    peak = std::max(peak, std::abs(v));
  }
  if (!(peak > 0.0)) throw NumericError("synthesized utterance is silent");
  for (auto& v : voiced) v *= kSynthPeak / peak;
  return Waveform(std::move(voiced));
}

SynthCorpus synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) throw FormatError(out_dir.string() + ": cannot create directory: " + ec.message());

  SynthCorpus corpus;
  Manifest rel_all, rel_train, rel_heldout;
  std::vector<std::vector<std::string>> heldout_by_spk(static_cast<std::size_t>(spec.n_speakers));
  for (int s = 0; s < spec.n_speakers; ++s) {
    const SpeakerProfile prof = synth_speaker(spec, s);
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      const std::string id = synth_utterance_id(s, u);
      Rng rng(derive_seed(spec.seed, "synth-utt/" + id));
      const Waveform wav =
          synth_utterance(prof, u, spec.utt_seconds, spec.formant_jitter, rng, spec.noise_floor);
      const std::filesystem::path rel = std::filesystem::path("wav") / (id + ".wav");
      write_wav(out_dir / rel, wav);
      const ManifestRow row{id, prof.id, rel};
      rel_all.rows.push_back(row);
      corpus.all.rows.push_back({id, prof.id, out_dir / rel});
      if (u >= spec.utts_per_speaker - spec.heldout_per_speaker) {
        rel_heldout.rows.push_back(row);
        corpus.heldout.rows.push_back({id, prof.id, out_dir / rel});
        heldout_by_spk[static_cast<std::size_t>(s)].push_back(id);
      } else {
        rel_train.rows.push_back(row);
        corpus.train.rows.push_back({id, prof.id, out_dir / rel});
      }
    }
  }

  TrialList targets;
  for (const auto& utts : heldout_by_spk)
    for (std::size_t i = 0; i < utts.size(); ++i)
      for (std::size_t j = i + 1; j < utts.size(); ++j) targets.push_back({1, utts[i], utts[j]});

  // Distinct cross-speaker pairs, drawn until balanced.
  Rng rng(derive_seed(spec.seed, "synth-trials"));
  const auto& held = corpus.heldout.rows;
  std::set<std::pair<std::size_t, std::size_t>> used;
  TrialList nontargets;
  const std::size_t per = static_cast<std::size_t>(spec.heldout_per_speaker);
  const std::size_t max_non = held.size() * (held.size() - per) / 2;
  const std::size_t want = std::min(targets.size(), max_non);
  while (nontargets.size() < want) {
    std::size_t a = uniform_index(rng, held.size());
    std::size_t b = uniform_index(rng, held.size());
    if (held[a].speaker_id == held[b].speaker_id) continue;
    if (a > b) std::swap(a, b);
    if (!used.insert({a, b}).second) continue;
    nontargets.push_back({0, held[a].utt_id, held[b].utt_id});
  }
  corpus.trials = targets;
  corpus.trials.insert(corpus.trials.end(), nontargets.begin(), nontargets.end());
  std::shuffle(corpus.trials.begin(), corpus.trials.end(), rng);

  write_manifest(out_dir / "manifest.tsv", rel_all);
  write_manifest(out_dir / "train.tsv", rel_train);
  write_manifest(out_dir / "heldout.tsv", rel_heldout);
  write_trials(out_dir / "trials.txt", corpus.trials);
  return corpus;
}

}  // namespace svtk

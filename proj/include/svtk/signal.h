// svtk/signal.h

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

#ifndef SVTK_SIGNAL_H_
#define SVTK_SIGNAL_H_

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "svtk/autograd.h"
#include "svtk/random.h"

namespace svtk {

inline constexpr int kSampleRate = 16000;

/// Mono 16 kHz audio with samples in [-1, 1].
class Waveform {
 public:
  /// Throws NumericError on empty or non-finite input and FormatError on a
  /// rate other than 16 kHz.
  explicit Waveform(std::vector<double> samples, int sample_rate = kSampleRate);

  std::span<const double> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  int sample_rate() const { return sample_rate_; }
  double seconds() const {
    return static_cast<double>(samples_.size()) / sample_rate_;
  }
  double rms() const;

  bool operator==(const Waveform&) const = default;

 private:
  std::vector<double> samples_;
  int sample_rate_;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM, mono, 16 kHz. Anything else
/// is rejected; nothing is resampled or downmixed.
Waveform read_wav(const std::filesystem::path& path);

/// Number of samples in a WAV file, from its header only.
std::size_t wav_num_samples(const std::filesystem::path& path);

/// Writes 16-bit PCM; samples are clipped to [-1, 1] and scaled by 32767.
void write_wav(const std::filesystem::path& path, const Waveform& wav);

struct FbankConfig {
  int n_mels = 40;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  double preemph = 0.97;
  double mel_low_hz = 20.0;
  double mel_high_hz = 7600.0;
  double log_floor = 1e-10;

  int win_samples() const;
  int hop_samples() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct FeatureMatrix {
  ag::Matrix frames;  // T x F
  double frame_rate_hz = 0.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Log mel filterbank energies: per-frame pre-emphasis, Hamming window,
/// power spectrum, triangular mel filters, natural log with a floor.
/// T = floor((N - win) / hop) + 1.
FeatureMatrix fbank(const Waveform& wav, const FbankConfig& cfg = {});

/// Sentinel for "no noise".
inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

/// Adds noise scaled to the requested SNR (RMS based). Noise longer than the
/// signal is cropped at a random offset, shorter noise is tiled. The result
/// is hard-clipped to [-1, 1].
Waveform mix_noise(const Waveform& wav, const Waveform& noise, double snr_db,
                   Rng& rng);

/// Linear convolution with an impulse response, truncated to the input
/// length and rescaled to the input RMS.
Waveform apply_rir(const Waveform& wav, const Waveform& ir);

enum class AugmentKind { kNoise, kReverb };

struct AugmentConfig {
  double probability = 0.6;
  double snr_low_db = 0.0;
  double snr_high_db = 20.0;
  std::vector<AugmentKind> kinds = {AugmentKind::kNoise, AugmentKind::kReverb};

  void validate() const;
};

struct AugmentBanks {
  std::vector<Waveform> noise;
  std::vector<Waveform> rirs;
};

/// Loads every *.wav under dir in sorted filename order. An empty path gives
/// an empty bank.
std::vector<Waveform> load_bank(const std::filesystem::path& dir);

/// With probability cfg.probability applies one kind drawn uniformly from
/// cfg.kinds; otherwise returns the input. The draw sequence depends only on
/// rng, so equal seeds give bit-identical output.
Waveform augment(const Waveform& wav, const AugmentBanks& banks,
                 const AugmentConfig& cfg, Rng& rng);

}  // namespace svtk

#endif  // SVTK_SIGNAL_H_

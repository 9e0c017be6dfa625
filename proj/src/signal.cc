// svtk/src/signal.cc

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

#include "svtk/signal.h"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "svtk/error.h"

namespace svtk {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

struct WavInfo {
  std::size_t data_offset = 0;
  std::size_t num_samples = 0;
};

// Validates the header of an in-memory WAV file.
WavInfo parse_wav_header(const std::vector<unsigned char>& buf,
                         const std::string& name) {
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError(name + ": malformed header (not RIFF/WAVE)");
  std::size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > buf.size())
        throw FormatError(name + ": malformed header (short fmt chunk)");
      const unsigned char* f = buf.data() + body;
      const std::uint16_t format = read_u16(f);
      const std::uint16_t channels = read_u16(f + 2);
      const std::uint32_t rate = read_u32(f + 4);
      const std::uint16_t bits = read_u16(f + 14);
      if (format != 1)
        throw FormatError(name + ": unsupported encoding (format tag " +
                          std::to_string(format) + ", expected PCM)");
      if (channels != 1)
        throw FormatError(name + ": unsupported channel count " +
                          std::to_string(channels));
      if (rate != kSampleRate)
        throw FormatError(name + ": unsupported sample rate " + std::to_string(rate));
      if (bits != 16)
        throw FormatError(name + ": unsupported bit depth " + std::to_string(bits));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(name + ": malformed header (data before fmt)");
      if (body + size > buf.size())
        throw FormatError(name + ": truncated data chunk");
      if (size % 2 != 0) throw FormatError(name + ": odd data chunk size");
      return {body, size / 2};
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(name + ": malformed header (no data chunk)");
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

double rms_of(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> hamming(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

// n_mels x (fft_size/2 + 1) triangular weights, equally spaced on the mel axis.
ag::Matrix mel_filterbank(const FbankConfig& cfg) {
  const int nbins = cfg.fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(kSampleRate) / cfg.fft_size;
  const double lo = hz_to_mel(cfg.mel_low_hz);
  const double hi = hz_to_mel(cfg.mel_high_hz);
  const double delta = (hi - lo) / (cfg.n_mels + 1);
  ag::Matrix fb = ag::Matrix::Zero(cfg.n_mels, nbins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = lo + m * delta;
    const double center = left + delta;
    const double right = center + delta;
    for (int k = 0; k < nbins; ++k) {
      const double mel = hz_to_mel(k * bin_hz);
      if (mel > left && mel < right)
        fb(m, k) = mel <= center ? (mel - left) / (center - left)
                                 : (right - mel) / (right - center);
    }
  }
  return fb;
}

std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b) {
  const std::size_t full = a.size() + b.size() - 1;
  std::size_t n = 1;
  while (n < full) n <<= 1;
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> out;
  fft.inv(out, fa);
  out.resize(full);
  return out;
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ != kSampleRate)
    throw FormatError("unsupported sample rate " + std::to_string(sample_rate_));
  if (samples_.empty()) throw NumericError("empty waveform");
  for (double v : samples_)
    if (!std::isfinite(v)) throw NumericError("waveform has non-finite samples");
}

double Waveform::rms() const { return rms_of(samples_); }

Waveform read_wav(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  const WavInfo info = parse_wav_header(buf, path.string());
  if (info.num_samples == 0) throw FormatError(path.string() + ": no samples");
  std::vector<double> samples(info.num_samples);
  const unsigned char* p = buf.data() + info.data_offset;
  for (std::size_t i = 0; i < info.num_samples; ++i)
    samples[i] = static_cast<std::int16_t>(read_u16(p + 2 * i)) / 32768.0;
  return Waveform(std::move(samples));
}

std::size_t wav_num_samples(const std::filesystem::path& path) {
  return parse_wav_header(slurp(path), path.string()).num_samples;
}

void write_wav(const std::filesystem::path& path, const Waveform& wav) {
  const auto n = static_cast<std::uint32_t>(wav.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (double v : wav.samples()) {
    const double c = std::clamp(v, -1.0, 1.0);
    put_u16(out, static_cast<std::uint16_t>(
                     static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string() + ": cannot write");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

int FbankConfig::win_samples() const {
  return static_cast<int>(std::lround(win_ms * kSampleRate / 1000.0));
}

int FbankConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * kSampleRate / 1000.0));
}

void FbankConfig::validate() const {
  if (n_mels < 1) throw ConfigError("fbank.n_mels must be >= 1");
  if (!(hop_ms > 0.0)) throw ConfigError("fbank.hop_ms must be > 0");
  if (!(win_ms > hop_ms)) throw ConfigError("fbank.win_ms must exceed fbank.hop_ms");
  if (fft_size < win_samples())
    throw ConfigError("fbank.fft_size must be >= window length in samples");
  if (!(mel_low_hz >= 0.0 && mel_high_hz > mel_low_hz &&
        mel_high_hz <= kSampleRate / 2.0))
    throw ConfigError("fbank.mel_low_hz/mel_high_hz out of range");
  if (!(log_floor > 0.0)) throw ConfigError("fbank.log_floor must be > 0");
}

double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

FeatureMatrix fbank(const Waveform& wav, const FbankConfig& cfg) {
  cfg.validate();
  const int win = cfg.win_samples();
  const int hop = cfg.hop_samples();
  const auto n = static_cast<long>(wav.size());
  if (n < win)
    throw NumericError("waveform shorter than one analysis window (" +
                       std::to_string(n) + " < " + std::to_string(win) + " samples)");
  const long frames = (n - win) / hop + 1;
  const ag::Matrix fb = mel_filterbank(cfg);
  const auto window = hamming(win);
  const int nbins = cfg.fft_size / 2 + 1;

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size));
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd power(nbins);
  FeatureMatrix out;
  out.frames.resize(frames, cfg.n_mels);
  out.frame_rate_hz = 1000.0 / cfg.hop_ms;
  const auto x = wav.samples();
  for (long t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const double* frame = x.data() + t * hop;
    for (int i = win - 1; i > 0; --i)
      buf[static_cast<std::size_t>(i)] = frame[i] - cfg.preemph * frame[i - 1];
    buf[0] = frame[0] * (1.0 - cfg.preemph);
    for (int i = 0; i < win; ++i) buf[static_cast<std::size_t>(i)] *= window[static_cast<std::size_t>(i)];
    fft.fwd(spec, buf);
    for (int k = 0; k < nbins; ++k) power(k) = std::norm(spec[static_cast<std::size_t>(k)]);
    Eigen::VectorXd energies = fb * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      out.frames(t, m) = std::log(std::max(energies(m), cfg.log_floor));
  }
  return out;
}

Waveform mix_noise(const Waveform& wav, const Waveform& noise, double snr_db,
                   Rng& rng) {
  if (noise.rms() == 0.0) throw NumericError("zero-energy noise: SNR undefined");
  if (snr_db == kInfiniteSnr) return wav;
  if (std::isnan(snr_db)) throw NumericError("SNR is NaN");

  const std::size_t n = wav.size();
  const std::size_t m = noise.size();
  const std::size_t offset = m >= n ? uniform_index(rng, m - n + 1) : uniform_index(rng, m);
  std::vector<double> crop(n);
  const auto ns = noise.samples();
  for (std::size_t i = 0; i < n; ++i) crop[i] = ns[(offset + i) % m];
  const double noise_rms = rms_of(crop);
  if (noise_rms == 0.0) throw NumericError("zero-energy noise segment: SNR undefined");

  const double gain = wav.rms() / (noise_rms * std::pow(10.0, snr_db / 20.0));
  std::vector<double> out(n);
  const auto s = wav.samples();
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::clamp(s[i] + gain * crop[i], -1.0, 1.0);
  return Waveform(std::move(out));
}

Waveform apply_rir(const Waveform& wav, const Waveform& ir) {
  if (ir.rms() == 0.0) throw NumericError("zero-energy impulse response");
  const auto x = wav.samples();
  const auto h = ir.samples();
  std::vector<double> y;
  if (h.size() <= 64) {
    y.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double acc = 0.0;
      const std::size_t kmax = std::min(h.size(), i + 1);
      for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[i - k];
      y[i] = acc;
    }
  } else {
    y = fft_convolve(x, h);
    y.resize(x.size());
  }
  const double out_rms = rms_of(y);
  if (out_rms > 0.0) {
    const double g = wav.rms() / out_rms;
    for (double& v : y) v *= g;
  }
  return Waveform(std::move(y));
}

void AugmentConfig::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw ConfigError("augment.probability must lie in [0, 1]");
  if (!(snr_low_db <= snr_high_db))
    throw ConfigError("augment.snr_low_db must not exceed augment.snr_high_db");
}

std::vector<Waveform> load_bank(const std::filesystem::path& dir) {
  std::vector<Waveform> bank;
  if (dir.empty()) return bank;
  if (!std::filesystem::is_directory(dir))
    throw FormatError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) bank.push_back(read_wav(f));
  return bank;
}

Waveform augment(const Waveform& wav, const AugmentBanks& banks,
                 const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  for (AugmentKind k : cfg.kinds) {
    if (k == AugmentKind::kNoise && banks.noise.empty())
      throw ConfigError("augmentation kind 'noise' enabled with an empty noise bank");
    if (k == AugmentKind::kReverb && banks.rirs.empty())
      throw ConfigError("augmentation kind 'reverb' enabled with an empty RIR bank");
  }
  if (cfg.kinds.empty() || uniform01(rng) >= cfg.probability) return wav;

  const AugmentKind kind = cfg.kinds[uniform_index(rng, cfg.kinds.size())];
  if (kind == AugmentKind::kNoise) {
    const Waveform& noise = banks.noise[uniform_index(rng, banks.noise.size())];
    const double snr = uniform(rng, cfg.snr_low_db, cfg.snr_high_db);
    return mix_noise(wav, noise, snr, rng);
  }
  const Waveform& ir = banks.rirs[uniform_index(rng, banks.rirs.size())];
  return apply_rir(wav, ir);
}

}  // namespace svtk

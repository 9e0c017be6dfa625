// svtk/src/config.cc

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

#include "svtk/config.h"

#include <charconv>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "svtk/checkpoint.h"
#include "svtk/error.h"

namespace svtk {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const char* want) {
  throw ConfigError(key + ": expected " + want + ", got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad_value(key, v, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(static_cast<int>(parse_int(key, trim(tok))));
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field int_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(parse_int(k, v));
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

// Fields nested one struct deep, e.g. &RunConfig::fbank, &FbankConfig::n_mels.
template <class S, class T>
Field nested_int(S RunConfig::*outer, T S::*inner) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*outer).*inner = static_cast<T>(parse_int(k, v));
          },
          [=](const RunConfig& c) { return std::to_string((c.*outer).*inner); }};
}

template <class S>
Field nested_double(S RunConfig::*outer, double S::*inner) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*outer).*inner = parse_double(k, v);
          },
          [=](const RunConfig& c) { return fmt_double((c.*outer).*inner); }};
}

Field double_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_double(k, v);
          },
          [member](const RunConfig& c) { return fmt_double(c.*member); }};
}

Field string_field(std::string PathsConfig::*member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) {
            c.paths.*member = v;
          },
          [member](const RunConfig& c) { return c.paths.*member; }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["fbank.n_mels"] = nested_int(&RunConfig::fbank, &FbankConfig::n_mels);
    f["fbank.win_ms"] = nested_double(&RunConfig::fbank, &FbankConfig::win_ms);
    f["fbank.hop_ms"] = nested_double(&RunConfig::fbank, &FbankConfig::hop_ms);
    f["fbank.fft_size"] = nested_int(&RunConfig::fbank, &FbankConfig::fft_size);
    f["fbank.preemph"] = nested_double(&RunConfig::fbank, &FbankConfig::preemph);
    f["fbank.mel_low_hz"] = nested_double(&RunConfig::fbank, &FbankConfig::mel_low_hz);
    f["fbank.mel_high_hz"] = nested_double(&RunConfig::fbank, &FbankConfig::mel_high_hz);
    f["fbank.log_floor"] = nested_double(&RunConfig::fbank, &FbankConfig::log_floor);

    f["upstream.mode"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                            c.mode = parse_upstream_mode(v);
                          },
                          [](const RunConfig& c) { return std::string(to_string(c.mode)); }};
    f["upstream.n_layers"] = nested_int(&RunConfig::upstream, &MockUpstreamConfig::n_layers);
    f["upstream.dim"] = nested_int(&RunConfig::upstream, &MockUpstreamConfig::dim);
    f["upstream.conv_strides"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.upstream.conv_strides = parse_int_list(k, v);
        },
        [](const RunConfig& c) { return fmt_int_list(c.upstream.conv_strides); }};
    f["upstream.conv_channels"] =
        nested_int(&RunConfig::upstream, &MockUpstreamConfig::conv_channels);
    f["upstream.smoothing"] = nested_int(&RunConfig::upstream, &MockUpstreamConfig::smoothing);
    f["upstream.import_layers"] = int_field(&RunConfig::import_layers);
    f["upstream.import_dim"] = int_field(&RunConfig::import_dim);
    f["upstream.plant_layer"] = int_field(&RunConfig::plant_layer);
    f["upstream.plant_strength"] = double_field(&RunConfig::plant_strength);

    f["ecapa.channels"] = nested_int(&RunConfig::ecapa, &EcapaConfig::channels);
    f["ecapa.res2_scale"] = nested_int(&RunConfig::ecapa, &EcapaConfig::res2_scale);
    f["ecapa.dilations"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto d = parse_int_list(k, v);
          if (d.size() != 3) bad_value(k, v, "three comma-separated integers");
          std::copy(d.begin(), d.end(), c.ecapa.dilations.begin());
        },
        [](const RunConfig& c) {
          return fmt_int_list({c.ecapa.dilations.begin(), c.ecapa.dilations.end()});
        }};
    f["ecapa.se_bottleneck"] = nested_int(&RunConfig::ecapa, &EcapaConfig::se_bottleneck);
    f["ecapa.attention_channels"] =
        nested_int(&RunConfig::ecapa, &EcapaConfig::attention_channels);
    f["ecapa.embed_dim"] = nested_int(&RunConfig::ecapa, &EcapaConfig::embed_dim);
    f["ecapa.stem_kernel"] = nested_int(&RunConfig::ecapa, &EcapaConfig::stem_kernel);

    f["aam.margin"] = nested_double(&RunConfig::aam, &AamConfig::margin);
    f["aam.scale"] = nested_double(&RunConfig::aam, &AamConfig::scale);

    f["train.stage1_epochs"] = nested_int(&RunConfig::train, &TrainSchedule::stage1_epochs);
    f["train.stage2_epochs"] = nested_int(&RunConfig::train, &TrainSchedule::stage2_epochs);
    f["train.lmft_epochs"] = nested_int(&RunConfig::train, &TrainSchedule::lmft_epochs);
    f["train.crop_seconds"] = nested_double(&RunConfig::train, &TrainSchedule::crop_seconds);
    f["train.lmft_crop_seconds"] =
        nested_double(&RunConfig::train, &TrainSchedule::lmft_crop_seconds);
    f["train.lmft_margin"] = nested_double(&RunConfig::train, &TrainSchedule::lmft_margin);
    f["train.batch_size"] = nested_int(&RunConfig::train, &TrainSchedule::batch_size);
    f["train.lr_stage1"] = nested_double(&RunConfig::train, &TrainSchedule::lr_stage1);
    f["train.lr_stage2"] = nested_double(&RunConfig::train, &TrainSchedule::lr_stage2);
    f["train.lr_lmft"] = nested_double(&RunConfig::train, &TrainSchedule::lr_lmft);

    f["augment.enabled"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              c.augment_enabled = parse_bool(k, v);
                            },
                            [](const RunConfig& c) {
                              return std::string(c.augment_enabled ? "true" : "false");
                            }};
    f["augment.probability"] = nested_double(&RunConfig::augment, &AugmentConfig::probability);
    f["augment.snr_low_db"] = nested_double(&RunConfig::augment, &AugmentConfig::snr_low_db);
    f["augment.snr_high_db"] = nested_double(&RunConfig::augment, &AugmentConfig::snr_high_db);
    f["augment.kinds"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          std::vector<AugmentKind> kinds;
          std::stringstream ss(v);
          std::string tok;
          while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok == "noise") kinds.push_back(AugmentKind::kNoise);
            else if (tok == "reverb") kinds.push_back(AugmentKind::kReverb);
            else bad_value(k, v, "a comma-separated list of noise, reverb");
          }
          c.augment.kinds = kinds;
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.augment.kinds.size(); ++i)
            out += std::string(i ? "," : "") +
                   (c.augment.kinds[i] == AugmentKind::kNoise ? "noise" : "reverb");
          return out;
        }};

    f["cohort.top_k"] = int_field(&RunConfig::cohort_top_k);
    f["calibration.n_trials"] = int_field(&RunConfig::calibration_trials);

    f["synth.n_speakers"] = nested_int(&RunConfig::synth, &SynthSpec::n_speakers);
    f["synth.utts_per_speaker"] = nested_int(&RunConfig::synth, &SynthSpec::utts_per_speaker);
    f["synth.utt_seconds"] = nested_double(&RunConfig::synth, &SynthSpec::utt_seconds);
    f["synth.n_formants"] = nested_int(&RunConfig::synth, &SynthSpec::n_formants);
    f["synth.formant_jitter"] = nested_double(&RunConfig::synth, &SynthSpec::formant_jitter);
    f["synth.heldout_per_speaker"] =
        nested_int(&RunConfig::synth, &SynthSpec::heldout_per_speaker);
    f["synth.noise_floor"] = nested_double(&RunConfig::synth, &SynthSpec::noise_floor);

    f["paths.manifest"] = string_field(&PathsConfig::manifest);
    f["paths.checkpoint"] = string_field(&PathsConfig::checkpoint);
    f["paths.noise_dir"] = string_field(&PathsConfig::noise_dir);
    f["paths.rir_dir"] = string_field(&PathsConfig::rir_dir);

    f["run.seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                       std::uint64_t out = 0;
                       const auto* end = v.data() + v.size();
                       auto [p, ec] = std::from_chars(v.data(), end, out);
                       if (ec != std::errc() || p != end) bad_value(k, v, "an unsigned integer");
                       c.seed = out;
                     },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
    f["run.jobs"] = int_field(&RunConfig::jobs);
    return f;
  }();
  return fields;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : registry()) out.push_back(key);
    return out;
  }();
  return k;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [key, f] : registry()) out += key + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  fbank.validate();
  upstream.validate();
  model_config().validate();
  ecapa.validate();
  aam.validate();
  train.validate();
  augment.validate();
  synth.validate();
  if (cohort_top_k < 1) throw ConfigError("cohort.top_k must be >= 1");
  if (calibration_trials < 2) throw ConfigError("calibration.n_trials must be >= 2");
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.mode = mode;
  m.fbank = fbank;
  m.upstream = upstream;
  m.ecapa = ecapa;
  m.import_layers = import_layers;
  m.import_dim = import_dim;
  m.plant_layer = plant_layer;
  m.plant_strength = plant_strength;
  m.seed = seed;
  return m;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.schedule = train;
  o.aam = aam;
  o.augment = augment_enabled;
  o.augment_cfg = augment;
  o.seed = seed;
  return o;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text, path.string());
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

}  // namespace svtk

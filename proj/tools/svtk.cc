// svtk/tools/svtk.cc

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

// Command-line driver. Every command prints one "status=ok key=value ..."
// line on success. Exit codes: 2 config, 3 input format, 4 numeric.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svtk/aggregator.h"
#include "svtk/checkpoint.h"
#include "svtk/config.h"
#include "svtk/error.h"
#include "svtk/pipeline.h"
#include "svtk/scoring.h"
#include "svtk/synthcorpus.h"
#include "svtk/training.h"

namespace {

using namespace svtk;

struct Globals {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool deterministic = false;
};

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void summary(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string line = "status=ok";
  for (const auto& [k, v] : kv) line += " " + k + "=" + v;
  std::cout << line << std::endl;
}

std::string require(const std::string& value, const std::string& key) {
  if (value.empty()) throw ConfigError(key + " is required");
  return value;
}

// Paths that feed a command must exist; the diagnostic names the key.
std::filesystem::path existing(const std::string& value, const std::string& key) {
  require(value, key);
  if (!std::filesystem::exists(value)) throw ConfigError(key + ": no such file '" + value + "'");
  return value;
}

RunConfig load(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  apply_overrides(cfg, g.sets);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  cfg.validate();
  return cfg;
}

// Import mode sizes the aggregator from the first stack when unset.
void probe_import_shape(RunConfig& cfg, const Manifest& m) {
  if (cfg.mode != UpstreamMode::kImport || cfg.import_layers > 0 || m.rows.empty()) return;
  const LayerStack s = load_stack(m.rows.front().path);
  cfg.import_layers = static_cast<int>(s.num_layers());
  cfg.import_dim = static_cast<int>(s.dim());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size()) throw ConfigError(flag + ": bad number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svtk: speaker verification toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Config file (section.key = value)");
  app.add_option("--set", g.sets, "Override a config key: section.key=value");
  app.add_option("--seed", g.seed, "Master seed (overrides run.seed)");
  app.add_option("--jobs", g.jobs, "Worker threads (overrides run.jobs)");
  app.add_flag("--deterministic", g.deterministic, "Suppress timing output");

  std::string out, manifest, checkpoint, log_path, trials, scores, embeddings, cohort_manifest,
      eval_manifest, weights, eers;
  bool quality = false;

  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic corpus");
  synth->add_option("--out", out, "Output directory")->required();

  auto* fb = app.add_subcommand("fbank", "Extract log mel filterbank features");
  fb->add_option("--manifest", manifest, "Input manifest");
  fb->add_option("--out", out, "Output SVCK file (one tensor per utterance)")->required();

  auto* ue = app.add_subcommand("upstream-export", "Write mock layer stacks as SVHS files");
  ue->add_option("--manifest", manifest, "Input manifest");
  ue->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train the speaker model");
  tr->add_option("--manifest", manifest, "Training manifest (paths.manifest)");
  tr->add_option("--out", checkpoint, "Checkpoint to write (paths.checkpoint)");
  tr->add_option("--log", log_path, "Training log CSV");

  auto* em = app.add_subcommand("embed", "Extract embeddings");
  em->add_option("--checkpoint", checkpoint, "Model checkpoint (paths.checkpoint)");
  em->add_option("--manifest", manifest, "Utterances to embed (paths.manifest)");
  em->add_option("--out", out, "Output SVEB store")->required();

  auto* sc = app.add_subcommand("score", "Cosine-score a trial list");
  sc->add_option("--embeddings", embeddings, "SVEB store")->required();
  sc->add_option("--trials", trials, "Trial list")->required();
  sc->add_option("--out", out, "Score file")->required();

  auto* sn = app.add_subcommand("snorm", "Adaptive s-norm");
  sn->add_option("--scores", scores, "Raw score file")->required();
  sn->add_option("--embeddings", embeddings, "SVEB store with trial and cohort utterances")
      ->required();
  sn->add_option("--cohort-manifest", cohort_manifest, "Cohort (training) manifest")->required();
  sn->add_option("--out", out, "Normalized score file")->required();

  auto* ca = app.add_subcommand("calibrate", "Fit and apply score calibration");
  ca->add_option("--scores", scores, "Scores to calibrate")->required();
  ca->add_option("--embeddings", embeddings, "SVEB store covering --manifest")->required();
  ca->add_option("--manifest", manifest, "Utterances to draw calibration trials from")
      ->required();
  ca->add_option("--cohort-manifest", cohort_manifest,
                 "s-normalize calibration trials with this cohort");
  ca->add_option("--eval-manifest", eval_manifest, "Manifest covering the scored trials");
  ca->add_flag("--quality", quality, "Use duration quality features");
  ca->add_option("--out", out, "Calibrated score file")->required();

  auto* en = app.add_subcommand("ensemble", "Weighted mean of score files");
  en->add_option("--scores", scores, "Comma-separated score files")->required();
  en->add_option("--weights", weights, "Comma-separated weights");
  en->add_option("--eers", eers, "Comma-separated held-out EERs (weights ~ 1/EER)");
  en->add_option("--out", out, "Fused score file")->required();

  auto* ev = app.add_subcommand("eval", "Equal error rate");
  ev->add_option("--scores", scores, "Score file")->required();
  ev->add_option("--trials", trials, "Labeled trial list")->required();

  auto* ew = app.add_subcommand("export-weights", "Aggregator weights as CSV");
  ew->add_option("--checkpoint", checkpoint, "Model checkpoint (paths.checkpoint)");
  ew->add_option("--out", out, "CSV file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    RunConfig cfg = load(g);
    std::ostream* log = &std::cerr;

    if (*synth) {
      SynthSpec spec = cfg.synth;
      spec.seed = derive_seed(cfg.seed, "synth");
      const SynthCorpus c = synth_corpus(spec, out);
      summary({{"speakers", std::to_string(spec.n_speakers)},
               {"utterances", std::to_string(c.all.rows.size())},
               {"train", std::to_string(c.train.rows.size())},
               {"heldout", std::to_string(c.heldout.rows.size())},
               {"trials", std::to_string(c.trials.size())},
               {"out", out}});
    } else if (*fb) {
      const Manifest m =
          read_manifest(existing(manifest.empty() ? cfg.paths.manifest : manifest, "paths.manifest"));
      NamedTensors feats(m.rows.size());
      parallel_for(m.rows.size(), cfg.jobs, [&](std::size_t i) {
        feats[i] = {m.rows[i].utt_id, fbank(read_wav(m.rows[i].path), cfg.fbank).frames};
      });
      save_checkpoint(out, feats);
      std::size_t frames = 0;
      for (const auto& f : feats) frames += static_cast<std::size_t>(f.second.rows());
      summary({{"utterances", std::to_string(feats.size())},
               {"frames", std::to_string(frames)},
               {"dim", std::to_string(cfg.fbank.n_mels)},
               {"out", out}});
    } else if (*ue) {
      const Manifest m =
          read_manifest(existing(manifest.empty() ? cfg.paths.manifest : manifest, "paths.manifest"));
      MockUpstreamConfig ucfg = cfg.upstream;
      ucfg.seed = cfg.seed;
      const MockUpstream up(ucfg);
      std::filesystem::create_directories(out);
      Manifest exported;
      std::vector<LayerStack> stacks(m.rows.size());
      parallel_for(m.rows.size(), cfg.jobs, [&](std::size_t i) {
        ag::NoGradGuard guard;
        LayerStack s = up.run(read_wav(m.rows[i].path));
        if (cfg.plant_layer >= 0 && cfg.plant_strength > 0.0)
          s = plant_speaker_info(s, m.rows[i].speaker_id, cfg.plant_layer, cfg.plant_strength);
        save_stack(s, std::filesystem::path(out) / (m.rows[i].utt_id + ".svhs"));
      });
      for (const auto& r : m.rows) exported.rows.push_back({r.utt_id, r.speaker_id, r.utt_id + ".svhs"});
      write_manifest(std::filesystem::path(out) / "manifest.tsv", exported);
      summary({{"utterances", std::to_string(m.rows.size())},
               {"layers", std::to_string(ucfg.n_layers + 1)},
               {"dim", std::to_string(ucfg.dim)},
               {"out", out}});
    } else if (*tr) {
      const auto mpath = existing(manifest.empty() ? cfg.paths.manifest : manifest, "paths.manifest");
      const std::string ckpt = require(checkpoint.empty() ? cfg.paths.checkpoint : checkpoint,
                                       "paths.checkpoint");
      const Manifest m = read_manifest(mpath);
      probe_import_shape(cfg, m);
      SpeakerModel model(cfg.model_config());
      TrainOptions opts = cfg.train_options();
      opts.log = log;
      if (opts.augment) {
        opts.banks.noise = load_bank(cfg.paths.noise_dir);
        opts.banks.rirs = load_bank(cfg.paths.rir_dir);
      }
      const auto data = load_training_set(m, cfg.mode);
      const TrainResult res = train(model, data, opts);
      NamedTensors tensors = model.tensors();
      for (auto& t : res.anchors->params().tensors()) tensors.push_back(t);
      save_checkpoint(ckpt, tensors);
      if (!log_path.empty()) write_file(log_path, train_log_csv(res.log));
      summary({{"speakers", std::to_string(res.speakers.size())},
               {"epochs", std::to_string(res.log.size())},
               {"final_loss", res.log.empty() ? "nan" : fixed6(res.log.back().loss)},
               {"params", std::to_string(model.all_params().count())},
               {"checkpoint", ckpt}});
    } else if (*em) {
      const auto ckpt = existing(checkpoint.empty() ? cfg.paths.checkpoint : checkpoint,
                                 "paths.checkpoint");
      const Manifest m =
          read_manifest(existing(manifest.empty() ? cfg.paths.manifest : manifest, "paths.manifest"));
      probe_import_shape(cfg, m);
      SpeakerModel model(cfg.model_config());
      model.load(load_checkpoint(ckpt));
      const EmbeddingStore store = embed_manifest(model, m, cfg.jobs);
      save_store(out, store);
      summary({{"embeddings", std::to_string(store.size())},
               {"dim", std::to_string(store.dim())},
               {"out", out}});
    } else if (*sc) {
      const EmbeddingStore store = load_store(embeddings);
      const ScoreSet s = score_trials(read_trials(trials), store);
      write_scores(out, s);
      summary({{"trials", std::to_string(s.size())}, {"out", out}});
    } else if (*sn) {
      const EmbeddingStore store = load_store(embeddings);
      const Cohort cohort = build_cohort(store, read_manifest(cohort_manifest), cfg.cohort_top_k);
      const ScoreSet s = adaptive_snorm(read_scores(scores), store, cohort);
      write_scores(out, s);
      summary({{"trials", std::to_string(s.size())},
               {"cohort", std::to_string(cohort.size())},
               {"top_k", std::to_string(cohort.top_k)},
               {"out", out}});
    } else if (*ca) {
      const EmbeddingStore store = load_store(embeddings);
      const Manifest m = read_manifest(manifest);
      Rng rng(derive_seed(cfg.seed, "calibration"));
      const TrialList cal_trials = generate_calibration_trials(m, cfg.calibration_trials, rng);
      ScoreSet cal = score_trials(cal_trials, store);
      if (!cohort_manifest.empty()) {
        const Cohort cohort =
            build_cohort(store, read_manifest(cohort_manifest), cfg.cohort_top_k);
        cal = adaptive_snorm(cal, store, cohort);
      }
      const ScoreSet target = read_scores(scores);
      Eigen::MatrixXd q_cal(static_cast<Eigen::Index>(cal.size()), 0);
      Eigen::MatrixXd q_eval(static_cast<Eigen::Index>(target.size()), 0);
      if (quality) {
        const Manifest em_m = read_manifest(existing(eval_manifest, "--eval-manifest"));
        q_cal = quality_matrix(cal.trials, manifest_durations(m, cfg.mode));
        q_eval = quality_matrix(target.trials, manifest_durations(em_m, cfg.mode));
      }
      const auto labels = cal.labels();
      const CalibrationFit fit = fit_calibration(cal.scores, labels, q_cal);
      if (!(fit.model.a > 0.0))
        std::cerr << "warning: calibration weight on the raw score is not positive (a="
                  << fit.model.a << ")\n";
      write_scores(out, apply_calibration(fit.model, target, q_eval));
      summary({{"trials", std::to_string(target.size())},
               {"calibration_trials", std::to_string(cal.size())},
               {"a", fixed6(fit.model.a)},
               {"c", fixed6(fit.model.c)},
               {"converged", fit.converged ? "true" : "false"},
               {"out", out}});
    } else if (*en) {
      std::vector<ScoreSet> sets;
      for (const auto& p : split_list(scores)) sets.push_back(read_scores(p));
      std::vector<double> w;
      if (!weights.empty() && !eers.empty())
        throw ConfigError("--weights and --eers are mutually exclusive");
      if (!weights.empty()) {
        w = parse_numbers(weights, "--weights");
      } else if (!eers.empty()) {
        w = weights_from_eers(parse_numbers(eers, "--eers"));
      } else {
        w.assign(sets.size(), 1.0);
      }
      const ScoreSet fused = ensemble(sets, w);
      write_scores(out, fused);
      summary({{"systems", std::to_string(sets.size())},
               {"trials", std::to_string(fused.size())},
               {"out", out}});
    } else if (*ev) {
      ScoreSet s = read_scores(scores);
      attach_labels(s, read_trials(trials));
      const EerResult r = compute_eer(s);
      summary({{"eer", fixed6(r.eer)},
               {"threshold", fixed6(r.threshold)},
               {"trials", std::to_string(s.size())}});
    } else if (*ew) {
      const auto ckpt = existing(checkpoint.empty() ? cfg.paths.checkpoint : checkpoint,
                                 "paths.checkpoint");
      const NamedTensors tensors = load_checkpoint(ckpt);
      const ag::Matrix* logits = nullptr;
      for (const auto& t : tensors)
        if (t.first == "aggregator.logits") logits = &t.second;
      if (!logits) throw FormatError(ckpt.string() + ": no aggregator.logits tensor");
      const std::vector<double> lv(logits->data(), logits->data() + logits->size());
      const auto rows = export_weights(normalized_weights(lv));
      const std::string csv = weights_csv(rows);
      if (out.empty())
        std::cout << csv;
      else
        write_file(out, csv);
      std::size_t best = 0;
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].weight > rows[best].weight) best = i;
      summary({{"layers", std::to_string(rows.size())}, {"argmax", std::to_string(best)}});
    }
    if (!g.deterministic) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "elapsed_s=" << fixed6(secs) << "\n";
    }
  } catch (const svtk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

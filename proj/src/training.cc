// svtk/src/training.cc

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

#include "svtk/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <numbers>
#include <ostream>

#include "svtk/error.h"
#include "svtk/scoring.h"

namespace svtk {

void AamConfig::validate() const {
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2))
    throw ConfigError("aam.margin must be in [0, pi/2)");
  if (!(scale > 0.0)) throw ConfigError("aam.scale must be > 0");
  if (n_classes < 0) throw ConfigError("aam.n_classes must be >= 0");
}

namespace {

// Row-wise unit normalization; returns the norms.
Eigen::VectorXd normalize_rows(const ag::Matrix& x, ag::Matrix& out, const char* what) {
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (!(norms(i) > 0.0))
      throw NumericError(std::string("aam_loss: zero-norm ") + what + " row " +
                         std::to_string(i));
  out = x.array().colwise() / norms.array();
  return norms;
}

// d/dx of x/|x| applied to an upstream gradient, row by row.
ag::Matrix normalize_backward(const ag::Matrix& unit, const Eigen::VectorXd& norms,
                              const ag::Matrix& g) {
  ag::Matrix out(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double proj = unit.row(i).dot(g.row(i));
    out.row(i) = (g.row(i) - proj * unit.row(i)) / norms(i);
  }
  return out;
}

}  // namespace

ag::Var aam_loss(const ag::Var& embeddings, std::span<const int> labels,
                 const ag::Var& anchors, const AamConfig& cfg) {
  cfg.validate();
  const Eigen::Index b = embeddings.rows();
  const Eigen::Index k = anchors.rows();
  if (b < 1) throw NumericError("aam_loss: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != b)
    throw NumericError("aam_loss: label count does not match batch size");
  if (embeddings.cols() != anchors.cols())
    throw NumericError("aam_loss: embedding and anchor dims differ");
  for (int y : labels)
    if (y < 0 || y >= k)
      throw ConfigError("aam_loss: label " + std::to_string(y) + " out of range [0, " +
                        std::to_string(k) + ")");

  ag::Matrix u, w;
  const Eigen::VectorXd en = normalize_rows(embeddings.value(), u, "embedding");
  const Eigen::VectorXd an = normalize_rows(anchors.value(), w, "anchor");

  const double s = cfg.scale, m = cfg.margin;
  const double cos_m = std::cos(m), sin_m = std::sin(m);
  const double threshold = std::cos(std::numbers::pi - m);
  const double lo = -1.0 + kAamCosineClamp, hi = 1.0 - kAamCosineClamp;

  ag::Matrix cosine = u * w.transpose();  // B x K
  ag::Matrix dcos(b, k);                  // d logit / d raw cosine
  ag::Matrix z(b, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double raw = cosine(i, j);
      const bool clamped = raw < lo || raw > hi;
      ag::record_branch(clamped);
      const double c = std::clamp(raw, lo, hi);
      const double pass = clamped ? 0.0 : 1.0;
      if (j == labels[static_cast<std::size_t>(i)]) {
        const bool fallback = c <= threshold;
        ag::record_branch(fallback);
        if (fallback) {
          z(i, j) = s * (c - m * sin_m);
          dcos(i, j) = s * pass;
        } else {
          const double sn = std::sqrt(1.0 - c * c);
          z(i, j) = s * (c * cos_m - sn * sin_m);
          dcos(i, j) = s * (cos_m + c * sin_m / sn) * pass;
        }
      } else {
        z(i, j) = s * c;
        dcos(i, j) = s * pass;
      }
    }
  }

  // Cross-entropy with log1p for precision when the target dominates.
  double total = 0.0;
  ag::Matrix dz(b, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    Eigen::Index top = 0;
    const double zmax = z.row(i).maxCoeff(&top);
    double rest = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (j != top) rest += std::exp(z(i, j) - zmax);
    const double lse = zmax + std::log1p(rest);
    // lse - z_y without cancelling the log1p term when the target is on top.
    total += (zmax - z(i, y)) + std::log1p(rest);
    double others = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == y) continue;
      dz(i, j) = std::exp(z(i, j) - lse);
      others += dz(i, j);
    }
    dz(i, y) = -others;
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  dz *= inv_b;

  ag::Matrix value(1, 1);
  value(0, 0) = total * inv_b;
  return ag::make_result(
      std::move(value), {embeddings, anchors},
      [embeddings, anchors, u, w, en, an, dz, dcos](const ag::Matrix& g) {
        const ag::Matrix gc = dz.cwiseProduct(dcos) * g(0, 0);
        if (embeddings.requires_grad())
          ag::push_grad(embeddings, normalize_backward(u, en, gc * w));
        if (anchors.requires_grad())
          ag::push_grad(anchors, normalize_backward(w, an, gc.transpose() * u));
      });
}

Waveform crop_random(const Waveform& wav, double seconds, Rng& rng) {
  if (!(seconds > 0.0)) throw ConfigError("crop seconds must be > 0");
  const auto len = static_cast<std::size_t>(std::llround(seconds * kSampleRate));
  if (len == 0) throw ConfigError("crop shorter than one sample");
  const auto src = wav.samples();
  const std::size_t n = src.size();
  if (n == len) return wav;
  std::vector<double> out(len);
  if (n < len) {
    for (std::size_t i = 0; i < len; ++i) out[i] = src[i % n];
  } else {
    const std::size_t off = uniform_index(rng, n - len + 1);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(off),
              src.begin() + static_cast<std::ptrdiff_t>(off + len), out.begin());
  }
  return Waveform(std::move(out));
}

void TrainSchedule::validate() const {
  if (stage1_epochs < 0) throw ConfigError("train.stage1_epochs must be >= 0");
  if (stage2_epochs < 0) throw ConfigError("train.stage2_epochs must be >= 0");
  if (lmft_epochs < 0) throw ConfigError("train.lmft_epochs must be >= 0");
  if (!(crop_seconds > 0.0)) throw ConfigError("train.crop_seconds must be > 0");
  if (!(lmft_crop_seconds > 0.0)) throw ConfigError("train.lmft_crop_seconds must be > 0");
  if (!(lmft_margin >= 0.0 && lmft_margin < std::numbers::pi / 2))
    throw ConfigError("train.lmft_margin must be in [0, pi/2)");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr_stage1 > 0.0)) throw ConfigError("train.lr_stage1 must be > 0");
  if (!(lr_stage2 > 0.0)) throw ConfigError("train.lr_stage2 must be > 0");
  if (!(lr_lmft > 0.0)) throw ConfigError("train.lr_lmft must be > 0");
}

const char* to_string(UpstreamMode m) {
  switch (m) {
    case UpstreamMode::kFbank: return "fbank";
    case UpstreamMode::kMock: return "mock";
    case UpstreamMode::kImport: return "import";
  }
  return "?";
}

UpstreamMode parse_upstream_mode(const std::string& s) {
  if (s == "fbank") return UpstreamMode::kFbank;
  if (s == "mock") return UpstreamMode::kMock;
  if (s == "import") return UpstreamMode::kImport;
  throw ConfigError("upstream.mode must be fbank, mock or import, got '" + s + "'");
}

void ModelConfig::validate() const {
  fbank.validate();
  upstream.validate();
  if (mode == UpstreamMode::kImport) {
    if (import_layers < 2) throw ConfigError("upstream.import_layers must be >= 2");
    if (import_dim < 1) throw ConfigError("upstream.import_dim must be >= 1");
  }
  const int layers = mode == UpstreamMode::kMock     ? upstream.n_layers + 1
                     : mode == UpstreamMode::kImport ? import_layers
                                                     : 0;
  if (plant_layer >= 0) {
    if (mode == UpstreamMode::kFbank)
      throw ConfigError("upstream.plant_layer requires a layer-stack front end");
    if (plant_layer >= layers)
      throw ConfigError("upstream.plant_layer " + std::to_string(plant_layer) +
                        " out of range [0, " + std::to_string(layers - 1) + "]");
  }
  if (!(plant_strength >= 0.0)) throw ConfigError("upstream.plant_strength must be >= 0");
}

SpeakerModel::SpeakerModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  switch (cfg_.mode) {
    case UpstreamMode::kFbank:
      cfg_.ecapa.in_dim = cfg_.fbank.n_mels;
      break;
    case UpstreamMode::kMock: {
      auto up = cfg_.upstream;
      up.seed = cfg_.seed;
      upstream_ = std::make_unique<MockUpstream>(up);
      aggregator_ = std::make_unique<Aggregator>(static_cast<std::size_t>(up.n_layers + 1));
      cfg_.ecapa.in_dim = up.dim;
      break;
    }
    case UpstreamMode::kImport:
      aggregator_ = std::make_unique<Aggregator>(static_cast<std::size_t>(cfg_.import_layers));
      cfg_.ecapa.in_dim = cfg_.import_dim;
      break;
  }
  cfg_.ecapa.validate();
  ecapa_ = std::make_unique<Ecapa>(cfg_.ecapa, cfg_.seed);
}

Aggregator& SpeakerModel::aggregator() {
  if (!aggregator_) throw ConfigError("the fbank front end has no aggregator");
  return *aggregator_;
}
const Aggregator& SpeakerModel::aggregator() const {
  if (!aggregator_) throw ConfigError("the fbank front end has no aggregator");
  return *aggregator_;
}
MockUpstream& SpeakerModel::upstream() {
  if (!upstream_) throw ConfigError("front end has no trainable upstream");
  return *upstream_;
}
const MockUpstream& SpeakerModel::upstream() const {
  if (!upstream_) throw ConfigError("front end has no trainable upstream");
  return *upstream_;
}

ag::Var SpeakerModel::features(const ModelInput& input, const std::string& speaker_id,
                               bool train_upstream) const {
  std::vector<ag::Var> layers;
  switch (cfg_.mode) {
    case UpstreamMode::kFbank: {
      const auto* wav = std::get_if<Waveform>(&input);
      if (!wav) throw FormatError("fbank front end needs a waveform");
      return ag::Var::constant(fbank(*wav, cfg_.fbank).frames);
    }
    case UpstreamMode::kMock: {
      const auto* wav = std::get_if<Waveform>(&input);
      if (!wav) throw FormatError("mock front end needs a waveform");
      if (train_upstream) {
        layers = upstream_->forward(*wav);
      } else {
        ag::NoGradGuard guard;
        layers = upstream_->forward(*wav);
      }
      break;
    }
    case UpstreamMode::kImport: {
      const auto* stack = std::get_if<LayerStack>(&input);
      if (!stack) throw FormatError("import front end needs a layer stack");
      if (static_cast<int>(stack->num_layers()) != cfg_.import_layers ||
          stack->dim() != cfg_.import_dim)
        throw FormatError("layer stack shape (" + std::to_string(stack->num_layers()) + ", " +
                          std::to_string(stack->dim()) + ") does not match the model");
      for (const auto& l : stack->layers) layers.push_back(ag::Var::constant(l));
      break;
    }
  }
  if (cfg_.plant_layer >= 0 && cfg_.plant_strength > 0.0)
    plant_speaker_info(layers, speaker_id, cfg_.plant_layer, cfg_.plant_strength);
  return aggregator_->forward(layers);
}

ag::Var SpeakerModel::forward(const ModelInput& input, const std::string& speaker_id,
                              bool train_upstream) const {
  return ecapa_->forward(features(input, speaker_id, train_upstream));
}

Eigen::RowVectorXd SpeakerModel::embed(const ModelInput& input,
                                       const std::string& speaker_id) const {
  ag::NoGradGuard guard;
  return forward(input, speaker_id, false).value();
}

ParamSet SpeakerModel::head_params() const {
  ParamSet p;
  if (aggregator_) p.append(aggregator_->params());
  p.append(ecapa_->params());
  return p;
}

ParamSet SpeakerModel::upstream_params() const {
  ParamSet p;
  if (upstream_) p.append(upstream_->params());
  return p;
}

ParamSet SpeakerModel::all_params() const {
  ParamSet p = upstream_params();
  p.append(head_params());
  return p;
}

void SpeakerModel::load(const NamedTensors& tensors) {
  ParamSet p = all_params();
  NamedTensors mine;
  for (const auto& t : tensors)
    if (p.contains(t.first)) mine.push_back(t);
  p.assign(mine);
}

ClassAnchors::ClassAnchors(int n_classes, int embed_dim, std::uint64_t seed) {
  if (n_classes < 1 || embed_dim < 1) throw ConfigError("anchors need n_classes, dim >= 1");
  Rng rng(derive_seed(seed, "anchors"));
  std::normal_distribution<double> normal(0.0, 1.0);
  ag::Matrix a(n_classes, embed_dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  anchors_ = params_.add(kAnchorTensor, std::move(a));
}

Adam::Adam(ParamSet params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_.items()) {
    m_.push_back(ag::Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(ag::Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& items = params_.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const ag::Matrix g = items[i].var.grad();
    if (!g.allFinite()) throw NumericError("non-finite gradient in " + items[i].name);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    items[i].var.mutable_value().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

std::vector<TrainItem> load_training_set(const Manifest& manifest, UpstreamMode mode) {
  std::vector<TrainItem> out;
  out.reserve(manifest.rows.size());
  for (const auto& r : manifest.rows) {
    if (mode == UpstreamMode::kImport)
      out.push_back({r.utt_id, r.speaker_id, load_stack(r.path)});
    else
      out.push_back({r.utt_id, r.speaker_id, read_wav(r.path)});
  }
  return out;
}

namespace {

struct StagePlan {
  const char* name;
  int epochs;
  double lr;
  double margin;
  double crop_seconds;
  bool train_upstream;
};

ModelInput crop_input(const ModelInput& in, double seconds, const TrainOptions& opts,
                      Rng& rng) {
  if (const auto* stack = std::get_if<LayerStack>(&in)) {
    const auto frames =
        std::max<Eigen::Index>(1, std::llround(seconds * stack->frame_rate_hz));
    return crop_stack(*stack, frames, rng);
  }
  Waveform w = crop_random(std::get<Waveform>(in), seconds, rng);
  if (opts.augment) w = augment(w, opts.banks, opts.augment_cfg, rng);
  return w;
}

}  // namespace

TrainResult train(SpeakerModel& model, std::span<const TrainItem> data,
                  const TrainOptions& opts) {
  opts.schedule.validate();
  if (opts.augment) opts.augment_cfg.validate();
  TrainResult result;
  std::map<std::string, int> class_of;
  for (const auto& item : data) class_of.emplace(item.speaker_id, 0);
  if (class_of.size() < 2)
    throw NumericError("training needs at least 2 speakers, manifest has " +
                       std::to_string(class_of.size()));
  for (auto& [spk, idx] : class_of) {
    idx = static_cast<int>(result.speakers.size());
    result.speakers.push_back(spk);
  }
  std::vector<int> labels;
  for (const auto& item : data) labels.push_back(class_of.at(item.speaker_id));

  const int n_classes = static_cast<int>(result.speakers.size());
  result.anchors = std::make_shared<ClassAnchors>(n_classes, model.ecapa().config().embed_dim,
                                                  opts.seed);

  const auto& sch = opts.schedule;
  const bool mock = model.has_trainable_upstream();
  std::vector<StagePlan> plan = {
      {"stage1", sch.stage1_epochs, sch.lr_stage1, opts.aam.margin, sch.crop_seconds, false},
      {"stage2", sch.stage2_epochs, sch.lr_stage2, opts.aam.margin, sch.crop_seconds, mock},
      {"lmft", sch.lmft_epochs, sch.lr_lmft, sch.lmft_margin, sch.lmft_crop_seconds, mock},
  };
  if (!mock && sch.stage2_epochs > 0 && opts.log)
    *opts.log << "notice: front end '" << to_string(model.config().mode)
              << "' has no trainable upstream; stage 2 keeps it frozen\n";

  Rng rng(derive_seed(opts.seed, "train"));
  std::vector<std::size_t> order(data.size());
  int epoch = 0;
  for (const auto& stage : plan) {
    if (stage.epochs == 0) continue;
    ParamSet params = model.head_params();
    if (stage.train_upstream) params.append(model.upstream_params());
    params.append(result.anchors->params());
    Adam opt(params, stage.lr);
    AamConfig aam = opts.aam;
    aam.margin = stage.margin;
    aam.n_classes = n_classes;

    for (int e = 0; e < stage.epochs; ++e) {
      ++epoch;
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      int batches = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(sch.batch_size)) {
        const std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(sch.batch_size));
        std::vector<ag::Var> embs;
        std::vector<int> batch_labels;
        for (std::size_t i = start; i < end; ++i) {
          const auto& item = data[order[i]];
          const ModelInput crop = crop_input(item.input, stage.crop_seconds, opts, rng);
          embs.push_back(model.forward(crop, item.speaker_id, stage.train_upstream));
          batch_labels.push_back(labels[order[i]]);
        }
        opt.zero_grad();
        const ag::Var loss =
            aam_loss(ag::concat_rows(embs), batch_labels, result.anchors->anchors(), aam);
        ag::backward(loss);
        opt.step();
        loss_sum += loss.value()(0, 0);
        ++batches;
      }
      opt.zero_grad();
      const double mean = loss_sum / batches;
      if (!std::isfinite(mean)) throw NumericError("training loss diverged in " +
                                                   std::string(stage.name));
      result.log.push_back({epoch, stage.name, mean, stage.lr});
      if (opts.log) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "epoch=%d stage=%s loss=%.6f lr=%g\n", epoch,
                      stage.name, mean, stage.lr);
        *opts.log << buf;
      }
    }
  }
  return result;
}

std::string train_log_csv(std::span<const TrainLogRow> rows) {
  std::string out = "epoch,stage,loss,lr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%g\n", r.epoch, r.stage.c_str(), r.loss, r.lr);
    out += buf;
  }
  return out;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

namespace {

ag::Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  ag::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradCheckFloor});
}

struct Probe {
  double value;
  std::vector<unsigned char> branches;
};

Probe evaluate(const std::function<ag::Var()>& loss) {
  ag::NoGradGuard guard;
  ag::BranchRecorder rec;
  const double v = loss().value()(0, 0);
  return {v, rec.branches()};
}

void check_params(const ParamSet& params, const std::function<ag::Var()>& loss, int trials,
                  double eps, Rng& rng, GradCheckReport& report) {
  for (const auto& p : params.items()) p.var.node()->grad.resize(0, 0);
  ag::backward(loss());
  const Probe base = evaluate(loss);
  for (const auto& p : params.items()) {
    ag::Var var = p.var;
    const ag::Matrix analytic = var.grad();
    GradCheckEntry entry{p.name};
    const auto n = static_cast<std::size_t>(var.value().size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, static_cast<std::size_t>(trials)));
    for (std::size_t i : idx) {
      double& x = var.mutable_value().data()[i];
      const double saved = x;
      x = saved + eps;
      const Probe plus = evaluate(loss);
      x = saved - eps;
      const Probe minus = evaluate(loss);
      x = saved;
      if (plus.branches != base.branches || minus.branches != base.branches) {
        ++entry.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * eps);
      entry.max_rel_error = std::max(entry.max_rel_error, rel_error(analytic.data()[i], numeric));
      ++entry.samples;
    }
    report.entries.push_back(entry);
  }
}

ag::Var weighted_sum_loss(const ag::Var& x, const ag::Matrix& r) {
  return ag::sum(ag::mul(x, ag::Var::constant(r)));
}

}  // namespace

GradCheckReport grad_check(const std::string& component, int trials, double epsilon,
                           std::uint64_t seed) {
  if (trials < 1) throw ConfigError("grad_check: trials must be >= 1");
  if (!(epsilon > 0.0)) throw ConfigError("grad_check: epsilon must be > 0");
  Rng rng(derive_seed(seed, "grad-check/" + component));
  GradCheckReport report{component, {}};

  if (component == "aggregator") {
    Aggregator agg(5);
    std::vector<double> logits;
    for (int i = 0; i < 5; ++i) logits.push_back(uniform(rng, -1.0, 1.0));
    agg.set_logits(logits);
    std::vector<ag::Var> layers;
    for (int i = 0; i < 5; ++i) layers.push_back(ag::Var::constant(random_matrix(rng, 7, 4)));
    const ag::Matrix r = random_matrix(rng, 7, 4);
    check_params(agg.params(),
                 [&] { return weighted_sum_loss(ag::tanh(agg.forward(layers)), r); }, trials,
                 epsilon, rng, report);
  } else if (component == "ecapa") {
    EcapaConfig cfg;
    cfg.in_dim = 6;
    cfg.channels = 16;
    cfg.res2_scale = 4;
    cfg.se_bottleneck = 8;
    cfg.attention_channels = 8;
    cfg.embed_dim = 8;
    Ecapa net(cfg, seed);
    const ag::Var x = ag::Var::constant(random_matrix(rng, 12, cfg.in_dim));
    const ag::Matrix r = random_matrix(rng, 1, cfg.embed_dim);
    check_params(net.params(), [&] { return weighted_sum_loss(net.forward(x), r); }, trials,
                 epsilon, rng, report);
  } else if (component == "aam") {
    ParamSet p;
    const ag::Var emb = p.add("embeddings", random_matrix(rng, 6, 5));
    const ag::Var anchors = p.add(kAnchorTensor, random_matrix(rng, 3, 5));
    const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
    AamConfig cfg{0.2, 30.0, 3};
    check_params(p, [&] { return aam_loss(emb, labels, anchors, cfg); }, trials, epsilon, rng,
                 report);
  } else if (component == "calibration") {
    const int n = 40;
    std::vector<double> scores;
    std::vector<int> labels;
    Eigen::MatrixXd quality(n, 2);
    for (int i = 0; i < n; ++i) {
      labels.push_back(i % 2);
      scores.push_back(uniform(rng, -1.0, 1.0) + 0.5 * (i % 2));
      quality(i, 0) = uniform(rng, 0.0, 2.0);
      quality(i, 1) = uniform(rng, 0.0, 4.0);
    }
    Eigen::VectorXd theta(4);
    for (int i = 0; i < 4; ++i) theta(i) = uniform(rng, -1.0, 1.0);
    Eigen::VectorXd analytic;
    calibration_objective(theta, scores, labels, quality, &analytic);
    const char* names[] = {"calibration.a", "calibration.b0", "calibration.b1", "calibration.c"};
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(i) += epsilon;
      tm(i) -= epsilon;
      const double numeric = (calibration_objective(tp, scores, labels, quality, nullptr) -
                              calibration_objective(tm, scores, labels, quality, nullptr)) /
                             (2.0 * epsilon);
      report.entries.push_back({names[i], rel_error(analytic(i), numeric), 1, 0});
    }
  } else if (component == "upstream") {
    MockUpstreamConfig cfg;
    cfg.n_layers = 3;
    cfg.dim = 5;
    cfg.conv_strides = {4, 4};
    cfg.conv_channels = 4;
    cfg.seed = seed;
    MockUpstream up(cfg);
    std::vector<double> samples(16 * 10);
    for (auto& s : samples) s = uniform(rng, -0.5, 0.5);
    const Waveform wav(samples);
    std::vector<ag::Matrix> r;
    for (int l = 0; l <= cfg.n_layers; ++l) r.push_back(random_matrix(rng, 10, cfg.dim));
    check_params(up.params(),
                 [&] {
                   const auto layers = up.forward(wav);
                   ag::Var acc = weighted_sum_loss(layers[0], r[0]);
                   for (std::size_t l = 1; l < layers.size(); ++l)
                     acc = ag::add(acc, weighted_sum_loss(layers[l], r[l]));
                   return acc;
                 },
                 trials, epsilon, rng, report);
  } else if (component == "fbank") {
    throw ConfigError("grad_check: component 'fbank' has no parameters");
  } else {
    throw ConfigError("grad_check: unknown component '" + component + "'");
  }
  return report;
}

}  // namespace svtk

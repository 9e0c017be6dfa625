// svtk/src/scoring.cc

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

#include "svtk/scoring.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "svtk/bytes.h"
#include "svtk/checkpoint.h"
#include "svtk/error.h"

namespace svtk {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

int parse_label(const std::string& s, const std::string& where) {
  if (s == "1" || s == "target") return 1;
  if (s == "0" || s == "nontarget") return 0;
  throw FormatError(where + ": label must be 0 or 1, got '" + s + "'");
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Design matrix rows [score, quality..., 1].
Eigen::MatrixXd design(std::span<const double> scores, const Eigen::MatrixXd& quality) {
  const auto n = static_cast<Eigen::Index>(scores.size());
  if (quality.rows() != n && !(quality.cols() == 0))
    throw FormatError("quality rows do not match the number of scores");
  Eigen::MatrixXd x(n, quality.cols() + 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = scores[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < quality.cols(); ++j) x(i, 1 + j) = quality(i, j);
    x(i, quality.cols() + 1) = 1.0;
  }
  return x;
}

void check_binary_labels(std::span<const int> labels, std::size_t n) {
  if (labels.size() != n) throw FormatError("score and label counts differ");
  for (int l : labels)
    if (l != 0 && l != 1) throw FormatError("labels must be 0 or 1");
}

}  // namespace

TrialList read_trials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open trial list");
  TrialList out;
  std::string line;
  int lineno = 0;
  std::optional<bool> labeled;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tok.size() != 2 && tok.size() != 3)
      throw FormatError(where + ": expected 'label enroll test' or 'enroll test'");
    const bool has_label = tok.size() == 3;
    if (labeled && *labeled != has_label)
      throw FormatError(where + ": mixes labeled and unlabeled trials");
    labeled = has_label;
    if (has_label)
      out.push_back({parse_label(tok[0], where), tok[1], tok[2]});
    else
      out.push_back({std::nullopt, tok[0], tok[1]});
  }
  return out;
}

void write_trials(const std::filesystem::path& path, const TrialList& trials) {
  std::ostringstream out;
  for (const auto& t : trials) {
    if (t.label) out << *t.label << ' ';
    out << t.enroll << ' ' << t.test << '\n';
  }
  write_file(path, out.str());
}

std::vector<int> ScoreSet::labels() const {
  std::vector<int> out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    if (!t.label) throw NumericError("trial " + t.enroll + " " + t.test + " has no label");
    out.push_back(*t.label);
  }
  return out;
}

std::string format_scores(const ScoreSet& s) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof(buf), " %.6f\n", s.scores[i]);
    out += s.trials[i].enroll + " " + s.trials[i].test + buf;
  }
  return out;
}

void write_scores(const std::filesystem::path& path, const ScoreSet& s) {
  write_file(path, format_scores(s));
}

ScoreSet read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open score file");
  ScoreSet out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tok.size() != 3) throw FormatError(where + ": expected 'enroll test score'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok[2], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok[2].size() || !std::isfinite(v))
      throw FormatError(where + ": bad score '" + tok[2] + "'");
    out.trials.push_back({std::nullopt, tok[0], tok[1]});
    out.scores.push_back(v);
  }
  return out;
}

void attach_labels(ScoreSet& s, const TrialList& trials) {
  if (trials.size() != s.size())
    throw FormatError("trial list has " + std::to_string(trials.size()) + " rows, scores have " +
                      std::to_string(s.size()));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].enroll != s.trials[i].enroll || trials[i].test != s.trials[i].test)
      throw FormatError("trial " + std::to_string(i + 1) + " does not match score row (" +
                        trials[i].enroll + " " + trials[i].test + ")");
    s.trials[i].label = trials[i].label;
  }
}

void EmbeddingStore::add(const std::string& id, Eigen::RowVectorXd embedding) {
  if (ids_.empty() && dim_ == 0) dim_ = embedding.size();
  if (embedding.size() != dim_)
    throw FormatError("embedding " + id + " has dim " + std::to_string(embedding.size()) +
                      ", store dim is " + std::to_string(dim_));
  if (!embedding.allFinite()) throw NumericError("embedding " + id + " is not finite");
  if (values_.count(id)) throw FormatError("duplicate embedding id " + id);
  ids_.push_back(id);
  values_.emplace(id, std::move(embedding));
}

const Eigen::RowVectorXd* EmbeddingStore::find(const std::string& id) const {
  auto it = values_.find(id);
  return it == values_.end() ? nullptr : &it->second;
}

const Eigen::RowVectorXd& EmbeddingStore::at(const std::string& id) const {
  const auto* e = find(id);
  if (!e) throw FormatError("no embedding for id " + id);
  return *e;
}

std::string encode_store(const EmbeddingStore& store) {
  ByteWriter w;
  w.raw("SVEB");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(store.dim()));
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& id : store.ids()) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max())
      throw FormatError("embedding id too long: " + id);
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.raw(id);
    const auto& e = store.at(id);
    for (Eigen::Index i = 0; i < e.size(); ++i) w.f32(static_cast<float>(e(i)));
  }
  return w.take();
}

EmbeddingStore decode_store(const std::string& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "SVEB") throw FormatError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("unsupported SVEB version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint32_t count = r.u32();
  EmbeddingStore store(dim);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t len = r.u16();
    std::string id(r.raw(len));
    Eigen::RowVectorXd e(dim);
    for (std::uint32_t i = 0; i < dim; ++i) e(i) = r.f32();
    store.add(id, std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after embedding store");
  return store;
}

void save_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  write_file(path, encode_store(store));
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  try {
    return decode_store(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

double cosine_score(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  if (a.size() != b.size()) throw NumericError("cosine_score: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_score: zero-norm embedding");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

ScoreSet score_trials(const TrialList& trials, const EmbeddingStore& store) {
  ScoreSet out;
  out.trials = trials;
  out.scores.reserve(trials.size());
  for (const auto& t : trials) out.scores.push_back(cosine_score(store.at(t.enroll), store.at(t.test)));
  return out;
}

Cohort build_cohort(const EmbeddingStore& store, const Manifest& manifest, std::size_t top_k) {
  if (store.empty()) throw NumericError("cannot build a cohort from an empty embedding store");
  std::map<std::string, std::pair<Eigen::RowVectorXd, int>> sums;
  for (const auto& spk : manifest.speakers())
    sums.emplace(spk, std::make_pair(Eigen::RowVectorXd::Zero(store.dim()), 0));
  for (const auto& row : manifest.rows) {
    const auto* e = store.find(row.utt_id);
    if (!e) continue;
    auto& [acc, n] = sums.at(row.speaker_id);
    acc += *e;
    ++n;
  }
  Cohort cohort;
  for (auto& [spk, entry] : sums) {
    auto& [acc, n] = entry;
    if (n == 0) throw NumericError("cohort speaker " + spk + " has no embeddings in the store");
    Eigen::RowVectorXd mean = acc / n;
    const double norm = mean.norm();
    if (norm == 0.0) throw NumericError("cohort speaker " + spk + " has a zero mean embedding");
    cohort.speakers.push_back(spk);
    cohort.members.push_back(mean / norm);
  }
  if (cohort.size() < 2) throw NumericError("cohort needs at least 2 speakers");
  cohort.top_k = std::min(top_k, cohort.size());
  if (cohort.top_k < 1) throw ConfigError("cohort.top_k must be >= 1");
  return cohort;
}

CohortStats cohort_stats(const Eigen::RowVectorXd& e, const Cohort& cohort) {
  if (cohort.top_k < 1 || cohort.top_k > cohort.size())
    throw ConfigError("cohort top_k " + std::to_string(cohort.top_k) + " exceeds cohort size " +
                      std::to_string(cohort.size()));
  std::vector<double> s;
  s.reserve(cohort.size());
  for (const auto& m : cohort.members) s.push_back(cosine_score(e, m));
  const auto k = static_cast<std::ptrdiff_t>(cohort.top_k);
  std::nth_element(s.begin(), s.begin() + (k - 1), s.end(), std::greater<>());
  double mean = 0.0;
  for (std::ptrdiff_t i = 0; i < k; ++i) mean += s[static_cast<std::size_t>(i)];
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    const double d = s[static_cast<std::size_t>(i)] - mean;
    var += d * d;
  }
  return {mean, std::sqrt(var / static_cast<double>(k))};
}

ScoreSet adaptive_snorm(const ScoreSet& raw, const EmbeddingStore& store, const Cohort& cohort) {
  constexpr double kMinStd = 1e-12;
  std::map<std::string, CohortStats> cache;
  auto stats_for = [&](const std::string& id) -> const CohortStats& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, cohort_stats(store.at(id), cohort)).first;
    return it->second;
  };
  ScoreSet out = raw;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& t = raw.trials[i];
    const CohortStats& se = stats_for(t.enroll);
    const CohortStats& st = stats_for(t.test);
    if (se.stddev < kMinStd || st.stddev < kMinStd)
      throw NumericError("degenerate cohort statistics (zero spread) for trial " +
                         std::to_string(i + 1) + " (" + t.enroll + " " + t.test + ")");
    const double s = raw.scores[i];
    out.scores[i] = 0.5 * ((s - se.mean) / se.stddev + (s - st.mean) / st.stddev);
  }
  return out;
}

TrialList generate_calibration_trials(const Manifest& manifest, std::size_t n, Rng& rng) {
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& r : manifest.rows) by_speaker[r.speaker_id].push_back(r.utt_id);
  if (by_speaker.size() < 2)
    throw NumericError("calibration trials need at least 2 speakers");
  std::vector<const std::vector<std::string>*> eligible;
  for (const auto& [spk, utts] : by_speaker)
    if (utts.size() >= 2) eligible.push_back(&utts);
  if (eligible.empty())
    throw NumericError("no speaker has two utterances: cannot form target trials");

  std::vector<std::pair<std::string, std::string>> all;  // (utt, speaker)
  for (const auto& r : manifest.rows) all.emplace_back(r.utt_id, r.speaker_id);

  TrialList out;
  const std::size_t n_target = n / 2;
  for (std::size_t k = 0; k < n_target; ++k) {
    const auto& utts = *eligible[uniform_index(rng, eligible.size())];
    const std::size_t i = uniform_index(rng, utts.size());
    std::size_t j = uniform_index(rng, utts.size() - 1);
    if (j >= i) ++j;
    out.push_back({1, utts[i], utts[j]});
  }
  for (std::size_t k = n_target; k < n; ++k) {
    const auto& [u, spk] = all[uniform_index(rng, all.size())];
    const std::size_t others = all.size() - by_speaker.at(spk).size();
    std::size_t pick = uniform_index(rng, others);
    for (const auto& [v, vspk] : all) {
      if (vspk == spk) continue;
      if (pick-- == 0) {
        out.push_back({0, u, v});
        break;
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<double> quality_features(double enroll_seconds, double test_seconds) {
  if (!(enroll_seconds > 0.0) || !(test_seconds > 0.0))
    throw NumericError("quality_features: durations must be positive");
  return {std::log(std::min(enroll_seconds, test_seconds)),
          std::log(enroll_seconds) + std::log(test_seconds)};
}

Eigen::MatrixXd quality_matrix(const TrialList& trials,
                               const std::map<std::string, double>& durations) {
  Eigen::MatrixXd q(static_cast<Eigen::Index>(trials.size()), 2);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto de = durations.find(trials[i].enroll);
    auto dt = durations.find(trials[i].test);
    if (de == durations.end()) throw FormatError("no duration for " + trials[i].enroll);
    if (dt == durations.end()) throw FormatError("no duration for " + trials[i].test);
    const auto row = quality_features(de->second, dt->second);
    q(static_cast<Eigen::Index>(i), 0) = row[0];
    q(static_cast<Eigen::Index>(i), 1) = row[1];
  }
  return q;
}

double calibration_objective(const Eigen::VectorXd& theta, std::span<const double> scores,
                             std::span<const int> labels, const Eigen::MatrixXd& quality,
                             Eigen::VectorXd* grad) {
  check_binary_labels(labels, scores.size());
  const Eigen::MatrixXd x = design(scores, quality);
  if (theta.size() != x.cols()) throw NumericError("calibration parameter count mismatch");
  const Eigen::VectorXd z = x * theta;
  const double n = static_cast<double>(scores.size());
  double loss = 0.0;
  Eigen::VectorXd resid(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    loss += y ? softplus(-z(i)) : softplus(z(i));
    resid(i) = 1.0 / (1.0 + std::exp(-z(i))) - y;
  }
  if (grad) *grad = x.transpose() * resid / n;
  return loss / n;
}

CalibrationFit fit_calibration(std::span<const double> scores, std::span<const int> labels,
                               const Eigen::MatrixXd& quality) {
  check_binary_labels(labels, scores.size());
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw NumericError("calibration needs both target and nontarget labels");
  if (quality.cols() > 0 && quality.rows() != static_cast<Eigen::Index>(scores.size()))
    throw FormatError("quality rows do not match the number of scores");

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(quality.cols() + 2);
  Eigen::VectorXd grad;
  double loss = calibration_objective(theta, scores, labels, quality, &grad);
  double step = 1.0;
  CalibrationFit fit;
  for (fit.iterations = 0; fit.iterations < kCalibrationMaxIterations; ++fit.iterations) {
    if (grad.lpNorm<Eigen::Infinity>() < kCalibrationTolerance) {
      fit.converged = true;
      break;
    }
    const double g2 = grad.squaredNorm();
    bool accepted = false;
    while (step > 1e-20) {
      Eigen::VectorXd cand = theta - step * grad;
      Eigen::VectorXd cand_grad;
      const double cand_loss = calibration_objective(cand, scores, labels, quality, &cand_grad);
      if (cand_loss <= loss - 1e-4 * step * g2) {
        theta = std::move(cand);
        grad = std::move(cand_grad);
        loss = cand_loss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step = std::min(step * 2.0, 1e8);
  }
  fit.loss = loss;
  fit.model.a = theta(0);
  fit.model.b.assign(theta.data() + 1, theta.data() + 1 + quality.cols());
  fit.model.c = theta(theta.size() - 1);
  return fit;
}

std::vector<double> apply_calibration(const CalibrationModel& model,
                                      std::span<const double> scores,
                                      const Eigen::MatrixXd& quality) {
  if (static_cast<std::size_t>(quality.cols()) != model.arity())
    throw FormatError("calibration model expects " + std::to_string(model.arity()) +
                      " quality features, got " + std::to_string(quality.cols()));
  if (model.arity() > 0 && quality.rows() != static_cast<Eigen::Index>(scores.size()))
    throw FormatError("quality rows do not match the number of scores");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double v = model.a * scores[i] + model.c;
    for (std::size_t j = 0; j < model.arity(); ++j)
      v += model.b[j] * quality(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    out[i] = v;
  }
  return out;
}

ScoreSet apply_calibration(const CalibrationModel& model, const ScoreSet& scores,
                           const Eigen::MatrixXd& quality) {
  ScoreSet out = scores;
  out.scores = apply_calibration(model, scores.scores, quality);
  return out;
}

ScoreSet ensemble(std::span<const ScoreSet> systems, std::span<const double> weights) {
  if (systems.empty()) throw ConfigError("ensemble needs at least one score set");
  if (weights.size() != systems.size())
    throw ConfigError("ensemble: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(systems.size()) + " score sets");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("ensemble weights must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("ensemble weights must not all be zero");
  const ScoreSet& first = systems[0];
  for (std::size_t k = 1; k < systems.size(); ++k) {
    if (systems[k].size() != first.size())
      throw FormatError("trial-list mismatch: score set " + std::to_string(k + 1) +
                        " has a different number of trials");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (systems[k].trials[i].enroll != first.trials[i].enroll ||
          systems[k].trials[i].test != first.trials[i].test)
        throw FormatError("trial-list mismatch at row " + std::to_string(i + 1) +
                          " of score set " + std::to_string(k + 1));
  }
  ScoreSet out = first;
  for (std::size_t i = 0; i < first.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < systems.size(); ++k)
      acc += (weights[k] / total) * systems[k].scores[i];
    out.scores[i] = acc;
  }
  return out;
}

std::vector<double> weights_from_eers(std::span<const double> eers) {
  std::vector<double> w;
  for (double e : eers) {
    if (!(e >= 0.0)) throw NumericError("EER must be non-negative");
    w.push_back(1.0 / std::max(e, 1e-6));
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

EerResult compute_eer(std::span<const double> scores, std::span<const int> labels) {
  check_binary_labels(labels, scores.size());
  std::vector<std::pair<double, int>> s;
  s.reserve(scores.size());
  double n_tgt = 0, n_non = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("non-finite score");
    s.emplace_back(scores[i], labels[i]);
    (labels[i] ? n_tgt : n_non) += 1;
  }
  if (n_tgt == 0 || n_non == 0)
    throw NumericError("EER needs at least one target and one nontarget trial");
  std::sort(s.begin(), s.end());

  // Operating points: below everything, between distinct scores, above everything.
  std::vector<double> thr, miss, fa;
  thr.push_back(s.front().first);
  miss.push_back(0.0);
  fa.push_back(1.0);
  double tgt_below = 0, non_below = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j].first == s[i].first) {
      (s[j].second ? tgt_below : non_below) += 1;
      ++j;
    }
    thr.push_back(j < s.size() ? 0.5 * (s[i].first + s[j].first)
                               : std::nextafter(s[i].first, std::numeric_limits<double>::infinity()));
    miss.push_back(tgt_below / n_tgt);
    fa.push_back((n_non - non_below) / n_non);
    i = j;
  }
  for (std::size_t i = 1; i < thr.size(); ++i) {
    const double d = miss[i] - fa[i];
    if (d < 0.0) continue;
    if (d == 0.0) return {miss[i], thr[i]};
    const double d0 = miss[i - 1] - fa[i - 1];
    const double lambda = -d0 / (d - d0);
    return {miss[i - 1] + lambda * (miss[i] - miss[i - 1]),
            thr[i - 1] + lambda * (thr[i] - thr[i - 1])};
  }
  return {miss.back(), thr.back()};  // unreachable: the last point has d = 1
}

EerResult compute_eer(const ScoreSet& s) {
  const auto labels = s.labels();
  return compute_eer(s.scores, labels);
}

}  // namespace svtk

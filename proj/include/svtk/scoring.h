// svtk/scoring.h

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

// Trial scoring: cosine similarity, adaptive s-norm against a speaker-mean
// imposter cohort, quality-aware logistic calibration, weighted ensembles and
// equal error rate.

#ifndef SVTK_SCORING_H_
#define SVTK_SCORING_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svtk/random.h"
#include "svtk/upstream.h"

namespace svtk {

struct Trial {
  std::optional<int> label;  // 1 = target, 0 = nontarget
  std::string enroll;
  std::string test;

  bool operator==(const Trial&) const = default;
};

using TrialList = std::vector<Trial>;

/// "label enroll test" (VoxCeleb convention) or "enroll test", one per line.
TrialList read_trials(const std::filesystem::path& path);
void write_trials(const std::filesystem::path& path, const TrialList& trials);

struct ScoreSet {
  TrialList trials;
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
  /// Labels of every trial; throws NumericError if any is missing.
  std::vector<int> labels() const;
};

/// "enroll test score" with 6-decimal scores.
std::string format_scores(const ScoreSet& s);
void write_scores(const std::filesystem::path& path, const ScoreSet& s);
ScoreSet read_scores(const std::filesystem::path& path);
/// Copies labels from a trial list with the same (enroll, test) sequence.
void attach_labels(ScoreSet& s, const TrialList& trials);

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(Eigen::Index dim) : dim_(dim) {}

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  void add(const std::string& id, Eigen::RowVectorXd embedding);
  const Eigen::RowVectorXd* find(const std::string& id) const;
  /// Throws FormatError naming the id when absent.
  const Eigen::RowVectorXd& at(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  Eigen::Index dim_ = 0;
  std::vector<std::string> ids_;
  std::map<std::string, Eigen::RowVectorXd> values_;
};

/// SVEB: "SVEB", u32 version=1, u32 dim, u32 count, then per record u16 id
/// length, UTF-8 id, dim f32 values. All LE.
std::string encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(const std::string& bytes);
void save_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore load_store(const std::filesystem::path& path);

/// dot(a, b) / (|a| |b|). Throws NumericError on a zero-norm argument.
double cosine_score(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

ScoreSet score_trials(const TrialList& trials, const EmbeddingStore& store);

inline constexpr std::size_t kDefaultCohortTopK = 600;

struct Cohort {
  std::vector<std::string> speakers;
  std::vector<Eigen::RowVectorXd> members;  // unit norm
  std::size_t top_k = kDefaultCohortTopK;

  std::size_t size() const { return members.size(); }
};

/// One unit-normalized mean embedding per speaker in the manifest.
/// top_k is clamped to the member count.
Cohort build_cohort(const EmbeddingStore& store, const Manifest& manifest,
                    std::size_t top_k = kDefaultCohortTopK);

struct CohortStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

/// Statistics of the top_k highest cosine scores between e and the cohort.
CohortStats cohort_stats(const Eigen::RowVectorXd& e, const Cohort& cohort);

/// s' = ((s - mu_e) / sigma_e + (s - mu_t) / sigma_t) / 2.
ScoreSet adaptive_snorm(const ScoreSet& raw, const EmbeddingStore& store,
                        const Cohort& cohort);

/// n labeled trials, half targets (rounded down) and the rest nontargets,
/// with no self pairs, in a seeded random order.
TrialList generate_calibration_trials(const Manifest& manifest, std::size_t n, Rng& rng);

/// [log(min(d_e, d_t)), log(d_e) + log(d_t)] for durations in seconds.
std::vector<double> quality_features(double enroll_seconds, double test_seconds);

/// Quality rows for every trial, looking durations up by utterance id.
Eigen::MatrixXd quality_matrix(const TrialList& trials,
                               const std::map<std::string, double>& durations);

struct CalibrationModel {
  double a = 1.0;
  std::vector<double> b;
  double c = 0.0;

  std::size_t arity() const { return b.size(); }
};

struct CalibrationFit {
  CalibrationModel model;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Mean binary cross-entropy of labels against a*s + b.q + c, and its
/// gradient with respect to theta = [a, b..., c].
double calibration_objective(const Eigen::VectorXd& theta, std::span<const double> scores,
                             std::span<const int> labels, const Eigen::MatrixXd& quality,
                             Eigen::VectorXd* grad);

inline constexpr double kCalibrationTolerance = 1e-8;
inline constexpr int kCalibrationMaxIterations = 10000;

/// Logistic regression of label on [score, quality...] by gradient descent
/// with backtracking line search. quality may have zero columns.
CalibrationFit fit_calibration(std::span<const double> scores, std::span<const int> labels,
                               const Eigen::MatrixXd& quality);

/// a*s + sum_i b_i q_i + c, in the log-odds domain.
std::vector<double> apply_calibration(const CalibrationModel& model,
                                      std::span<const double> scores,
                                      const Eigen::MatrixXd& quality);
ScoreSet apply_calibration(const CalibrationModel& model, const ScoreSet& scores,
                           const Eigen::MatrixXd& quality);

/// Per-trial weighted mean; weights are renormalized to sum to one.
ScoreSet ensemble(std::span<const ScoreSet> systems, std::span<const double> weights);

/// Weights proportional to 1 / EER on held-out trials.
std::vector<double> weights_from_eers(std::span<const double> eers);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Threshold sweep: miss(t) = share of targets < t, fa(t) = share of
/// nontargets >= t, evaluated below the lowest score, at midpoints between
/// consecutive distinct scores and above the highest. The EER is the
/// crossing of miss and fa, linearly interpolated between adjacent points.
EerResult compute_eer(std::span<const double> scores, std::span<const int> labels);
EerResult compute_eer(const ScoreSet& s);

}  // namespace svtk

#endif  // SVTK_SCORING_H_

// svtk/tests/test_scoring.cc

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
#include <fstream>
#include <numeric>
#include <set>

#include "doctest.h"
#include "svtk/error.h"
#include "oracles.h"
#include "testing.h"

namespace svtk {
namespace {

using Eigen::RowVectorXd;

RowVectorXd row(std::initializer_list<double> v) {
  RowVectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

RowVectorXd random_row(Rng& rng, Eigen::Index n) { return testing::random_matrix(rng, 1, n).row(0); }

ScoreSet labeled(const std::vector<double>& scores, const std::vector<int>& labels) {
  ScoreSet s;
  for (std::size_t i = 0; i < scores.size(); ++i)
    s.trials.push_back({labels[i], "e" + std::to_string(i), "t" + std::to_string(i)});
  s.scores = scores;
  return s;
}

TEST_CASE("cosine_score") {
  const RowVectorXd e = row({0.3, -1.2, 2.0});
  CHECK(cosine_score(e, 2.0 * e) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_score(row({1, 0}), row({0, 3})) == 0.0);
  CHECK(cosine_score(e, -e) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(cosine_score(e, RowVectorXd::Zero(3)), NumericError);
  CHECK_THROWS_AS(cosine_score(e, row({1, 2})), NumericError);
  Rng rng(1);
  std::uniform_real_distribution<double> k(1e-3, 1e3);
  for (int i = 0; i < 100; ++i) {
    const RowVectorXd a = random_row(rng, 8), b = random_row(rng, 8);
    const double s = cosine_score(a, b);
    CHECK(std::abs(cosine_score(k(rng) * a, b) - s) < 1e-12);
    CHECK(std::abs(cosine_score(a, k(rng) * b) - s) < 1e-12);
    CHECK(std::abs(s) <= 1.0);
  }
}

TEST_CASE("trial and score files") {
  const auto dir = testing::temp_dir("scoring-files");
  {
    std::ofstream(dir / "t.txt") << "1 a b\n0 a c\n\n1 d e\n";
    std::ofstream(dir / "u.txt") << "a b\na c\n";
    std::ofstream(dir / "mixed.txt") << "1 a b\na c\n";
    std::ofstream(dir / "bad.txt") << "2 a b\n";
  }
  const TrialList t = read_trials(dir / "t.txt");
  REQUIRE(t.size() == 3);
  CHECK(t[1] == Trial{0, "a", "c"});
  const TrialList u = read_trials(dir / "u.txt");
  CHECK_FALSE(u[0].label.has_value());
  CHECK_THROWS_AS(read_trials(dir / "mixed.txt"), FormatError);
  CHECK_THROWS_AS(read_trials(dir / "bad.txt"), FormatError);
  CHECK_THROWS_AS(read_trials(dir / "missing.txt"), FormatError);
  write_trials(dir / "t2.txt", t);
  CHECK(read_trials(dir / "t2.txt") == t);

  ScoreSet s;
  s.trials = t;
  s.scores = {0.5, -0.25, 0.1234567};
  CHECK(format_scores(s) == "a b 0.500000\na c -0.250000\nd e 0.123457\n");
  write_scores(dir / "s.txt", s);
  ScoreSet back = read_scores(dir / "s.txt");
  CHECK_THROWS_AS(back.labels(), NumericError);
  attach_labels(back, t);
  CHECK(back.labels() == std::vector<int>{1, 0, 1});
  TrialList other = t;
  std::swap(other[0], other[1]);
  CHECK_THROWS_AS(attach_labels(back, other), FormatError);
}

TEST_CASE("embedding store and SVEB") {
  EmbeddingStore store(3);
  store.add("utt-a", row({1, 2, 3}));
  store.add("utt-b", row({0.5, -0.25, 1e-3}));
  CHECK_THROWS_AS(store.add("utt-a", row({1, 1, 1})), FormatError);
  CHECK_THROWS_AS(store.add("utt-c", row({1, 1})), FormatError);
  CHECK_THROWS_WITH_AS(store.at("nope"), "no embedding for id nope", FormatError);

  const std::string bytes = encode_store(store);
  CHECK(bytes.substr(0, 4) == "SVEB");
  CHECK(bytes.size() == 16 + (2 + 5 + 12) * 2);
  const EmbeddingStore back = decode_store(bytes);
  CHECK(back.ids() == store.ids());
  CHECK(back.at("utt-a") == row({1, 2, 3}));
  CHECK(encode_store(back) == bytes);

  CHECK_THROWS_WITH_AS(decode_store("XXXX" + bytes.substr(4)), "bad magic", FormatError);
  CHECK_THROWS_AS(decode_store(bytes.substr(0, bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(decode_store(bytes + "x"), FormatError);
  std::string v2 = bytes;
  v2[4] = 2;
  CHECK_THROWS_AS(decode_store(v2), FormatError);

  const auto dir = testing::temp_dir("scoring-sveb");
  save_store(dir / "e.sveb", store);
  CHECK(encode_store(load_store(dir / "e.sveb")) == bytes);
}

Manifest manifest_of(const std::vector<std::pair<std::string, std::string>>& rows) {
  Manifest m;
  for (const auto& [utt, spk] : rows) m.rows.push_back({utt, spk, utt + ".wav"});
  return m;
}

TEST_CASE("build_cohort") {
  EmbeddingStore store(2);
  store.add("a1", row({3, 4}));
  store.add("b1", row({1, 1}));
  store.add("b2", row({1, 1}));
  const Cohort c = build_cohort(store, manifest_of({{"a1", "A"}, {"b1", "B"}, {"b2", "B"}}), 600);
  REQUIRE(c.size() == 2);
  CHECK(c.top_k == 2);
  CHECK((c.members[0] - row({0.6, 0.8})).norm() < 1e-15);
  CHECK((c.members[1] - row({1, 1}) / std::sqrt(2.0)).norm() < 1e-15);

  CHECK_THROWS_AS(build_cohort(store, manifest_of({{"a1", "A"}, {"zz", "C"}}), 600), NumericError);
  CHECK_THROWS_AS(build_cohort(EmbeddingStore(2), manifest_of({{"a1", "A"}}), 600), NumericError);
  CHECK_THROWS_AS(build_cohort(store, manifest_of({{"b1", "B"}, {"b2", "B"}}), 600), NumericError);
}

TEST_CASE("adaptive s-norm worked example") {
  const double delta = 0.05;
  Cohort cohort;
  cohort.speakers = {"A", "B"};
  cohort.members = {row({1, 0, 0}), row({0, 1, 0})};
  cohort.top_k = 2;
  EmbeddingStore store(3);
  const RowVectorXd e = row({0.0, 0.4, std::sqrt(1 - 0.16)});
  const RowVectorXd t = row({0.2, 0.2 + delta, std::sqrt(1 - 0.04 - (0.2 + delta) * (0.2 + delta))});
  store.add("e", e);
  store.add("t", t);
  ScoreSet raw;
  raw.trials = {{1, "e", "t"}};
  raw.scores = {cosine_score(e, t)};
  const double s = raw.scores[0];
  // Enroll side: mean 0.2, std 0.2; test side: mean 0.2 + delta/2, std delta/2.
  const double expect = ((s - 0.2) / 0.2 + (s - 0.2 - delta / 2) / (delta / 2)) / 2;
  CHECK(adaptive_snorm(raw, store, cohort).scores[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(adaptive_snorm(raw, store, cohort).scores[0] - oracle::snorm(e, t, cohort.members, 2)) < 1e-9);
}

TEST_CASE("adaptive s-norm centering and degenerate cohorts") {
  // The raw score sits at the cohort mean on both sides.
  Cohort cohort;
  cohort.members = {row({1, 0, 0}), row({0, 1, 0})};
  cohort.speakers = {"A", "B"};
  cohort.top_k = 2;
  EmbeddingStore store(3);
  store.add("e", row({1, 1, 0}));
  store.add("t", row({1, 1, 0}) * 3.0);
  ScoreSet raw;
  raw.trials = {{std::nullopt, "e", "t"}};
  raw.scores = {std::sqrt(0.5)};
  // Cohort scores are {0.7071, 0.7071}: zero spread.
  CHECK_THROWS_WITH_AS(adaptive_snorm(raw, store, cohort), doctest::Contains("e t"), NumericError);

  EmbeddingStore st2(3);
  st2.add("e", row({1, 0.5, 0}));
  st2.add("t", row({0.5, 1, 0}));
  const double mid = 0.5 * (cosine_score(row({1, 0.5, 0}), row({1, 0, 0})) +
                            cosine_score(row({1, 0.5, 0}), row({0, 1, 0})));
  raw.trials = {{std::nullopt, "e", "t"}};
  raw.scores = {mid};
  CHECK(std::abs(adaptive_snorm(raw, st2, cohort).scores[0]) < 1e-12);

  Cohort same = cohort;
  same.members = {row({0, 0, 1}), row({0, 0, 1})};
  raw.scores = {0.3};
  CHECK_THROWS_AS(adaptive_snorm(raw, st2, same), NumericError);
  Cohort big = cohort;
  big.top_k = 3;
  CHECK_THROWS_AS(adaptive_snorm(raw, st2, big), ConfigError);
}

TEST_CASE("adaptive s-norm matches the direct formula on random cohorts") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 10);
    Cohort c;
    for (std::size_t i = 0; i < n; ++i) {
      c.members.push_back(random_row(rng, 5).normalized());
      c.speakers.push_back("s" + std::to_string(i));
    }
    c.top_k = 2 + uniform_index(rng, n - 1);
    EmbeddingStore store(5);
    const RowVectorXd e = random_row(rng, 5), t = random_row(rng, 5);
    store.add("e", e);
    store.add("t", t);
    ScoreSet raw;
    raw.trials = {{std::nullopt, "e", "t"}};
    raw.scores = {cosine_score(e, t)};
    const double want = oracle::snorm(e, t, c.members, c.top_k);
    CHECK(std::abs(adaptive_snorm(raw, store, c).scores[0] - want) < 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("cohort_stats uses the highest scores") {
  Cohort c;
  c.members = {row({1, 0}), row({0, 1}), row({-1, 0})};
  c.speakers = {"a", "b", "c"};
  c.top_k = 2;
  const CohortStats s = cohort_stats(row({1, 0}), c);
  CHECK(s.mean == doctest::Approx(0.5));
  CHECK(s.stddev == doctest::Approx(0.5));
}

TEST_CASE("calibration trials") {
  const Manifest two = manifest_of({{"a1", "A"}, {"a2", "A"}, {"b1", "B"}, {"b2", "B"}});
  Rng rng(3);
  const TrialList t = generate_calibration_trials(two, 4, rng);
  REQUIRE(t.size() == 4);
  int targets = 0;
  for (const auto& x : t) {
    CHECK(x.enroll != x.test);
    const bool same = x.enroll[0] == x.test[0];
    CHECK(*x.label == (same ? 1 : 0));
    targets += *x.label;
  }
  CHECK(targets == 2);
  Rng r1(4), r2(4);
  CHECK(generate_calibration_trials(two, 50, r1) == generate_calibration_trials(two, 50, r2));
  const TrialList odd = generate_calibration_trials(two, 7, r1);
  CHECK(std::count_if(odd.begin(), odd.end(), [](const Trial& x) { return *x.label == 1; }) == 3);

  CHECK_THROWS_AS(generate_calibration_trials(manifest_of({{"a1", "A"}, {"b1", "B"}}), 4, rng),
                  NumericError);
  CHECK_THROWS_AS(generate_calibration_trials(manifest_of({{"a1", "A"}, {"a2", "A"}}), 4, rng),
                  NumericError);
}

TEST_CASE("quality features") {
  const auto q1 = quality_features(1.0, 1.0);
  CHECK(q1 == std::vector<double>{0.0, 0.0});
  const double e = std::exp(1.0);
  const auto q2 = quality_features(e, e * e);
  CHECK(q2[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(q2[1] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(quality_features(1.0, 0.0), NumericError);
  CHECK_THROWS_AS(quality_features(-1.0, 2.0), NumericError);
  const TrialList t = {{1, "x", "y"}};
  const Eigen::MatrixXd q = quality_matrix(t, {{"x", 2.0}, {"y", 4.0}});
  CHECK(q(0, 0) == doctest::Approx(std::log(2.0)));
  CHECK(q(0, 1) == doctest::Approx(std::log(8.0)));
  CHECK_THROWS_AS(quality_matrix(t, {{"x", 2.0}}), FormatError);
}

TEST_CASE("apply_calibration") {
  CalibrationModel id;
  const std::vector<double> s = {0.6, -0.3, 0.0};
  CHECK(apply_calibration(id, s, Eigen::MatrixXd(3, 0)) == s);
  CalibrationModel m{2.0, {}, -1.0};
  CHECK(apply_calibration(m, std::vector<double>{0.6}, Eigen::MatrixXd(1, 0))[0] == doctest::Approx(0.2));
  CalibrationModel q{1.0, {0.5, -1.0}, 0.0};
  Eigen::MatrixXd quality(1, 2);
  quality << 2.0, 1.0;
  CHECK(apply_calibration(q, std::vector<double>{1.0}, quality)[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(apply_calibration(q, std::vector<double>{1.0}, Eigen::MatrixXd(1, 1)), FormatError);

  // a > 0 with zero quality weights keeps the order and the EER.
  Rng rng(5);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    labels.push_back(i % 2);
    scores.push_back(uniform(rng, -1, 1) + 0.4 * (i % 2));
  }
  CalibrationModel pos{3.5, {0.0, 0.0}, -0.7};
  const auto cal = apply_calibration(pos, scores, testing::random_matrix(rng, 200, 2));
  std::vector<std::size_t> i1(200), i2(200);
  std::iota(i1.begin(), i1.end(), std::size_t{0});
  std::iota(i2.begin(), i2.end(), std::size_t{0});
  std::sort(i1.begin(), i1.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::sort(i2.begin(), i2.end(), [&](auto a, auto b) { return cal[a] < cal[b]; });
  CHECK(i1 == i2);
  CHECK(compute_eer(cal, labels).eer == compute_eer(scores, labels).eer);
}

// Newton's method on the same logistic objective, written independently.
Eigen::VectorXd newton_logistic(const std::vector<double>& s, const std::vector<int>& y,
                                const Eigen::MatrixXd& q) {
  const Eigen::Index n = static_cast<Eigen::Index>(s.size()), d = q.cols() + 2;
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = s[static_cast<std::size_t>(i)];
    x.row(i).segment(1, q.cols()) = q.row(i);
    x(i, d - 1) = 1.0;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(w)));
      g += (p - y[static_cast<std::size_t>(i)]) * x.row(i).transpose();
      h += p * (1 - p) * x.row(i).transpose() * x.row(i);
    }
    w -= h.ldlt().solve(g);
  }
  return w;
}

double bce(const std::vector<double>& logits, const std::vector<int>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = y[i] ? -logits[i] : logits[i];
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(y.size());
}

TEST_CASE("fit_calibration") {
  SUBCASE("separable scores") {
    const std::vector<double> s = {0.9, 0.8, 0.7, 0.1, 0.2, 0.3};
    const std::vector<int> y = {1, 1, 1, 0, 0, 0};
    const CalibrationFit fit = fit_calibration(s, y, Eigen::MatrixXd(6, 0));
    CHECK(fit.model.a > 0.0);
    const double loss = bce(apply_calibration(fit.model, s, Eigen::MatrixXd(6, 0)), y);
    CHECK(loss < 1e-2);
    CHECK(fit.loss == doctest::Approx(loss).epsilon(1e-9));
  }
  SUBCASE("overlapping scores match Newton's method") {
    Rng rng(6);
    std::vector<double> s;
    std::vector<int> y;
    Eigen::MatrixXd q(300, 2);
    for (int i = 0; i < 300; ++i) {
      y.push_back(i % 2);
      s.push_back(uniform(rng, -1, 1) + 0.5 * (i % 2));
      q(i, 0) = uniform(rng, 0, 1);
      q(i, 1) = uniform(rng, 0, 2) + 0.3 * (i % 2);
    }
    const CalibrationFit fit = fit_calibration(s, y, q);
    CHECK(fit.converged);
    const Eigen::VectorXd w = newton_logistic(s, y, q);
    CHECK(fit.model.a == doctest::Approx(w(0)).epsilon(1e-5));
    CHECK(fit.model.b[0] == doctest::Approx(w(1)).epsilon(1e-5));
    CHECK(fit.model.b[1] == doctest::Approx(w(2)).epsilon(1e-5));
    CHECK(fit.model.c == doctest::Approx(w(3)).epsilon(1e-5));
  }
  SUBCASE("labels independent of scores") {
    Rng rng(7);
    auto make = [&](int n, std::vector<double>& s, std::vector<int>& y, Eigen::MatrixXd& q) {
      std::normal_distribution<double> normal;
      q.resize(n, 2);
      for (int i = 0; i < n; ++i) {
        s.push_back(normal(rng));
        y.push_back(uniform01(rng) < 0.5 ? 1 : 0);
        const auto f = quality_features(uniform(rng, 1, 8), uniform(rng, 1, 8));
        q(i, 0) = f[0];
        q(i, 1) = f[1];
      }
    };
    std::vector<double> s, sh;
    std::vector<int> y, yh;
    Eigen::MatrixXd q, qh;
    make(4000, s, y, q);
    make(20000, sh, yh, qh);
    const CalibrationFit fit = fit_calibration(s, y, q);
    CHECK(std::abs(fit.model.a) < 0.1);
    const double raw = compute_eer(sh, yh).eer;
    const double cal = compute_eer(apply_calibration(fit.model, sh, qh), yh).eer;
    CHECK(std::abs(raw - cal) < 0.02);
  }
  SUBCASE("degenerate labels") {
    const std::vector<double> s = {0.1, 0.2};
    const std::vector<int> ones = {1, 1};
    CHECK_THROWS_AS(fit_calibration(s, ones, Eigen::MatrixXd(2, 0)), NumericError);
  }
}

TEST_CASE("ensemble") {
  const ScoreSet a = labeled({1.0, 0.2, -0.5}, {1, 0, 0});
  const ScoreSet b = labeled({0.0, 0.4, 0.5}, {1, 0, 0});
  const ScoreSet one[] = {a};
  CHECK(ensemble(one, std::vector<double>{7.0}).scores == a.scores);
  const ScoreSet same[] = {a, a};
  const auto twice = ensemble(same, std::vector<double>{0.3, 0.9}).scores;
  for (std::size_t i = 0; i < 3; ++i) CHECK(twice[i] == doctest::Approx(a.scores[i]).epsilon(1e-15));
  const ScoreSet ab[] = {a, b};
  CHECK(ensemble(ab, std::vector<double>{3, 1}).scores[0] == doctest::Approx(0.75));
  CHECK(ensemble(ab, std::vector<double>{1, 0}).scores == a.scores);
  CHECK_THROWS_AS(ensemble(ab, std::vector<double>{0, 0}), ConfigError);
  CHECK_THROWS_AS(ensemble(ab, std::vector<double>{-1, 2}), ConfigError);
  CHECK_THROWS_AS(ensemble(ab, std::vector<double>{1}), ConfigError);
  ScoreSet c = b;
  c.trials[1].test = "other";
  const ScoreSet ac[] = {a, c};
  CHECK_THROWS_WITH_AS(ensemble(ac, std::vector<double>{1, 1}), doctest::Contains("trial-list mismatch"),
                       FormatError);

  const auto w = weights_from_eers(std::vector<double>{0.01, 0.02, 0.04});
  CHECK(w[0] == doctest::Approx(4.0 / 7.0));
  CHECK(w[2] == doctest::Approx(1.0 / 7.0));
  const auto z = weights_from_eers(std::vector<double>{0.0, 0.5});
  CHECK(z[0] > 0.99);
}

TEST_CASE("EER examples") {
  CHECK(compute_eer(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}).eer == 0.0);
  CHECK(compute_eer(std::vector<double>{0.2, 0.8}, std::vector<int>{1, 0}).eer == 1.0);
  CHECK(compute_eer(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}).eer == doctest::Approx(0.5));
  CHECK_THROWS_AS(compute_eer(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), NumericError);
  CHECK(compute_eer(labeled({0.9, 0.1}, {1, 0})).eer == 0.0);
  const EerResult r = compute_eer(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0});
  CHECK(r.threshold > 0.2);
  CHECK(r.threshold <= 0.8);
}

TEST_CASE("EER matches a brute-force sweep and is rank invariant") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 49);
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      y.push_back(uniform01(rng) < 0.5 ? 1 : 0);
      // Integer grid so that ties occur and stay exact under the maps below.
      s.push_back(std::round(uniform(rng, -10, 10)) + 3.0 * y.back());
    }
    y[0] = 1;
    y[1] = 0;
    const double eer = compute_eer(s, y).eer;
    CHECK(std::abs(eer - oracle::brute_force_eer(s, y)) < 1e-9);
    CHECK(eer >= 0.0);
    CHECK(eer <= 1.0);

    const double a = uniform(rng, 0.1, 5), b = uniform(rng, -2, 2);
    std::vector<double> m1, m2;
    for (double x : s) {
      m1.push_back(std::exp(a * x / 10) + b);
      m2.push_back(std::cbrt(x) * a);
    }
    CHECK(std::abs(compute_eer(m1, y).eer - eer) < 1e-12);
    CHECK(std::abs(compute_eer(m2, y).eer - eer) < 1e-12);
  }
}

}  // namespace
}  // namespace svtk

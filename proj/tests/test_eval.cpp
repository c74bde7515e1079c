// Copyright 2026 The earlydrop Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <mutex>
#include <random>
#include <set>

#include "test_support.hpp"

namespace earlydrop {
namespace {

using testing_support::make_matrix;

FeatureMatrix with_counts(std::size_t n0, std::size_t n1) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    x.push_back({static_cast<double>(i) + (i < n0 ? 0.0 : 1000.0)});  // wide gap between the classes
    y.push_back(i < n0 ? 0 : 1);
  }
  return make_matrix(x, y);
}

FeatureMatrix noisy(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 gen(seed);
  std::vector<std::vector<double>> x(n, std::vector<double>(2));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = {static_cast<double>(gen() % 100), static_cast<double>(gen() % 100)};
    y[i] = x[i][0] + static_cast<double>(gen() % 60) > 80.0 ? 1 : 0;
  }
  return make_matrix(x, y);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kDomain;
}

LearnerConfig quick(LearnerKind kind, std::size_t trees = 10) {
  auto l = LearnerConfig::defaults(kind);
  l.params.n_trees = trees;
  return l;
}

// ---- oversample ----

TEST(Oversample, TenToThree) {
  const auto m = with_counts(10, 3);
  const auto o = oversample(m, 5);
  EXPECT_EQ(o.count_label(0), 10u);
  EXPECT_EQ(o.count_label(1), 10u);
  // the first 13 rows are the originals in order; the 7 extras copy minority rows
  for (std::size_t r = 0; r < 13; ++r) EXPECT_EQ(o.keys()[r], m.keys()[r]);
  std::set<std::string> minority;
  for (std::size_t r = 10; r < 13; ++r) minority.insert(m.keys()[r].learner_id);
  for (std::size_t r = 13; r < 20; ++r) {
    EXPECT_EQ(o.labels()[r], 1);
    EXPECT_TRUE(minority.count(o.keys()[r].learner_id));
  }
}

TEST(Oversample, BalancedInputUnchanged) {
  const auto m = with_counts(6, 6);
  EXPECT_EQ(oversample(m, 1), m);
}

TEST(Oversample, LargeImbalancedCountsBalance) {
  std::vector<int> labels(94112, 0);
  labels.insert(labels.end(), 16092, 1);
  std::vector<std::size_t> rows(labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto idx = oversample_indices(labels, rows, 3);
  std::size_t ones = 0;
  for (auto i : idx) ones += static_cast<std::size_t>(labels[i]);
  EXPECT_EQ(ones, 94112u);
  EXPECT_EQ(idx.size() - ones, 94112u);
}

TEST(Oversample, SingleClassIsBalancingError) {
  EXPECT_EQ(kind_of([] { oversample(with_counts(5, 0), 0); }), ErrorKind::kBalancing);
}

TEST(Oversample, KeepsEveryDistinctMinorityRow) {
  const auto m = with_counts(50, 7);
  const auto o = oversample(m, 11);
  std::set<std::string> before, after;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.labels()[r] == 1) before.insert(m.keys()[r].learner_id);
  }
  for (std::size_t r = 0; r < o.rows(); ++r) {
    if (o.labels()[r] == 1) after.insert(o.keys()[r].learner_id);
  }
  EXPECT_EQ(before, after);
}

// ---- stratified split ----

TEST(StratifiedSplit, PerClassRounding) {
  const auto m = with_counts(80, 20);
  const auto [train, test] = stratified_split(m, 0.3, 1);
  // round(80 * 0.3) = 24, round(20 * 0.3) = 6
  EXPECT_EQ(test.count_label(0), 24u);
  EXPECT_EQ(test.count_label(1), 6u);
  EXPECT_EQ(train.rows(), 70u);
}

TEST(StratifiedSplit, PartitionAndDeterminism) {
  const auto m = with_counts(37, 23);
  const auto a = stratified_split_indices(m.labels(), 0.3, 8);
  const auto b = stratified_split_indices(m.labels(), 0.3, 8);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto i : a.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), m.rows());
  const auto c = stratified_split_indices(m.labels(), 0.3, 9);
  EXPECT_NE(a.test, c.test);
}

TEST(StratifiedSplit, SmallestCase) {
  const auto m = with_counts(2, 2);
  const auto [train, test] = stratified_split(m, 0.5, 0);
  EXPECT_EQ(train.count_label(0), 1u);
  EXPECT_EQ(train.count_label(1), 1u);
  EXPECT_EQ(test.count_label(0), 1u);
  EXPECT_EQ(test.count_label(1), 1u);
}

TEST(StratifiedSplit, Errors) {
  EXPECT_EQ(kind_of([] { stratified_split(with_counts(10, 1), 0.3, 0); }), ErrorKind::kSplit);
  EXPECT_EQ(kind_of([] { stratified_split(with_counts(10, 10), 0.0, 0); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { stratified_split(with_counts(10, 10), 1.0, 0); }), ErrorKind::kConfig);
}

// ---- k-fold ----

TEST(KFold, TwentyRowsTenFolds) {
  const auto m = with_counts(10, 10);
  const auto folds = kfold_indices(m.labels(), 10, 3);
  ASSERT_EQ(folds.size(), 10u);
  for (const auto& f : folds) {
    ASSERT_EQ(f.test.size(), 2u);
    EXPECT_NE(m.labels()[f.test[0]], m.labels()[f.test[1]]);
  }
}

TEST(KFold, ValidationFoldsPartitionTheRows) {
  const auto m = with_counts(61, 42);
  const auto folds = kfold_indices(m.labels(), 10, 4);
  std::vector<int> seen(m.rows(), 0);
  for (const auto& f : folds) {
    for (auto i : f.test) ++seen[i];
    std::set<std::size_t> tr(f.train.begin(), f.train.end());
    EXPECT_EQ(tr.size() + f.test.size(), m.rows());
    for (auto i : f.test) EXPECT_FALSE(tr.count(i));
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(KFold, SizesDifferByAtMostOne) {
  const auto m = with_counts(61, 42);
  const auto folds = kfold_indices(m.labels(), 10, 5);
  // 103 rows over 10 folds: only 10 and 11 can occur
  std::size_t total = 0;
  std::array<std::size_t, 2> lo{1000, 1000}, hi{0, 0};
  for (const auto& f : folds) {
    EXPECT_TRUE(f.test.size() == 10 || f.test.size() == 11) << f.test.size();
    total += f.test.size();
    std::array<std::size_t, 2> per{0, 0};
    for (auto i : f.test) ++per[static_cast<std::size_t>(m.labels()[i])];
    for (std::size_t c = 0; c < 2; ++c) {
      lo[c] = std::min(lo[c], per[c]);
      hi[c] = std::max(hi[c], per[c]);
    }
  }
  EXPECT_EQ(total, 103u);
  EXPECT_LE(hi[0] - lo[0], 1u);
  EXPECT_LE(hi[1] - lo[1], 1u);
}

TEST(KFold, TooFewRowsPerClass) {
  EXPECT_EQ(kind_of([] { kfold_indices(with_counts(20, 9).labels(), 10, 0); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { kfold_indices(with_counts(20, 20).labels(), 1, 0); }), ErrorKind::kConfig);
}

// ---- metrics ----

TEST(Metrics, WorkedExample) {
  ConfusionMatrix cm;
  cm.counts = {{{90, 10}, {5, 95}}};
  const auto m = compute_metrics(cm);
  EXPECT_DOUBLE_EQ(m.accuracy, 185.0 / 200.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.925);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 95.0 / 105.0);
  EXPECT_NEAR(m.per_class[1].precision, 0.9048, 5e-5);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 0.95);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 90.0 / 95.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.9);
  const double p = m.per_class[1].precision, r = m.per_class[1].recall;
  EXPECT_DOUBLE_EQ(m.per_class[1].f1, 2 * p * r / (p + r));
  EXPECT_FALSE(m.zero_denominator);
}

TEST(Metrics, PerfectDiagonal) {
  ConfusionMatrix cm;
  cm.counts = {{{7, 0}, {0, 4}}};
  const auto m = compute_metrics(cm);
  EXPECT_EQ(m.accuracy, 1.0);
  for (const auto& c : m.per_class) {
    EXPECT_EQ(c.precision, 1.0);
    EXPECT_EQ(c.recall, 1.0);
    EXPECT_EQ(c.f1, 1.0);
  }
}

TEST(Metrics, AllClassZeroExposesTheBias) {
  ConfusionMatrix cm;
  cm.counts = {{{50, 0}, {50, 0}}};
  const auto m = compute_metrics(cm);
  EXPECT_EQ(m.accuracy, 0.5);
  EXPECT_EQ(m.per_class[1].recall, 0.0);
  EXPECT_EQ(m.per_class[1].precision, 0.0);
  EXPECT_EQ(m.per_class[1].f1, 0.0);
  EXPECT_TRUE(m.zero_denominator);
}

TEST(Metrics, AccuracyIsPrevalenceWeightedRecall) {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 500; ++i) {
    ConfusionMatrix cm;
    for (auto& row : cm.counts) {
      for (auto& v : row) v = gen() % 50;
    }
    if (cm.counts[0][0] + cm.counts[0][1] == 0 || cm.counts[1][0] + cm.counts[1][1] == 0) continue;
    const auto m = compute_metrics(cm);
    const double n = static_cast<double>(cm.total());
    const double w0 = static_cast<double>(cm.counts[0][0] + cm.counts[0][1]) / n;
    EXPECT_NEAR(m.accuracy, w0 * m.per_class[0].recall + (1 - w0) * m.per_class[1].recall, 1e-12);
  }
}

// ---- repeated holdout ----

TEST(Holdout, OneRepeatHasZeroMargins) {
  EvalOptions o;
  o.repeats = 1;
  const auto r = repeated_holdout(noisy(1, 120), quick(LearnerKind::kAdaBoost), 2, o);
  EXPECT_EQ(r.repeats, 1u);
  EXPECT_EQ(r.accuracy.margin, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(r.precision[c].margin, 0.0);
    EXPECT_EQ(r.recall[c].margin, 0.0);
    EXPECT_EQ(r.f1[c].margin, 0.0);
  }
}

TEST(Holdout, ConstantMetricHasZeroMargin) {
  EvalOptions o;
  o.repeats = 8;
  const auto r = repeated_holdout(with_counts(30, 30), quick(LearnerKind::kAdaBoost), 0, o);
  EXPECT_EQ(r.accuracy.mean, 1.0);
  EXPECT_EQ(r.accuracy.margin, 0.0);
}

TEST(Holdout, MarginIsNormalHalfWidth) {
  EvalOptions o;
  o.repeats = 12;
  const auto r = repeated_holdout(noisy(2, 200), quick(LearnerKind::kGradientBoosting), 4, o);
  ASSERT_EQ(r.per_repeat.size(), 12u);
  double mean = 0.0;
  for (const auto& m : r.per_repeat) mean += m.accuracy;
  mean /= 12.0;
  double ss = 0.0;
  for (const auto& m : r.per_repeat) ss += (m.accuracy - mean) * (m.accuracy - mean);
  EXPECT_NEAR(r.accuracy.mean, mean, 1e-15);
  EXPECT_NEAR(r.accuracy.margin, 1.96 * std::sqrt(ss / 11.0) / std::sqrt(12.0), 1e-15);
  EXPECT_GT(r.accuracy.margin, 0.0);
}

TEST(Holdout, ReproducibleAcrossThreadCounts) {
  const auto m = noisy(3, 200);
  EvalOptions o;
  o.repeats = 6;
  o.threads = 1;
  for (auto kind : kAllLearners) {
    const auto a = repeated_holdout(m, quick(kind), 5, o);
    auto o4 = o;
    o4.threads = 4;
    const auto b = repeated_holdout(m, quick(kind), 5, o4);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump()) << to_string(kind);
  }
}

TEST(Holdout, DefaultCohortForestBenchmark) {
  SynthConfig c;
  c.seed = 23;
  const auto m = testing_support::synth_features(c, FeatureMode::kPerStep);
  EvalOptions o;
  o.repeats = 100;
  o.threads = default_threads();
  const auto r = repeated_holdout(m, LearnerConfig::defaults(LearnerKind::kRandomForest), 7, o);
  EXPECT_GE(r.accuracy.mean, 0.85);
  EXPECT_LE(r.accuracy.mean, 0.97);
  EXPECT_LE(r.accuracy.margin, 0.01);
}

TEST(Holdout, ZeroRepeatsIsConfigError) {
  EvalOptions o;
  o.repeats = 0;
  EXPECT_EQ(kind_of([&] { repeated_holdout(noisy(1, 50), quick(LearnerKind::kAdaBoost), 0, o); }), ErrorKind::kConfig);
}

TEST(Holdout, ErrorsNameTheRepeat) {
  EvalOptions o;
  o.repeats = 2;
  try {
    repeated_holdout(with_counts(30, 1), quick(LearnerKind::kAdaBoost), 0, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSplit);
  }
}

TEST(Holdout, OversamplingStaysOnTheTrainingSide) {
  const auto m = noisy(4, 150);
  std::mutex mu;
  std::size_t units = 0;
  EvalOptions o;
  o.repeats = 10;
  o.threads = 3;
  o.observer = [&](std::size_t, std::span<const std::size_t> train, std::span<const std::size_t> test) {
    std::set<std::size_t> tr(train.begin(), train.end()), te;
    std::lock_guard lock(mu);
    ++units;
    for (auto i : test) {
      EXPECT_TRUE(te.insert(i).second) << "duplicated test row";
      EXPECT_FALSE(tr.count(i)) << "test row also trained on";
    }
    std::array<std::size_t, 2> cls{0, 0};
    for (auto i : train) ++cls[static_cast<std::size_t>(m.labels()[i])];
    EXPECT_EQ(cls[0], cls[1]);
  };
  repeated_holdout(m, quick(LearnerKind::kRandomForest), 1, o);
  EXPECT_EQ(units, 10u);
}

TEST(Holdout, MarginsShrinkWithMoreRepeats) {
  const auto m = noisy(5, 160);
  const auto learner = quick(LearnerKind::kAdaBoost, 3);
  int holds = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EvalOptions a, b;
    a.repeats = 100;
    b.repeats = 400;
    a.threads = b.threads = default_threads();
    const double m100 = repeated_holdout(m, learner, seed, a).accuracy.margin;
    const double m400 = repeated_holdout(m, learner, seed + 1000, b).accuracy.margin;
    holds += m400 <= m100 ? 1 : 0;
  }
  EXPECT_GE(holds, 19);
}

// ---- cross-validation ----

TEST(CrossValidate, SeparableTwoFold) {
  const auto r = cross_validate(with_counts(20, 20), quick(LearnerKind::kAdaBoost), 2, 0);
  ASSERT_EQ(r.per_repeat.size(), 2u);
  for (const auto& m : r.per_repeat) EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(r.protocol, "cv");
}

TEST(CrossValidate, MeanEqualsManualFoldEvaluation) {
  const auto m = noisy(6, 180);
  const auto learner = quick(LearnerKind::kGradientBoosting);
  const std::uint64_t seed = 13;
  const auto r = cross_validate(m, learner, 5, seed);
  // redo every fold by hand with the same seed streams
  const auto folds = kfold_indices(m.labels(), 5, derive_seed(seed, 0));
  double acc = 0.0;
  for (std::size_t f = 0; f < 5; ++f) {
    const std::uint64_t s = derive_seed(seed, 1, f);
    const auto rows = oversample_indices(m.labels(), folds[f].train, derive_seed(s, 1));
    const auto model = train(learner.kind, m.select(rows), learner.params, derive_seed(s, 2));
    ConfusionMatrix cm;
    for (auto i : folds[f].test) cm.add(m.labels()[i], predict_class(model, m.row(i)));
    acc += compute_metrics(cm).accuracy;
  }
  EXPECT_NEAR(r.accuracy.mean, acc / 5.0, 1e-15);
}

TEST(CrossValidate, AgreesWithHoldoutOnDefaultCohort) {
  SynthConfig c;
  c.seed = 17;
  const auto m = testing_support::synth_features(c, FeatureMode::kPerStep);
  EvalOptions o;
  o.repeats = 10;
  o.threads = default_threads();
  const auto learner = LearnerConfig::defaults(LearnerKind::kRandomForest);
  const auto holdout = repeated_holdout(m, learner, 1, o);
  const auto cv = cross_validate(m, learner, 10, 1, o);
  EXPECT_NEAR(cv.accuracy.mean, holdout.accuracy.mean, 0.02);
}

// ---- reporting ----

TEST(Reporting, JsonRoundTripAndTable) {
  EvalOptions o;
  o.repeats = 4;
  o.course_id = "demo";
  std::vector<EvalReport> reports;
  for (auto kind : kAllLearners) reports.push_back(repeated_holdout(noisy(7, 120), quick(kind), 3, o));
  for (const auto& r : reports) {
    const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
    EXPECT_EQ(to_json(r).at("per_repeat").size(), 4u);
  }
  const auto table = render_table(reports);
  for (auto kind : kAllLearners) EXPECT_NE(table.find(display_name(kind)), std::string::npos);
  EXPECT_NE(table.find("Accuracy"), std::string::npos);
  EXPECT_NE(table.find("demo"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);
}

}  // namespace
}  // namespace earlydrop

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

#pragma once

// Evaluation protocols. Every protocol splits first and oversamples only the
// training side, so evaluated rows are always original, unduplicated rows.
// Row sets are passed around as indices into the caller's matrix.

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "ensembles.hpp"
#include "matrix.hpp"

namespace earlydrop {

// ------------------------------------------------------------
// metrics
// ------------------------------------------------------------

struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};  // [actual][predicted]

  void add(int actual, int predicted) { ++counts[static_cast<std::size_t>(actual)][static_cast<std::size_t>(predicted)]; }
  std::uint64_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  std::array<ClassMetrics, 2> per_class{};
  bool zero_denominator = false;  // some ratio had an empty denominator and was reported as 0
};

inline Metrics compute_metrics(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (total <= 0.0) throw Error(ErrorKind::kDomain, "confusion matrix is empty");
  Metrics m;
  m.accuracy = static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) / total;
  auto ratio = [&](double num, double den) {
    if (den <= 0.0) {
      m.zero_denominator = true;
      return 0.0;
    }
    return num / den;
  };
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t o = 1 - c;
    const double tp = static_cast<double>(cm.counts[c][c]);
    const double fp = static_cast<double>(cm.counts[o][c]);
    const double fn = static_cast<double>(cm.counts[c][o]);
    auto& k = m.per_class[c];
    k.precision = ratio(tp, tp + fp);
    k.recall = ratio(tp, tp + fn);
    k.f1 = k.precision + k.recall > 0.0 ? 2.0 * k.precision * k.recall / (k.precision + k.recall) : 0.0;
  }
  return m;
}

// ------------------------------------------------------------
// balancing and splitting
// ------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

inline std::array<std::vector<std::size_t>, 2> by_class(std::span<const int> labels,
                                                        std::span<const std::size_t> rows) {
  std::array<std::vector<std::size_t>, 2> out;
  for (std::size_t r : rows) out[static_cast<std::size_t>(labels[r])].push_back(r);
  return out;
}

}  // namespace detail

// `rows` followed by minority-class rows drawn with replacement until both
// classes have equal counts.
inline std::vector<std::size_t> oversample_indices(std::span<const int> labels, std::span<const std::size_t> rows,
                                                   std::uint64_t seed) {
  const auto classes = detail::by_class(labels, rows);
  if (classes[0].empty() || classes[1].empty()) {
    throw Error(ErrorKind::kBalancing, "oversampling needs both classes present");
  }
  std::vector<std::size_t> out(rows.begin(), rows.end());
  const std::size_t minority = classes[0].size() < classes[1].size() ? 0 : 1;
  const auto& pool = classes[minority];
  const std::size_t missing = classes[1 - minority].size() - pool.size();
  Rng rng(seed);
  for (std::size_t i = 0; i < missing; ++i) out.push_back(pool[rng.index(pool.size())]);
  return out;
}

inline FeatureMatrix oversample(const FeatureMatrix& m, std::uint64_t seed) {
  return m.select(oversample_indices(m.labels(), detail::all_rows(m.rows()), seed));
}

// Per class: shuffle, then the first round(count * test_fraction) rows go to
// the test side. Both sides come back sorted.
inline SplitIndices stratified_split_indices(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, "test_fraction must lie in (0, 1)");
  }
  auto classes = detail::by_class(labels, detail::all_rows(labels.size()));
  SplitIndices out;
  Rng rng(seed);
  for (std::size_t c = 0; c < 2; ++c) {
    auto& rows = classes[c];
    if (rows.size() < 2) throw Error(ErrorKind::kSplit, strprintf("class %zu has fewer than 2 rows", c));
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(rows.size()) * test_fraction));
    if (n_test == 0 || n_test >= rows.size()) {
      throw Error(ErrorKind::kSplit, strprintf("class %zu is too small for a %.2f test fraction", c, test_fraction));
    }
    rng.shuffle(rows);
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<FeatureMatrix, FeatureMatrix> stratified_split(const FeatureMatrix& m, double test_fraction,
                                                                std::uint64_t seed) {
  const auto idx = stratified_split_indices(m.labels(), test_fraction, seed);
  return {m.select(idx.train), m.select(idx.test)};
}

// Stratified folds. Each class is shuffled and dealt round-robin, the second
// class continuing where the first stopped, so fold sizes differ by at most
// one both per class and overall.
inline std::vector<SplitIndices> kfold_indices(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::kConfig, "k must be >= 2");
  auto classes = detail::by_class(labels, detail::all_rows(labels.size()));
  for (std::size_t c = 0; c < 2; ++c) {
    if (classes[c].size() < k) {
      throw Error(ErrorKind::kConfig, strprintf("class %zu has %zu rows, fewer than k = %zu", c, classes[c].size(), k));
    }
  }
  std::vector<std::vector<std::size_t>> folds(k);
  Rng rng(seed);
  std::size_t next = 0;
  for (auto& rows : classes) {
    rng.shuffle(rows);
    for (std::size_t r : rows) {
      folds[next].push_back(r);
      next = (next + 1) % k;
    }
  }
  std::vector<SplitIndices> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    out[f].test = folds[f];
    std::sort(out[f].test.begin(), out[f].test.end());
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) out[f].train.insert(out[f].train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

// ------------------------------------------------------------
// protocols
// ------------------------------------------------------------

struct LearnerConfig {
  LearnerKind kind = LearnerKind::kRandomForest;
  EnsembleParams params = EnsembleParams::defaults(LearnerKind::kRandomForest);

  static LearnerConfig defaults(LearnerKind kind) { return {kind, EnsembleParams::defaults(kind)}; }
};

// Sees the exact rows each unit trains on (oversampled, with repeats) and
// evaluates on. Called from worker threads.
using ProtocolObserver =
    std::function<void(std::size_t unit, std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows)>;

struct EvalOptions {
  std::size_t repeats = 100;
  double test_fraction = 0.3;
  std::size_t threads = 1;
  std::string course_id;
  ProtocolObserver observer;
};

struct Summary {
  double mean = 0.0;
  double margin = 0.0;  // 1.96 * sd / sqrt(units)
};

struct EvalReport {
  LearnerKind learner = LearnerKind::kRandomForest;
  std::string course_id;
  std::string protocol;  // "holdout" or "cv"
  std::size_t repeats = 0;
  double test_fraction = 0.0;  // holdout only
  Summary accuracy;
  std::array<Summary, 2> precision{};
  std::array<Summary, 2> recall{};
  std::array<Summary, 2> f1{};
  std::size_t zero_denominator_units = 0;
  std::vector<Metrics> per_repeat;
};

inline Summary summarize(std::span<const double> values) {
  Summary s;
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.margin = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return s;
}

namespace detail {

inline EvalReport aggregate(std::vector<Metrics> units, LearnerKind kind, std::string course_id,
                            std::string protocol) {
  EvalReport r;
  r.learner = kind;
  r.course_id = std::move(course_id);
  r.protocol = std::move(protocol);
  r.repeats = units.size();
  std::vector<double> v(units.size());
  auto pick = [&](auto get) {
    for (std::size_t i = 0; i < units.size(); ++i) v[i] = get(units[i]);
    return summarize(v);
  };
  r.accuracy = pick([](const Metrics& m) { return m.accuracy; });
  for (std::size_t c = 0; c < 2; ++c) {
    r.precision[c] = pick([c](const Metrics& m) { return m.per_class[c].precision; });
    r.recall[c] = pick([c](const Metrics& m) { return m.per_class[c].recall; });
    r.f1[c] = pick([c](const Metrics& m) { return m.per_class[c].f1; });
  }
  for (const auto& m : units) r.zero_denominator_units += m.zero_denominator ? 1 : 0;
  r.per_repeat = std::move(units);
  return r;
}

// Oversample the training rows, fit, score the untouched test rows.
inline Metrics run_unit(const FeatureMatrix& m, const LearnerConfig& learner, std::span<const std::size_t> train_rows,
                        std::span<const std::size_t> test_rows, std::uint64_t seed, std::size_t unit,
                        const ProtocolObserver& observer) {
  const auto balanced = oversample_indices(m.labels(), train_rows, derive_seed(seed, 1));
  if (observer) observer(unit, balanced, test_rows);
  EnsembleParams params = learner.params;
  params.threads = 1;
  const auto model = train(learner.kind, m.select(balanced), params, derive_seed(seed, 2));
  ConfusionMatrix cm;
  for (std::size_t r : test_rows) cm.add(m.labels()[r], predict_class(model, m.row(r)));
  return compute_metrics(cm);
}

template <typename Body>
std::vector<Metrics> run_units(std::size_t count, std::size_t threads, const char* what, Body&& body) {
  std::vector<Metrics> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    try {
      out[i] = body(i);
    } catch (const Error& e) {
      throw Error(e.kind(), strprintf("%s %zu: %s", what, i, e.what()));
    }
  });
  return out;
}

}  // namespace detail

// `repeats` independent stratified splits; each trains on the oversampled
// training side and is scored on its test side.
inline EvalReport repeated_holdout(const FeatureMatrix& m, const LearnerConfig& learner, std::uint64_t seed,
                                   const EvalOptions& options = {}) {
  if (options.repeats < 1) throw Error(ErrorKind::kConfig, "repeats must be >= 1");
  auto units = detail::run_units(options.repeats, options.threads, "repeat", [&](std::size_t r) {
    const std::uint64_t s = derive_seed(seed, r);
    const auto split = stratified_split_indices(m.labels(), options.test_fraction, derive_seed(s, 0));
    return detail::run_unit(m, learner, split.train, split.test, s, r, options.observer);
  });
  auto report = detail::aggregate(std::move(units), learner.kind, options.course_id, "holdout");
  report.test_fraction = options.test_fraction;
  return report;
}

inline EvalReport cross_validate(const FeatureMatrix& m, const LearnerConfig& learner, std::size_t k,
                                 std::uint64_t seed, const EvalOptions& options = {}) {
  const auto folds = kfold_indices(m.labels(), k, derive_seed(seed, 0));
  auto units = detail::run_units(k, options.threads, "fold", [&](std::size_t f) {
    return detail::run_unit(m, learner, folds[f].train, folds[f].test, derive_seed(seed, 1, f), f, options.observer);
  });
  return detail::aggregate(std::move(units), learner.kind, options.course_id, "cv");
}

// ------------------------------------------------------------
// reporting
// ------------------------------------------------------------

inline nlohmann::json to_json(const Summary& s) { return {{"mean", s.mean}, {"margin", s.margin}}; }

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j = {{"accuracy", m.accuracy}, {"zero_denominator", m.zero_denominator}};
  for (std::size_t c = 0; c < 2; ++c) {
    j["class_" + std::to_string(c)] = {{"precision", m.per_class[c].precision},
                                       {"recall", m.per_class[c].recall},
                                       {"f1", m.per_class[c].f1}};
  }
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json raw = nlohmann::json::array();
  for (const auto& m : r.per_repeat) raw.push_back(to_json(m));
  nlohmann::json j = {{"learner", to_string(r.learner)},
                      {"learner_name", display_name(r.learner)},
                      {"course_id", r.course_id},
                      {"protocol", r.protocol},
                      {"repeats", r.repeats},
                      {"accuracy", to_json(r.accuracy)},
                      {"zero_denominator_units", r.zero_denominator_units},
                      {"per_repeat", std::move(raw)}};
  if (r.protocol == "holdout") j["test_fraction"] = r.test_fraction;
  for (std::size_t c = 0; c < 2; ++c) {
    j["class_" + std::to_string(c)] = {
        {"precision", to_json(r.precision[c])}, {"recall", to_json(r.recall[c])}, {"f1", to_json(r.f1[c])}};
  }
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.learner = parse_learner_kind(j.at("learner").get<std::string>());
    r.course_id = j.at("course_id").get<std::string>();
    r.protocol = j.at("protocol").get<std::string>();
    r.repeats = j.at("repeats").get<std::size_t>();
    r.test_fraction = j.value("test_fraction", 0.0);
    auto summary = [](const nlohmann::json& s) { return Summary{s.at("mean").get<double>(), s.at("margin").get<double>()}; };
    r.accuracy = summary(j.at("accuracy"));
    r.zero_denominator_units = j.at("zero_denominator_units").get<std::size_t>();
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& k = j.at("class_" + std::to_string(c));
      r.precision[c] = summary(k.at("precision"));
      r.recall[c] = summary(k.at("recall"));
      r.f1[c] = summary(k.at("f1"));
    }
    for (const auto& m : j.at("per_repeat")) {
      Metrics x;
      x.accuracy = m.at("accuracy").get<double>();
      x.zero_denominator = m.at("zero_denominator").get<bool>();
      for (std::size_t c = 0; c < 2; ++c) {
        const auto& k = m.at("class_" + std::to_string(c));
        x.per_class[c] = {k.at("precision").get<double>(), k.at("recall").get<double>(), k.at("f1").get<double>()};
      }
      r.per_repeat.push_back(x);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed report JSON: ") + e.what());
  }
}

// Text table, one row per learner: accuracy and per-class precision, recall
// and F1 for classes 0 (non-completer) and 1 (completer), each followed by
// its margin. Values are percentages.
inline std::string render_table(std::span<const EvalReport> reports) {
  std::string out;
  if (reports.empty()) return out;
  const auto& first = reports.front();
  std::string protocol = first.protocol == "cv"
                             ? strprintf("%zu-fold cross-validation", first.repeats)
                             : strprintf("%zu random %.0f/%.0f splits", first.repeats, 100.0 * (1.0 - first.test_fraction),
                                         100.0 * first.test_fraction);
  out += "Course: " + (first.course_id.empty() ? std::string("-") : first.course_id) + "  (" + protocol +
         ", balanced training data)\n";
  out += strprintf("%-18s %8s %6s | %6s %5s %6s %5s | %6s %5s %6s %5s | %6s %5s %6s %5s\n", "", "Accuracy", "[+-]",
                   "Prec0", "[+-]", "Prec1", "[+-]", "Rec0", "[+-]", "Rec1", "[+-]", "F1_0", "[+-]", "F1_1", "[+-]");
  for (const auto& r : reports) {
    auto cell = [](const Summary& s) { return strprintf("%6.2f %5.2f", 100.0 * s.mean, 100.0 * s.margin); };
    out += strprintf("%-18s %8.2f %6.2f | %s %s | %s %s | %s %s\n", display_name(r.learner), 100.0 * r.accuracy.mean,
                     100.0 * r.accuracy.margin, cell(r.precision[0]).c_str(), cell(r.precision[1]).c_str(),
                     cell(r.recall[0]).c_str(), cell(r.recall[1]).c_str(), cell(r.f1[0]).c_str(),
                     cell(r.f1[1]).c_str());
  }
  out += "0: non-completer, 1: completer, [+-]: 95% margin of error over the repeats (percentage points)\n";
  return out;
}

}  // namespace earlydrop

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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "common.hpp"
#include "csv.hpp"

namespace earlydrop {

// Poisson visit counts per step, log-normal visit durations, class drawn from
// a prior. Index 0 is the non-completer class, 1 the completer class.
struct SynthConfig {
  std::size_t learners = 5000;
  double completer_prior = 0.146;
  int weeks = 6;
  int steps_per_week = 8;
  int runs = 1;
  double visit_rate[2] = {0.5, 1.0};
  double duration_median = 60.0;  // non-completer median, seconds
  double duration_ratio = 2.0;    // completer median / non-completer median
  double duration_sigma = 0.8;    // log-scale sd
  std::optional<std::array<double, 2>> quiz_correct_rate;  // unset: no quiz columns
  double noise = 0.0;             // chance a learner behaves like the other class
  double open_visit_fraction = 0.0;
  std::string course_id = "synth";
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
    if (learners < 1) fail("learners must be >= 1");
    if (!(completer_prior > 0.0 && completer_prior < 1.0)) fail("completer_prior must lie in (0, 1)");
    if (weeks < 1 || steps_per_week < 1) fail("weeks and steps_per_week must be >= 1");
    if (runs < 1) fail("runs must be >= 1");
    if (!(visit_rate[0] > 0.0 && visit_rate[1] > 0.0)) fail("visit rates must be > 0");
    if (!(duration_median > 0.0) || !std::isfinite(duration_median)) fail("duration_median must be > 0");
    if (!(duration_ratio > 0.0) || !std::isfinite(duration_ratio)) fail("duration_ratio must be > 0");
    if (!(duration_sigma >= 0.0) || !std::isfinite(duration_sigma)) fail("duration_sigma must be >= 0");
    if (!(noise >= 0.0 && noise < 0.5)) fail("noise must lie in [0, 0.5)");
    if (!(open_visit_fraction >= 0.0 && open_visit_fraction <= 1.0)) fail("open_visit_fraction must lie in [0, 1]");
    if (quiz_correct_rate) {
      for (double r : *quiz_correct_rate) {
        if (!(r >= 0.0 && r <= 1.0)) fail("quiz correct rates must lie in [0, 1]");
      }
    }
    if (course_id.empty() || course_id.find_first_of(" \t\r\n#=") != std::string::npos) {
      fail("course_id must be a non-empty token");
    }
    // a non-completer must be able to sit strictly between 0 and the threshold
    const auto total = static_cast<std::size_t>(weeks) * static_cast<std::size_t>(steps_per_week);
    if (required_steps(total, kDefaultCompletionThreshold) < 2) {
      fail(strprintf("a %zu-step course is too small to separate completers from non-completers", total));
    }
  }
};

inline constexpr int kQuizQuestions = 5;
inline constexpr std::int64_t kSynthFirstRunStart = 1420416000;  // 2015-01-05T00:00:00Z
inline constexpr std::int64_t kSynthRunSpacing = 26 * kSecondsPerWeek;

struct SynthCohort {
  CourseSpec spec;
  std::vector<StepActivity> activities;  // absolute timestamps, grouped by learner
  std::vector<std::pair<std::string, int>> labels;  // learner_id, label
};

inline CourseSpec synth_course_spec(const SynthConfig& c) {
  CourseSpec spec;
  spec.course_id = c.course_id;
  spec.weeks = c.weeks;
  for (int r = 0; r < c.runs; ++r) spec.runs.push_back({r + 1, kSynthFirstRunStart + r * kSynthRunSpacing});
  for (int w = 1; w <= c.weeks; ++w) {
    for (int s = 1; s <= c.steps_per_week; ++s) spec.steps.push_back({w, s});
  }
  spec.validate();
  return spec;
}

inline std::string synth_learner_id(std::size_t index) { return strprintf("L%06zu", index); }

namespace detail {

struct SynthLearner {
  int label = 0;
  std::vector<StepActivity> visits;
};

inline SynthLearner synth_one(const SynthConfig& c, const CourseSpec& spec, std::size_t index) {
  Rng rng(derive_seed(c.seed, index));
  SynthLearner out;
  out.label = rng.bernoulli(c.completer_prior) ? 1 : 0;
  const int behaves = rng.bernoulli(c.noise) ? 1 - out.label : out.label;

  const std::size_t total = spec.steps.size();
  std::vector<std::uint32_t> counts(total);
  for (auto& n : counts) n = rng.poisson(c.visit_rate[behaves]);

  // Steps beyond week 1 absorb coverage fixes first, so the first-week
  // behavior stays exactly as sampled.
  const auto week1 = static_cast<std::size_t>(c.steps_per_week);
  auto pick = [&](bool visited) -> std::optional<std::size_t> {
    for (std::size_t lo : {week1, std::size_t{0}}) {
      std::vector<std::size_t> pool;
      for (std::size_t i = lo; i < (lo == 0 ? week1 : total); ++i) {
        if ((counts[i] > 0) == visited) pool.push_back(i);
      }
      if (!pool.empty()) return pool[rng.index(pool.size())];
    }
    return std::nullopt;
  };
  const std::size_t needed = required_steps(total, kDefaultCompletionThreshold);
  auto distinct = [&] { return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto n) { return n > 0; })); };
  if (out.label == 1) {
    while (distinct() < needed) counts[*pick(false)] = 1;
  } else {
    while (distinct() >= needed) counts[*pick(true)] = 0;
    if (distinct() == 0) counts[*pick(false)] = 1;  // keep every learner in the log
  }

  const int run = static_cast<int>(index % static_cast<std::size_t>(c.runs)) + 1;
  const std::int64_t run_start = spec.find_run(run)->start;
  const double log_median = std::log(c.duration_median * (behaves == 1 ? c.duration_ratio : 1.0));
  for (std::size_t i = 0; i < total; ++i) {
    const StepId step = spec.steps[i];
    const bool quiz_step = c.quiz_correct_rate && step.step == c.steps_per_week;
    for (std::uint32_t k = 0; k < counts[i]; ++k) {
      StepActivity a;
      a.learner_id = synth_learner_id(index);
      a.course_id = c.course_id;
      a.run = run;
      a.week = step.week;
      a.step = step.step;
      a.visit_start = run_start + (step.week - 1) * kSecondsPerWeek +
                      static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(kSecondsPerWeek)));
      const double seconds = std::exp(log_median + c.duration_sigma * rng.normal());
      const bool open = rng.bernoulli(c.open_visit_fraction);
      if (!open) a.visit_end = a.visit_start + std::max<std::int64_t>(1, std::llround(seconds));
      if (quiz_step && k == 0) {
        int correct = 0;
        for (int q = 0; q < kQuizQuestions; ++q) correct += rng.bernoulli((*c.quiz_correct_rate)[behaves]) ? 1 : 0;
        a.quiz_correct = correct;
        a.quiz_wrong = kQuizQuestions - correct;
      }
      out.visits.push_back(std::move(a));
    }
  }
  std::stable_sort(out.visits.begin(), out.visits.end(), timeline_order);
  return out;
}

}  // namespace detail

inline SynthCohort generate_cohort(const SynthConfig& config) {
  config.validate();
  SynthCohort cohort;
  cohort.spec = synth_course_spec(config);
  std::vector<detail::SynthLearner> learners(config.learners);
  parallel_for(config.learners, config.threads,
               [&](std::size_t i) { learners[i] = detail::synth_one(config, cohort.spec, i); });
  for (std::size_t i = 0; i < learners.size(); ++i) {
    cohort.labels.emplace_back(synth_learner_id(i), learners[i].label);
    for (auto& a : learners[i].visits) cohort.activities.push_back(std::move(a));
  }
  return cohort;
}

// learner_id,label
inline std::string format_labels_csv(const SynthCohort& cohort) {
  std::string out;
  csv::append_row(out, {"learner_id", "label"});
  for (const auto& [id, label] : cohort.labels) csv::append_row(out, {id, std::to_string(label)});
  return out;
}

inline std::vector<std::pair<std::string, int>> parse_labels_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty() || records.front().fields != std::vector<std::string>{"learner_id", "label"}) {
    throw Error(ErrorKind::kSchema, "labels CSV header must be learner_id,label");
  }
  std::vector<std::pair<std::string, int>> out;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != 2) throw Error(ErrorKind::kParse, strprintf("line %zu: expected 2 fields", records[i].line));
    const int label = detail::parse_number<int>(f[1], records[i].line, "label");
    if (label != 0 && label != 1) throw Error(ErrorKind::kParse, strprintf("line %zu: label must be 0 or 1", records[i].line));
    out.emplace_back(f[0], label);
  }
  return out;
}

}  // namespace earlydrop

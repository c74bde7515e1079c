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

// Ingestion and labeling of step-activity logs.
//
// The pipeline is parse -> merge_runs -> filter_and_label -> build_features.
// merge_runs rewrites every timestamp as an offset in seconds from the start
// of the learner's own run, so all later stages work on offsets and a week
// window is the half-open interval [0, weeks * 604800).

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "csv.hpp"
#include "matrix.hpp"

namespace earlydrop {

inline constexpr std::int64_t kSecondsPerWeek = 7 * 24 * 3600;
inline constexpr double kDefaultCompletionThreshold = 0.8;
inline constexpr double kDefaultTimeCapSeconds = 3600.0;

// ------------------------------------------------------------
// timestamps
// ------------------------------------------------------------

// Accepts YYYY-MM-DDTHH:MM:SSZ (or a +00:00 suffix); returns UTC epoch seconds.
inline std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  auto digits = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int y, mo, d, h, mi, s;
  if (text.size() < 20) return std::nullopt;
  if (!digits(0, 4, y) || text[4] != '-' || !digits(5, 2, mo) || text[7] != '-' || !digits(8, 2, d) ||
      (text[10] != 'T' && text[10] != ' ') || !digits(11, 2, h) || text[13] != ':' || !digits(14, 2, mi) ||
      text[16] != ':' || !digits(17, 2, s)) {
    return std::nullopt;
  }
  const std::string_view zone = text.substr(19);
  if (zone != "Z" && zone != "+00:00") return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

inline std::string format_timestamp(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  std::int64_t days = epoch_seconds / 86400;
  std::int64_t rem = epoch_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return strprintf("%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                   static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                   static_cast<int>(rem % 60));
}

// ------------------------------------------------------------
// course structure
// ------------------------------------------------------------

struct StepId {
  int week = 0;
  int step = 0;

  auto operator<=>(const StepId&) const = default;
  bool operator==(const StepId&) const = default;

  std::string label() const { return std::to_string(week) + "." + std::to_string(step); }
};

struct RunInfo {
  int id = 0;
  std::int64_t start = 0;  // UTC epoch seconds

  bool operator==(const RunInfo&) const = default;
};

struct CourseSpec {
  std::string course_id;
  std::vector<RunInfo> runs;
  int weeks = 0;
  std::vector<StepId> steps;  // kept sorted by (week, step)

  bool operator==(const CourseSpec&) const = default;

  bool has_step(StepId id) const { return std::binary_search(steps.begin(), steps.end(), id); }

  const RunInfo* find_run(int id) const {
    for (const auto& r : runs) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  std::size_t steps_in_weeks(int max_week) const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [&](StepId s) { return s.week <= max_week; }));
  }

  // Sorts steps and checks the structural invariants.
  void validate() {
    if (course_id.empty()) throw Error(ErrorKind::kSchema, "course spec has no course_id");
    if (runs.empty()) throw Error(ErrorKind::kSchema, "course spec lists no runs");
    std::set<int> run_ids;
    for (const auto& r : runs) {
      if (r.id < 1) throw Error(ErrorKind::kSchema, "run ids must be positive");
      if (!run_ids.insert(r.id).second) throw Error(ErrorKind::kSchema, strprintf("duplicate run %d", r.id));
    }
    if (steps.empty()) throw Error(ErrorKind::kSchema, "course spec lists no steps");
    std::sort(steps.begin(), steps.end());
    if (std::adjacent_find(steps.begin(), steps.end()) != steps.end()) {
      throw Error(ErrorKind::kSchema, "duplicate (week, step) pair in course spec");
    }
    for (const auto& s : steps) {
      if (s.week < 1 || s.step < 1) throw Error(ErrorKind::kSchema, "week and step numbers must be >= 1");
    }
    const int max_week = steps.back().week;
    if (weeks == 0) weeks = max_week;
    if (weeks != max_week) {
      throw Error(ErrorKind::kSchema, strprintf("weeks = %d but the last step is in week %d", weeks, max_week));
    }
  }
};

// Course spec file: one `key = value` per line, '#' comments.
//
//   course_id = bigdata
//   weeks = 2
//   run = 1 2015-01-05T00:00:00Z
//   run = 2 2015-06-01T00:00:00Z
//   steps = 1.1 1.2 1.3
//   step = 2.1
//
// `run` and `step`/`steps` may repeat; `weeks` is optional and defaults to
// the largest week listed.
inline CourseSpec parse_course_spec(std::string_view text) {
  CourseSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) { throw Error(ErrorKind::kParse, strprintf("spec line %zu: ", lineno) + msg); };
  auto parse_step = [&](const std::string& tok) {
    const auto dot = tok.find('.');
    if (dot == std::string::npos) fail("step '" + tok + "' is not week.step");
    StepId id;
    id.week = detail::parse_number<int>(std::string_view(tok).substr(0, dot), lineno, "week");
    id.step = detail::parse_number<int>(std::string_view(tok).substr(dot + 1), lineno, "step");
    spec.steps.push_back(id);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::istringstream vs(value);
    if (key == "course_id") {
      spec.course_id = value;
    } else if (key == "weeks") {
      spec.weeks = detail::parse_number<int>(value, lineno, "weeks");
    } else if (key == "run") {
      std::string id, start;
      vs >> id >> start;
      const auto ts = parse_timestamp(start);
      if (!ts) fail("bad run start '" + start + "'");
      spec.runs.push_back({detail::parse_number<int>(id, lineno, "run id"), *ts});
    } else if (key == "step" || key == "steps") {
      std::string tok;
      while (vs >> tok) parse_step(tok);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

inline CourseSpec load_course_spec(const std::string& path) { return parse_course_spec(csv::read_file(path)); }

inline std::string format_course_spec(const CourseSpec& spec) {
  std::string out = "course_id = " + spec.course_id + "\n";
  out += "weeks = " + std::to_string(spec.weeks) + "\n";
  for (const auto& r : spec.runs) out += "run = " + std::to_string(r.id) + " " + format_timestamp(r.start) + "\n";
  for (int w = 1; w <= spec.weeks; ++w) {
    std::string line;
    for (const auto& s : spec.steps) {
      if (s.week == w) line += " " + s.label();
    }
    if (!line.empty()) out += "steps =" + line + "\n";
  }
  return out;
}

// ------------------------------------------------------------
// activity records
// ------------------------------------------------------------

struct StepActivity {
  std::string learner_id;
  std::string course_id;
  int run = 0;
  int week = 0;
  int step = 0;
  std::int64_t visit_start = 0;
  std::optional<std::int64_t> visit_end;
  std::optional<int> quiz_correct;
  std::optional<int> quiz_wrong;

  StepId step_id() const { return {week, step}; }
  LearnerKey key() const { return {learner_id, run}; }
  bool operator==(const StepActivity&) const = default;
};

inline const std::vector<std::string>& activity_csv_header() {
  static const std::vector<std::string> header = {"learner_id", "course_id",  "run",          "week_number",
                                                  "step_number", "visit_start", "visit_end", "quiz_correct",
                                                  "quiz_wrong"};
  return header;
}

inline std::vector<StepActivity> parse_activity_csv(std::string_view text, const CourseSpec& spec) {
  const auto records = csv::parse(text);
  if (records.empty() || records.front().fields != activity_csv_header()) {
    throw Error(ErrorKind::kSchema, "activity CSV header must be learner_id,course_id,run,week_number,step_number,"
                                    "visit_start,visit_end,quiz_correct,quiz_wrong");
  }
  std::vector<StepActivity> out;
  out.reserve(records.size() - 1);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    const auto& f = rec.fields;
    const std::size_t line = rec.line;
    if (f.size() != 9) throw Error(ErrorKind::kParse, strprintf("line %zu: expected 9 fields, got %zu", line, f.size()));
    auto positive = [&](const std::string& s, const char* what) {
      const int v = detail::parse_number<int>(s, line, what);
      if (v < 1) throw Error(ErrorKind::kParse, strprintf("line %zu: %s must be >= 1", line, what));
      return v;
    };
    auto count = [&](const std::string& s, const char* what) -> std::optional<int> {
      if (s.empty()) return std::nullopt;
      const int v = detail::parse_number<int>(s, line, what);
      if (v < 0) throw Error(ErrorKind::kParse, strprintf("line %zu: %s must be >= 0", line, what));
      return v;
    };
    StepActivity a;
    a.learner_id = f[0];
    if (a.learner_id.empty()) throw Error(ErrorKind::kParse, strprintf("line %zu: empty learner_id", line));
    a.course_id = f[1];
    a.run = positive(f[2], "run");
    a.week = positive(f[3], "week_number");
    a.step = positive(f[4], "step_number");
    const auto start = parse_timestamp(f[5]);
    if (!start) throw Error(ErrorKind::kParse, strprintf("line %zu: bad visit_start '%s'", line, f[5].c_str()));
    a.visit_start = *start;
    if (!f[6].empty()) {
      const auto end = parse_timestamp(f[6]);
      if (!end) throw Error(ErrorKind::kParse, strprintf("line %zu: bad visit_end '%s'", line, f[6].c_str()));
      if (*end < a.visit_start) throw Error(ErrorKind::kParse, strprintf("line %zu: visit_end before visit_start", line));
      a.visit_end = *end;
    }
    a.quiz_correct = count(f[7], "quiz_correct");
    a.quiz_wrong = count(f[8], "quiz_wrong");
    if (a.course_id != spec.course_id) {
      throw Error(ErrorKind::kSchema,
                  strprintf("line %zu: course '%s' does not match spec '%s'", line, a.course_id.c_str(),
                            spec.course_id.c_str()));
    }
    if (!spec.has_step(a.step_id())) {
      throw Error(ErrorKind::kSchema, strprintf("line %zu: step %s is not in the course spec", line,
                                                a.step_id().label().c_str()));
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<StepActivity> parse_activity_log(const std::string& path, const CourseSpec& spec) {
  return parse_activity_csv(csv::read_file(path), spec);
}

inline std::string format_activity_csv(std::span<const StepActivity> activities) {
  std::string out;
  csv::append_row(out, activity_csv_header());
  auto opt = [](const auto& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& a : activities) {
    csv::append_row(out, {a.learner_id, a.course_id, std::to_string(a.run), std::to_string(a.week),
                          std::to_string(a.step), format_timestamp(a.visit_start),
                          a.visit_end ? format_timestamp(*a.visit_end) : std::string(), opt(a.quiz_correct),
                          opt(a.quiz_wrong)});
  }
  return out;
}

// ------------------------------------------------------------
// run merging
// ------------------------------------------------------------

namespace detail {

inline bool timeline_order(const StepActivity& a, const StepActivity& b) {
  if (a.visit_start != b.visit_start) return a.visit_start < b.visit_start;
  return a.step_id() < b.step_id();
}

}  // namespace detail

// Re-times every activity as an offset from its run's start and returns one
// list ordered by (learner_id, run), then by visit time.
inline std::vector<StepActivity> merge_runs(std::span<const std::vector<StepActivity>> per_run,
                                            const CourseSpec& spec) {
  std::vector<StepActivity> out;
  for (const auto& list : per_run) {
    for (const auto& a : list) {
      const RunInfo* run = spec.find_run(a.run);
      if (!run) throw Error(ErrorKind::kSchema, strprintf("run %d is not in the course spec", a.run));
      StepActivity shifted = a;
      shifted.visit_start -= run->start;
      if (shifted.visit_end) *shifted.visit_end -= run->start;
      out.push_back(std::move(shifted));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const StepActivity& a, const StepActivity& b) {
    if (a.learner_id != b.learner_id) return a.learner_id < b.learner_id;
    if (a.run != b.run) return a.run < b.run;
    return detail::timeline_order(a, b);
  });
  return out;
}

// Flat input (as parsed from one log holding several runs).
inline std::vector<StepActivity> merge_runs(std::span<const StepActivity> activities, const CourseSpec& spec) {
  const std::vector<StepActivity> one(activities.begin(), activities.end());
  return merge_runs(std::span<const std::vector<StepActivity>>(&one, 1), spec);
}

// ------------------------------------------------------------
// filtering and labeling
// ------------------------------------------------------------

struct LearnerTimeline {
  LearnerKey key;
  std::vector<StepActivity> visits;  // sorted by visit_start, ties by (week, step)
};

struct CompletionLabel {
  int label = 0;          // 1 = completer
  double coverage = 0.0;  // distinct course steps accessed / total steps
};

struct LabeledLearner {
  LearnerTimeline timeline;
  CompletionLabel completion;
};

// Smallest number of distinct steps that reaches `threshold` coverage.
inline std::size_t required_steps(std::size_t total_steps, double threshold) {
  auto k = static_cast<std::size_t>(std::ceil(threshold * static_cast<double>(total_steps) - 1e-9));
  return std::min(k, total_steps);
}

// Groups activities per learner and labels each by coverage. Learners are
// defined by their rows, so enrollees who never accessed a step drop out here.
inline std::vector<LabeledLearner> filter_and_label(std::span<const StepActivity> activities, const CourseSpec& spec,
                                                    double threshold = kDefaultCompletionThreshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::kConfig, "completion threshold must lie in (0, 1]");
  }
  std::map<LearnerKey, std::vector<StepActivity>> grouped;
  for (const auto& a : activities) grouped[a.key()].push_back(a);

  const std::size_t needed = required_steps(spec.steps.size(), threshold);
  std::vector<LabeledLearner> out;
  out.reserve(grouped.size());
  for (auto& [key, visits] : grouped) {
    std::stable_sort(visits.begin(), visits.end(), detail::timeline_order);
    std::set<StepId> distinct;
    for (const auto& v : visits) {
      if (spec.has_step(v.step_id())) distinct.insert(v.step_id());
    }
    CompletionLabel label;
    label.coverage = static_cast<double>(distinct.size()) / static_cast<double>(spec.steps.size());
    label.label = distinct.size() >= needed ? 1 : 0;
    out.push_back({{key, std::move(visits)}, label});
  }
  return out;
}

// ------------------------------------------------------------
// time spent
// ------------------------------------------------------------

struct TimedVisit {
  StepActivity visit;
  double duration = 0.0;  // seconds
};

// Explicit span when visit_end is present; otherwise the gap to the next visit
// capped at `cap`; a trailing open visit gets the median of the learner's other
// durations, or `cap` when there are none.
inline std::vector<TimedVisit> derive_time_spent(const LearnerTimeline& timeline,
                                                 double cap = kDefaultTimeCapSeconds) {
  const auto& v = timeline.visits;
  std::vector<TimedVisit> out(v.size());
  std::vector<double> known;
  std::optional<std::size_t> trailing_open;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i].visit = v[i];
    if (v[i].visit_end) {
      out[i].duration = static_cast<double>(*v[i].visit_end - v[i].visit_start);
    } else if (i + 1 < v.size()) {
      const double gap = static_cast<double>(v[i + 1].visit_start - v[i].visit_start);
      out[i].duration = std::clamp(gap, 0.0, cap);
    } else {
      trailing_open = i;
      continue;
    }
    known.push_back(out[i].duration);
  }
  if (trailing_open) out[*trailing_open].duration = known.empty() ? cap : median(std::move(known));
  return out;
}

// ------------------------------------------------------------
// features
// ------------------------------------------------------------

struct FeatureOptions {
  FeatureMode mode = FeatureMode::kPerStep;
  int window_weeks = 1;
  double cap_seconds = kDefaultTimeCapSeconds;
};

inline std::vector<std::string> feature_columns(const CourseSpec& spec, const FeatureOptions& options) {
  if (options.mode == FeatureMode::kAggregate) return aggregate_columns();
  std::vector<std::string> cols;
  for (const auto& s : spec.steps) {
    if (s.week > options.window_weeks) continue;
    cols.push_back("acc_" + s.label());
    cols.push_back("time_" + s.label());
  }
  return cols;
}

// One row per learner. Only visits whose run offset lies in
// [0, window_weeks * 604800) contribute. Per-step mode emits acc_<w>.<s> and
// time_<w>.<s> for every step of the window's weeks; aggregate mode emits the
// four summed columns.
inline FeatureMatrix build_features(std::span<const LabeledLearner> labeled, const CourseSpec& spec,
                                    const FeatureOptions& options = {}) {
  if (options.window_weeks < 1) throw Error(ErrorKind::kConfig, "window_weeks must be >= 1");
  if (options.window_weeks > spec.weeks) {
    throw Error(ErrorKind::kConfig,
                strprintf("window of %d weeks exceeds the %d-week course", options.window_weeks, spec.weeks));
  }
  if (!(options.cap_seconds >= 0.0)) throw Error(ErrorKind::kConfig, "time cap must be >= 0");

  FeatureMatrix matrix(feature_columns(spec, options), options.mode);
  std::map<StepId, std::size_t> slot;
  if (options.mode == FeatureMode::kPerStep) {
    std::size_t k = 0;
    for (const auto& s : spec.steps) {
      if (s.week <= options.window_weeks) slot[s] = k++;
    }
  }
  const std::int64_t window_end = options.window_weeks * kSecondsPerWeek;
  std::vector<double> row(matrix.cols());
  for (const auto& learner : labeled) {
    std::fill(row.begin(), row.end(), 0.0);
    for (const auto& tv : derive_time_spent(learner.timeline, options.cap_seconds)) {
      const auto& a = tv.visit;
      if (a.visit_start < 0 || a.visit_start >= window_end) continue;
      if (options.mode == FeatureMode::kAggregate) {
        row[0] += 1.0;
        row[1] += tv.duration;
        row[2] += a.quiz_correct.value_or(0);
        row[3] += a.quiz_wrong.value_or(0);
      } else if (auto it = slot.find(a.step_id()); it != slot.end()) {
        row[2 * it->second] += 1.0;
        row[2 * it->second + 1] += tv.duration;
      }
    }
    matrix.add_row(learner.timeline.key, row, learner.completion.label);
  }
  return matrix;
}

}  // namespace earlydrop

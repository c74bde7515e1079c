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

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "earlydrop.hpp"

namespace earlydrop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Everything the subcommands read. Defaults mirror the library defaults.
struct RunConfig {
  std::string input;
  std::vector<std::string> inputs;  // report only
  std::string spec;
  std::string out;
  std::string model = "all";
  std::string mode = "per-step";
  int window_weeks = 1;
  std::size_t repeats = 100;
  std::size_t k = 10;
  double test_fraction = 0.3;
  double threshold = kDefaultCompletionThreshold;
  double cap_seconds = kDefaultTimeCapSeconds;
  std::uint64_t seed = 0;
  std::size_t threads = default_threads();
  bool oversample = true;

  // per-model defaults apply when unset
  std::size_t trees = 100;
  std::optional<int> max_depth;
  std::optional<std::size_t> min_samples_leaf;
  std::size_t mtry = 0;
  bool no_bootstrap = false;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;

  SynthConfig synth;
  std::optional<double> quiz_rate0;
  std::optional<double> quiz_rate1;
};

namespace detail {

inline bool is_validation(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
    case ErrorKind::kSchema:
    case ErrorKind::kConfig:
    case ErrorKind::kDimension: return true;
    default: return false;
  }
}

inline void write_output(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create directory " + p.parent_path().string());
  }
  csv::write_file(path, content);
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::kConfig, msg);
}

struct Cohort {
  CourseSpec spec;
  std::vector<LabeledLearner> learners;
};

inline Cohort load_cohort(const RunConfig& c) {
  require(!c.spec.empty(), "--spec is required to read an activity log");
  Cohort out;
  out.spec = load_course_spec(c.spec);
  const auto activity = parse_activity_log(c.input, out.spec);
  out.learners = filter_and_label(merge_runs(std::span<const StepActivity>(activity), out.spec), out.spec, c.threshold);
  return out;
}

inline FeatureOptions feature_options(const RunConfig& c) {
  return {parse_feature_mode(c.mode), c.window_weeks, c.cap_seconds};
}

// A feature CSV, or an activity log when --spec is given.
inline FeatureMatrix load_matrix(const RunConfig& c, std::string* course_id) {
  if (c.spec.empty()) {
    if (course_id) *course_id = std::filesystem::path(c.input).stem().string();
    return feature_matrix_from_csv(csv::read_file(c.input));
  }
  const auto cohort = load_cohort(c);
  if (course_id) *course_id = cohort.spec.course_id;
  return build_features(cohort.learners, cohort.spec, feature_options(c));
}

inline std::vector<LearnerKind> selected_models(const std::string& model, bool allow_all) {
  if (model == "all") {
    require(allow_all, "--model all is not accepted here; pick one of rf, gb, ada, xgb");
    return {kAllLearners.begin(), kAllLearners.end()};
  }
  return {parse_learner_kind(model)};
}

inline LearnerConfig learner_config(const RunConfig& c, LearnerKind kind) {
  auto l = LearnerConfig::defaults(kind);
  l.params.n_trees = c.trees;
  l.params.mtry = c.mtry;
  l.params.bootstrap = !c.no_bootstrap;
  l.params.learning_rate = c.learning_rate;
  l.params.lambda = c.lambda;
  l.params.gamma = c.gamma;
  if (c.max_depth) l.params.tree.max_depth = *c.max_depth;
  if (c.min_samples_leaf) l.params.tree.min_samples_leaf = *c.min_samples_leaf;
  l.params.threads = c.threads;
  return l;
}

// ------------------------------------------------------------
// subcommands
// ------------------------------------------------------------

inline void cmd_synth(RunConfig c, std::ostream& out) {
  require(!c.out.empty(), "--out is required");
  require(c.quiz_rate0.has_value() == c.quiz_rate1.has_value(), "--quiz-rate0 and --quiz-rate1 go together");
  if (c.quiz_rate0) c.synth.quiz_correct_rate = std::array<double, 2>{*c.quiz_rate0, *c.quiz_rate1};
  c.synth.seed = c.seed;
  c.synth.threads = c.threads;
  const auto cohort = generate_cohort(c.synth);
  write_output(join(c.out, "activity.csv"), format_activity_csv(cohort.activities));
  write_output(join(c.out, "course.spec"), format_course_spec(cohort.spec));
  write_output(join(c.out, "labels.csv"), format_labels_csv(cohort));
  std::size_t completers = 0;
  for (const auto& l : cohort.labels) completers += static_cast<std::size_t>(l.second);
  out << strprintf("synth: %zu learners (%zu completers), %zu activity rows -> %s\n", cohort.labels.size(),
                   completers, cohort.activities.size(), c.out.c_str());
}

inline void cmd_ingest(const RunConfig& c, std::ostream& out) {
  const auto cohort = load_cohort(c);
  std::size_t completers = 0, visits = 0;
  std::string table;
  csv::append_row(table, {"learner_id", "run", "visits", "distinct_steps", "coverage", "label"});
  std::vector<StepActivity> merged;
  for (const auto& l : cohort.learners) {
    completers += static_cast<std::size_t>(l.completion.label);
    visits += l.timeline.visits.size();
    const auto distinct = static_cast<std::size_t>(
        std::llround(l.completion.coverage * static_cast<double>(cohort.spec.steps.size())));
    csv::append_row(table, {l.timeline.key.learner_id, std::to_string(l.timeline.key.run),
                            std::to_string(l.timeline.visits.size()), std::to_string(distinct),
                            format_double(l.completion.coverage), std::to_string(l.completion.label)});
    merged.insert(merged.end(), l.timeline.visits.begin(), l.timeline.visits.end());
  }
  if (!c.out.empty()) {
    write_output(join(c.out, "learners.csv"), table);
    // timestamps are offsets from each run's start, printed from the epoch
    write_output(join(c.out, "merged.csv"), format_activity_csv(merged));
  }
  out << strprintf("ingest: %s, %zu runs, %zu steps\n", cohort.spec.course_id.c_str(), cohort.spec.runs.size(),
                   cohort.spec.steps.size());
  out << strprintf("  %zu learners with activity, %zu completers (coverage >= %s), %zu non-completers\n",
                   cohort.learners.size(), completers, format_double(c.threshold).c_str(),
                   cohort.learners.size() - completers);
  out << strprintf("  %zu visits\n", visits);
}

inline void cmd_features(const RunConfig& c, std::ostream& out) {
  require(!c.out.empty(), "--out is required");
  require(!c.spec.empty(), "--spec is required");
  const auto m = load_matrix(c, nullptr);
  write_output(c.out, to_csv(m));
  out << strprintf("features: %zu learners x %zu %s columns (%zu completers) -> %s\n", m.rows(), m.cols(),
                   to_string(m.mode()), m.count_label(1), c.out.c_str());
}

inline void cmd_train(const RunConfig& c, std::ostream& out) {
  require(!c.out.empty(), "--out is required");
  const auto kind = selected_models(c.model, false).front();
  const auto m = load_matrix(c, nullptr);
  const auto learner = learner_config(c, kind);
  // one stream for balancing, one for fitting, as in the evaluation units
  const auto data = c.oversample ? oversample(m, derive_seed(c.seed, 1)) : m;
  const auto model = train(kind, data, learner.params, derive_seed(c.seed, 2));
  write_output(c.out, dump(to_json(model)));

  auto imp = ensemble_gini_importance(model);
  std::stable_sort(imp.begin(), imp.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  out << strprintf("train: %s on %zu rows (%s), %zu trees -> %s\n", display_name(kind), data.rows(),
                   c.oversample ? "oversampled" : "as given", model.trees.size(), c.out.c_str());
  out << "  Gini importance\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(imp.size(), 10); ++i) {
    out << strprintf("  %-16s %.4f\n", imp[i].first.c_str(), imp[i].second);
  }
}

inline void emit_reports(const RunConfig& c, const std::vector<EvalReport>& reports, std::ostream& out) {
  const std::string table = render_table(reports);
  if (!c.out.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    write_output(join(c.out, "evaluation.json"), dump(arr));
    write_output(join(c.out, "table.txt"), table);
  }
  out << table;
}

inline void cmd_evaluate(const RunConfig& c, std::ostream& out) {
  require(c.repeats >= 1, "--repeats must be >= 1");
  std::string course;
  const auto m = load_matrix(c, &course);
  std::vector<EvalReport> reports;
  for (auto kind : selected_models(c.model, true)) {
    EvalOptions o;
    o.repeats = c.repeats;
    o.test_fraction = c.test_fraction;
    o.threads = c.threads;
    o.course_id = course;
    reports.push_back(repeated_holdout(m, learner_config(c, kind), c.seed, o));
  }
  emit_reports(c, reports, out);
}

inline void cmd_cv(const RunConfig& c, std::ostream& out) {
  std::string course;
  const auto m = load_matrix(c, &course);
  std::vector<EvalReport> reports;
  for (auto kind : selected_models(c.model, true)) {
    EvalOptions o;
    o.threads = c.threads;
    o.course_id = course;
    reports.push_back(cross_validate(m, learner_config(c, kind), c.k, c.seed, o));
  }
  emit_reports(c, reports, out);
}

inline void cmd_stats(const RunConfig& c, std::ostream& out) {
  const auto cohort = load_cohort(c);
  const auto [completers, non_completers] = first_step_extract(cohort.learners, cohort.spec, c.cap_seconds);
  const auto report = make_stat_report(completers, non_completers, c.seed, cohort.spec.course_id);
  const std::string summary = render_summary(report);
  if (!c.out.empty()) {
    write_output(join(c.out, "stats.json"), dump(to_json(report)));
    write_output(join(c.out, "stats.txt"), summary);
    write_output(join(c.out, "medians.csv"), medians_csv(report));
  }
  out << summary;
}

// Evaluation JSON renders as the metrics table, model JSON as its importances.
inline void cmd_report(const RunConfig& c, std::ostream& out) {
  std::vector<EvalReport> reports;
  std::string text;
  for (const auto& path : c.inputs) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kParse, path + ": " + e.what());
    }
    if (j.is_object() && j.contains("format")) {
      const auto model = model_from_json(j);
      text += strprintf("%s Gini importance (%s)\n", display_name(model.kind), path.c_str());
      for (const auto& [name, value] : ensemble_gini_importance(model)) {
        text += strprintf("  %-16s %.4f\n", name.c_str(), value);
      }
      continue;
    }
    if (j.is_array()) {
      for (const auto& r : j) reports.push_back(report_from_json(r));
    } else {
      reports.push_back(report_from_json(j));
    }
  }
  text += render_table(reports);
  if (!c.out.empty()) write_output(c.out, text);
  out << text;
}

// ------------------------------------------------------------
// flag grammar
// ------------------------------------------------------------

// CLI::PositiveNumber reports its range in doubles
inline const CLI::Validator kAtLeastOne(
    [](std::string& v) {
      return !v.empty() && v.find_first_not_of("0123456789") == std::string::npos && v.find_first_not_of('0') != std::string::npos
                 ? std::string()
                 : "value must be an integer >= 1, got '" + v + "'";
    },
    "INT>=1");

inline void add_input(CLI::App* app, RunConfig& c, const std::string& what) {
  app->add_option("--input", c.input, what)->required();
}

inline void add_cohort_flags(CLI::App* app, RunConfig& c) {
  app->add_option("--threshold", c.threshold, "fraction of course steps a completer must access")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--cap-seconds", c.cap_seconds, "cap on a visit's duration when it has no visit_end")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

inline void add_feature_flags(CLI::App* app, RunConfig& c) {
  app->add_option("--mode", c.mode, "feature layout")->capture_default_str()->check(
      CLI::IsMember({"per-step", "aggregate"}));
  app->add_option("--window-weeks", c.window_weeks, "weeks of activity from the run start used as features")
      ->capture_default_str()
      ->check(kAtLeastOne);
  add_cohort_flags(app, c);
}

inline void add_model_flags(CLI::App* app, RunConfig& c, bool allow_all) {
  app->add_option("--model", c.model, allow_all ? "learner: rf, gb, ada, xgb or all" : "learner: rf, gb, ada or xgb")
      ->capture_default_str()
      ->check(allow_all ? CLI::IsMember({"rf", "gb", "ada", "xgb", "all"}) : CLI::IsMember({"rf", "gb", "ada", "xgb"}));
  app->add_option("--trees", c.trees, "trees in the forest / boosting rounds")->capture_default_str();
  app->add_option("--max-depth", c.max_depth, "tree depth limit [default: rf 12, gb 3, ada 1, xgb 3]")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--min-samples-leaf", c.min_samples_leaf, "smallest leaf [default: rf 5, gb 5, ada 1, xgb 5]")
      ->check(kAtLeastOne);
  app->add_option("--mtry", c.mtry, "features tried per forest node, 0 = floor(sqrt(features))")->capture_default_str();
  app->add_flag("--no-bootstrap", c.no_bootstrap, "grow every forest tree on the full training set");
  app->add_option("--learning-rate", c.learning_rate, "shrinkage for gb and xgb, in (0, 1]")->capture_default_str();
  app->add_option("--lambda", c.lambda, "xgb L2 penalty on leaf weights")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  app->add_option("--gamma", c.gamma, "xgb minimum split gain")->capture_default_str()->check(CLI::NonNegativeNumber);
}

inline void add_common(CLI::App* app, RunConfig& c) {
  app->add_option("--seed", c.seed, "seed for every random choice")->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(kAtLeastOne);
}

inline int dispatch_error(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  return is_validation(e.kind()) ? kExitValidation : kExitRuntime;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace detail;
  RunConfig c;
  CLI::App app{"Predict MOOC dropout from first-week activity.", "earlydrop"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort: activity.csv, course.spec, labels.csv");
  synth->add_option("--out", c.out, "output directory")->required();
  synth->add_option("--learners", c.synth.learners, "learners to generate")->capture_default_str()->check(kAtLeastOne);
  synth->add_option("--prior", c.synth.completer_prior, "fraction of completers")->capture_default_str();
  synth->add_option("--weeks", c.synth.weeks, "course length in weeks")->capture_default_str();
  synth->add_option("--steps-per-week", c.synth.steps_per_week, "steps in every week")->capture_default_str();
  synth->add_option("--runs", c.synth.runs, "course runs; learners are dealt round-robin")->capture_default_str();
  synth->add_option("--visit-rate0", c.synth.visit_rate[0], "mean visits per step, non-completers")
      ->capture_default_str();
  synth->add_option("--visit-rate1", c.synth.visit_rate[1], "mean visits per step, completers")->capture_default_str();
  synth->add_option("--duration-median", c.synth.duration_median, "median visit duration of non-completers (s)")
      ->capture_default_str();
  synth->add_option("--ratio", c.synth.duration_ratio, "completer / non-completer median duration")
      ->capture_default_str();
  synth->add_option("--sigma", c.synth.duration_sigma, "log-scale sd of visit durations")->capture_default_str();
  synth->add_option("--quiz-rate0", c.quiz_rate0, "quiz correct rate, non-completers [default: no quizzes]");
  synth->add_option("--quiz-rate1", c.quiz_rate1, "quiz correct rate, completers [default: no quizzes]");
  synth->add_option("--noise", c.synth.noise, "chance a learner behaves like the other class")->capture_default_str();
  synth->add_option("--open-fraction", c.synth.open_visit_fraction, "share of visits written without visit_end")
      ->capture_default_str();
  synth->add_option("--course-id", c.synth.course_id, "course identifier")->capture_default_str();
  add_common(synth, c);

  auto* ingest = app.add_subcommand("ingest", "parse, merge runs and label an activity log");
  add_input(ingest, c, "activity CSV");
  ingest->add_option("--spec", c.spec, "course spec file")->required();
  ingest->add_option("--out", c.out, "output directory for learners.csv and merged.csv");
  add_cohort_flags(ingest, c);

  auto* features = app.add_subcommand("features", "build the learner feature matrix");
  add_input(features, c, "activity CSV");
  features->add_option("--spec", c.spec, "course spec file")->required();
  features->add_option("--out", c.out, "feature CSV to write")->required();
  add_feature_flags(features, c);

  auto add_matrix_input = [&](CLI::App* sub) {
    add_input(sub, c, "feature CSV, or activity CSV when --spec is given");
    sub->add_option("--spec", c.spec, "course spec file; makes --input an activity log");
    add_feature_flags(sub, c);
  };

  auto* trainer = app.add_subcommand("train", "fit one learner on all rows and save it as JSON");
  add_matrix_input(trainer);
  trainer->add_option("--out", c.out, "model JSON to write")->required();
  add_model_flags(trainer, c, false);
  trainer->add_flag("!--no-oversample", c.oversample, "train on the rows as given instead of balancing classes");
  add_common(trainer, c);

  auto* evaluate = app.add_subcommand("evaluate", "repeated stratified holdout with oversampled training data");
  add_matrix_input(evaluate);
  evaluate->add_option("--out", c.out, "output directory for evaluation.json and table.txt");
  add_model_flags(evaluate, c, true);
  evaluate->add_option("--repeats", c.repeats, "random splits")->capture_default_str()->check(kAtLeastOne);
  evaluate->add_option("--test-fraction", c.test_fraction, "held-out share of each class")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  add_common(evaluate, c);

  auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validation with oversampled training folds");
  add_matrix_input(cv);
  cv->add_option("--out", c.out, "output directory for evaluation.json and table.txt");
  add_model_flags(cv, c, true);
  cv->add_option("--k", c.k, "folds")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
  add_common(cv, c);

  auto* stats = app.add_subcommand("stats", "step 1.1 time: normality, rank-sum test and median ratio");
  add_input(stats, c, "activity CSV");
  stats->add_option("--spec", c.spec, "course spec file")->required();
  stats->add_option("--out", c.out, "output directory for stats.json, stats.txt and medians.csv");
  add_cohort_flags(stats, c);
  stats->add_option("--seed", c.seed, "seed for the Shapiro-Wilk subsample")->capture_default_str();

  auto* report = app.add_subcommand("report", "render saved evaluation or model JSON");
  report->add_option("--input", c.inputs, "evaluation.json or model JSON (repeatable)")->required();
  report->add_option("--out", c.out, "text file to write");

  // "all" is the default for evaluate and cv; train needs a single learner
  trainer->preparse_callback([&](std::size_t) { c.model = "rf"; });
  trainer->get_option("--model")->default_str("rf");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (*synth) cmd_synth(c, out);
    else if (*ingest) cmd_ingest(c, out);
    else if (*features) cmd_features(c, out);
    else if (*trainer) cmd_train(c, out);
    else if (*evaluate) cmd_evaluate(c, out);
    else if (*cv) cmd_cv(c, out);
    else if (*stats) cmd_stats(c, out);
    else if (*report) cmd_report(c, out);
  } catch (const Error& e) {
    return dispatch_error(e, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace earlydrop::cli

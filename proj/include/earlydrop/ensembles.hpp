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

// Tree ensembles for binary completion prediction:
//
//   random forest           bootstrap + per-node feature subsampling, averaged
//                           leaf class frequencies
//   gradient boosting       binomial deviance; regression tree on y - p with
//                           Newton leaf values sum(r) / sum(p(1-p))
//   adaboost (SAMME, K=2)   weighted-Gini stumps, alpha = ln((1-e)/e)
//   second-order boosting   gradient/hessian trees with L2 leaf penalty lambda
//                           and split penalty gamma
//
// Boosted models start from the prior log-odds of the positive class.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "matrix.hpp"
#include "trees.hpp"

namespace earlydrop {

enum class LearnerKind { kRandomForest, kGradientBoosting, kAdaBoost, kSecondOrderBoosting };

inline constexpr std::array<LearnerKind, 4> kAllLearners = {LearnerKind::kRandomForest, LearnerKind::kGradientBoosting,
                                                            LearnerKind::kAdaBoost, LearnerKind::kSecondOrderBoosting};

// Short names used on the command line and in JSON.
inline const char* to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kRandomForest: return "rf";
    case LearnerKind::kGradientBoosting: return "gb";
    case LearnerKind::kAdaBoost: return "ada";
    case LearnerKind::kSecondOrderBoosting: return "xgb";
  }
  return "?";
}

inline const char* display_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kRandomForest: return "Random Forest";
    case LearnerKind::kGradientBoosting: return "Gradient Boosting";
    case LearnerKind::kAdaBoost: return "AdaBoost";
    case LearnerKind::kSecondOrderBoosting: return "XGBoost-style";
  }
  return "?";
}

inline LearnerKind parse_learner_kind(std::string_view text) {
  for (auto k : kAllLearners) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorKind::kConfig, "unknown learner '" + std::string(text) + "' (expected rf, gb, ada or xgb)");
}

struct EnsembleParams {
  std::size_t n_trees = 100;  // trees for the forest, rounds for boosting
  std::size_t mtry = 0;       // forest only; 0 = floor(sqrt(features))
  bool bootstrap = true;      // forest only
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  TreeParams tree;
  std::size_t threads = 1;  // forest tree fits; never affects results

  static EnsembleParams defaults(LearnerKind kind) {
    EnsembleParams p;
    switch (kind) {
      case LearnerKind::kRandomForest: p.tree = TreeParams::classification(); break;
      case LearnerKind::kAdaBoost: p.tree = TreeParams{1, 1, 0}; break;
      case LearnerKind::kGradientBoosting:
      case LearnerKind::kSecondOrderBoosting: p.tree = TreeParams::regression(); break;
    }
    return p;
  }
};

struct EnsembleModel {
  LearnerKind kind = LearnerKind::kRandomForest;
  std::vector<DecisionTree> trees;
  std::vector<double> tree_weights;
  double base_score = 0.0;
  EnsembleParams params;
  std::vector<std::string> feature_names;
  std::vector<double> feature_importances;

  std::size_t feature_count() const { return feature_names.size(); }
};

// Called after every AdaBoost round with the renormalised sample weights.
using AdaBoostObserver = std::function<void(std::size_t round, std::span<const double> weights)>;

namespace detail {

inline double sigmoid(double f) {
  if (f >= 0.0) return 1.0 / (1.0 + std::exp(-f));
  const double e = std::exp(f);
  return e / (1.0 + e);
}

inline std::vector<double> label_targets(const FeatureMatrix& m) {
  return {m.labels().begin(), m.labels().end()};
}

inline void check_trainable(const FeatureMatrix& m) {
  if (m.cols() == 0) throw Error(ErrorKind::kTraining, "feature matrix has no columns");
  if (m.count_label(0) == 0 || m.count_label(1) == 0) {
    throw Error(ErrorKind::kTraining, "training data must contain both classes");
  }
}

inline EnsembleModel start_model(LearnerKind kind, const FeatureMatrix& m, const EnsembleParams& params) {
  EnsembleModel model;
  model.kind = kind;
  model.params = params;
  model.feature_names = m.columns();
  return model;
}

inline std::vector<double> mean_importance(const EnsembleModel& model) {
  std::vector<double> imp(model.feature_count(), 0.0);
  for (const auto& t : model.trees) {
    const auto ti = tree_feature_importance(t);
    for (std::size_t f = 0; f < imp.size(); ++f) imp[f] += ti[f];
  }
  double total = 0.0;
  for (double v : imp) total += v;
  if (total > 0.0) {
    for (double& v : imp) v /= total;
  }
  return imp;
}

inline double prior_log_odds(const FeatureMatrix& m) {
  const double p = static_cast<double>(m.count_label(1)) / static_cast<double>(m.rows());
  return std::log(p / (1.0 - p));
}

inline void check_boosting(const EnsembleParams& p) {
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) {
    throw Error(ErrorKind::kConfig, "learning_rate must lie in (0, 1]");
  }
}

}  // namespace detail

inline EnsembleModel train_random_forest(const FeatureMatrix& m, EnsembleParams params, std::uint64_t seed) {
  detail::check_trainable(m);
  if (params.n_trees == 0) throw Error(ErrorKind::kConfig, "random forest needs at least one tree");
  if (params.mtry == 0) {
    params.mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m.cols())))));
  }
  auto model = detail::start_model(LearnerKind::kRandomForest, m, params);
  const auto targets = detail::label_targets(m);
  const auto view = m.view();
  TreeParams tp = params.tree;
  tp.mtry = params.mtry;
  model.trees.resize(params.n_trees);
  const ColumnOrder order(view);
  parallel_for(params.n_trees, params.threads, [&](std::size_t i) {
    const std::uint64_t tree_seed = derive_seed(seed, i);
    std::vector<std::size_t> sample;
    if (params.bootstrap) {
      Rng rng(derive_seed(tree_seed, 0));
      sample.resize(m.rows());
      for (auto& s : sample) s = rng.index(m.rows());
    }
    model.trees[i] = grow_tree(view, targets, TreeKind::kClassification, tp, derive_seed(tree_seed, 1), {}, sample, &order);
  });
  model.tree_weights.assign(params.n_trees, 1.0 / static_cast<double>(params.n_trees));
  model.feature_importances = detail::mean_importance(model);
  return model;
}

inline EnsembleModel train_gradient_boosting(const FeatureMatrix& m, const EnsembleParams& params,
                                             std::uint64_t seed) {
  detail::check_trainable(m);
  detail::check_boosting(params);
  auto model = detail::start_model(LearnerKind::kGradientBoosting, m, params);
  model.base_score = detail::prior_log_odds(m);
  const std::size_t n = m.rows();
  const auto view = m.view();
  std::vector<double> f(n, model.base_score), resid(n), p(n);
  const ColumnOrder order(view);
  for (std::size_t round = 0; round < params.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = detail::sigmoid(f[i]);
      resid[i] = m.labels()[i] - p[i];
    }
    auto tree = grow_tree(view, resid, TreeKind::kRegression, params.tree, derive_seed(seed, round), {}, {}, &order);
    std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
    std::vector<std::size_t> leaf(n);
    for (std::size_t i = 0; i < n; ++i) {
      leaf[i] = tree.leaf_index(m.row(i));
      num[leaf[i]] += resid[i];
      den[leaf[i]] += p[i] * (1.0 - p[i]);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (tree.nodes[k].is_leaf()) tree.nodes[k].value = den[k] > 1e-150 ? num[k] / den[k] : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) f[i] += params.learning_rate * tree.nodes[leaf[i]].value;
    model.trees.push_back(std::move(tree));
    model.tree_weights.push_back(params.learning_rate);
  }
  model.feature_importances = detail::mean_importance(model);
  return model;
}

inline EnsembleModel train_adaboost(const FeatureMatrix& m, const EnsembleParams& params, std::uint64_t seed,
                                    const AdaBoostObserver& observer = {}) {
  detail::check_trainable(m);
  if (params.n_trees == 0) throw Error(ErrorKind::kConfig, "adaboost needs at least one round");
  auto model = detail::start_model(LearnerKind::kAdaBoost, m, params);
  const std::size_t n = m.rows();
  const auto view = m.view();
  const auto targets = detail::label_targets(m);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<char> wrong(n);
  const ColumnOrder order(view);
  for (std::size_t round = 0; round < params.n_trees; ++round) {
    auto tree = grow_tree(view, targets, TreeKind::kClassification, params.tree, derive_seed(seed, round), w, {}, &order);
    double eps = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pr = tree.predict_proba(m.row(i));
      const int cls = pr[1] > pr[0] ? 1 : 0;
      wrong[i] = cls != m.labels()[i];
      if (wrong[i]) eps += w[i];
    }
    if (eps <= 0.0) {
      // perfect learner: keep it with unit weight and stop
      model.trees.push_back(std::move(tree));
      model.tree_weights.push_back(1.0);
      break;
    }
    if (eps >= 0.5) {
      // no better than chance; only kept when nothing else exists
      if (model.trees.empty()) {
        model.trees.push_back(std::move(tree));
        model.tree_weights.push_back(1.0);
      }
      break;
    }
    const double alpha = std::log((1.0 - eps) / eps);  // + ln(K - 1) = 0 for K = 2
    const double boost = std::exp(alpha);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (wrong[i]) w[i] *= boost;
      total += w[i];
    }
    for (auto& wi : w) wi /= total;
    model.trees.push_back(std::move(tree));
    model.tree_weights.push_back(alpha);
    if (observer) observer(round, w);
  }
  model.feature_importances = detail::mean_importance(model);
  return model;
}

inline EnsembleModel train_second_order_boosting(const FeatureMatrix& m, const EnsembleParams& params,
                                                 std::uint64_t seed) {
  detail::check_trainable(m);
  detail::check_boosting(params);
  if (params.lambda < 0.0 || params.gamma < 0.0) throw Error(ErrorKind::kConfig, "lambda and gamma must be >= 0");
  auto model = detail::start_model(LearnerKind::kSecondOrderBoosting, m, params);
  model.base_score = detail::prior_log_odds(m);
  const std::size_t n = m.rows();
  const auto view = m.view();
  std::vector<double> f(n, model.base_score), g(n), h(n);
  const ColumnOrder order(view);
  for (std::size_t round = 0; round < params.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = detail::sigmoid(f[i]);
      g[i] = p - m.labels()[i];
      h[i] = p * (1.0 - p);
    }
    auto tree = grow_newton_tree(view, g, h, {params.lambda, params.gamma}, params.tree, derive_seed(seed, round), {}, &order);
    for (std::size_t i = 0; i < n; ++i) f[i] += params.learning_rate * tree.predict_value(m.row(i));
    model.trees.push_back(std::move(tree));
    model.tree_weights.push_back(params.learning_rate);
  }
  model.feature_importances = detail::mean_importance(model);
  return model;
}

inline EnsembleModel train(LearnerKind kind, const FeatureMatrix& m, const EnsembleParams& params,
                           std::uint64_t seed) {
  switch (kind) {
    case LearnerKind::kRandomForest: return train_random_forest(m, params, seed);
    case LearnerKind::kGradientBoosting: return train_gradient_boosting(m, params, seed);
    case LearnerKind::kAdaBoost: return train_adaboost(m, params, seed);
    case LearnerKind::kSecondOrderBoosting: return train_second_order_boosting(m, params, seed);
  }
  throw Error(ErrorKind::kConfig, "unknown learner kind");
}

// Raw score before the probability mapping: log-odds for the boosted models,
// the normalised weighted vote margin in [-1, 1] for AdaBoost, and the mean
// positive-class frequency for the forest. `limit` truncates to the first
// trees (staged predictions).
inline double decision_function(const EnsembleModel& model, std::span<const double> row,
                                std::optional<std::size_t> limit = std::nullopt) {
  if (row.size() != model.feature_count()) {
    throw Error(ErrorKind::kDimension,
                strprintf("row has %zu features, model expects %zu", row.size(), model.feature_count()));
  }
  const std::size_t count = std::min(limit.value_or(model.trees.size()), model.trees.size());
  switch (model.kind) {
    case LearnerKind::kRandomForest: {
      double p1 = 0.0;
      for (std::size_t t = 0; t < count; ++t) p1 += model.trees[t].predict_proba(row)[1];
      return count ? p1 / static_cast<double>(count) : 0.5;
    }
    case LearnerKind::kAdaBoost: {
      double vote = 0.0, total = 0.0;
      for (std::size_t t = 0; t < count; ++t) {
        const auto pr = model.trees[t].predict_proba(row);
        vote += (pr[1] > pr[0] ? 1.0 : -1.0) * model.tree_weights[t];
        total += model.tree_weights[t];
      }
      return total > 0.0 ? vote / total : 0.0;
    }
    case LearnerKind::kGradientBoosting:
    case LearnerKind::kSecondOrderBoosting: {
      double f = model.base_score;
      for (std::size_t t = 0; t < count; ++t) f += model.tree_weights[t] * model.trees[t].predict_value(row);
      return f;
    }
  }
  return 0.0;
}

// (p0, p1) for one row.
inline std::array<double, 2> predict_proba(const EnsembleModel& model, std::span<const double> row) {
  const double d = decision_function(model, row);
  if (model.kind == LearnerKind::kRandomForest) return {1.0 - d, d};
  // SAMME maps the vote margin d through softmax(-d/2, d/2), i.e. sigmoid(d).
  return {detail::sigmoid(-d), detail::sigmoid(d)};
}

// Argmax with ties going to class 0.
inline int predict_class(const EnsembleModel& model, std::span<const double> row) {
  const auto p = predict_proba(model, row);
  return p[1] > p[0] ? 1 : 0;
}

inline std::vector<std::pair<std::string, double>> ensemble_gini_importance(const EnsembleModel& model) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t f = 0; f < model.feature_count(); ++f) {
    out.emplace_back(model.feature_names[f], model.feature_importances[f]);
  }
  return out;
}

// ------------------------------------------------------------
// JSON persistence
// ------------------------------------------------------------

inline nlohmann::json to_json(const EnsembleModel& model) {
  const auto& p = model.params;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(to_json(t));
  return {{"format", "earlydrop-ensemble/1"},
          {"kind", to_string(model.kind)},
          {"feature_names", model.feature_names},
          {"base_score", model.base_score},
          {"params",
           {{"n_trees", p.n_trees},
            {"mtry", p.mtry},
            {"bootstrap", p.bootstrap},
            {"learning_rate", p.learning_rate},
            {"lambda", p.lambda},
            {"gamma", p.gamma},
            {"max_depth", p.tree.max_depth},
            {"min_samples_leaf", p.tree.min_samples_leaf}}},
          {"tree_weights", model.tree_weights},
          {"feature_importances", model.feature_importances},
          {"trees", std::move(trees)}};
}

inline EnsembleModel model_from_json(const nlohmann::json& j) {
  try {
    EnsembleModel model;
    model.kind = parse_learner_kind(j.at("kind").get<std::string>());
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.base_score = j.at("base_score").get<double>();
    const auto& p = j.at("params");
    model.params.n_trees = p.at("n_trees").get<std::size_t>();
    model.params.mtry = p.at("mtry").get<std::size_t>();
    model.params.bootstrap = p.at("bootstrap").get<bool>();
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.lambda = p.at("lambda").get<double>();
    model.params.gamma = p.at("gamma").get<double>();
    model.params.tree.max_depth = p.at("max_depth").get<int>();
    model.params.tree.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
    model.tree_weights = j.at("tree_weights").get<std::vector<double>>();
    model.feature_importances = j.at("feature_importances").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) model.trees.push_back(tree_from_json(t));
    if (model.trees.size() != model.tree_weights.size()) {
      throw Error(ErrorKind::kSchema, "tree_weights and trees differ in length");
    }
    for (const auto& t : model.trees) {
      if (t.feature_count != model.feature_count()) throw Error(ErrorKind::kSchema, "tree feature count mismatch");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace earlydrop

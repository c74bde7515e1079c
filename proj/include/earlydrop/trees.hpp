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

// ------------------------------------------------------------
// CART binary trees
// ------------------------------------------------------------
//
// One recursive grower serves three split criteria:
//   gini      classification, weighted class counts
//   variance  regression on real targets (squared error)
//   newton    regression on gradient/hessian pairs with L2-regularised leaf
//             weights and a per-split penalty (second-order boosting)
//
// Thresholds are midpoints between adjacent distinct sorted values and rows
// go left iff value <= threshold. Among equal-scoring splits the lowest
// feature index wins, then the lowest threshold.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "matrix.hpp"

namespace earlydrop {

enum class TreeKind { kClassification, kRegression };
enum class SplitCriterion { kGini, kVariance, kNewton };

inline const char* to_string(SplitCriterion c) {
  switch (c) {
    case SplitCriterion::kGini: return "gini";
    case SplitCriterion::kVariance: return "variance";
    case SplitCriterion::kNewton: return "newton";
  }
  return "?";
}

// Splits scoring at or below this are treated as no improvement.
inline constexpr double kMinImpurityDecrease = 1e-12;
inline constexpr double kTieTolerance = 1e-12;

inline double gini_impurity(double count0, double count1) {
  if (count0 < 0.0 || count1 < 0.0) throw Error(ErrorKind::kDomain, "class counts must be nonnegative");
  const double n = count0 + count1;
  if (n <= 0.0) throw Error(ErrorKind::kDomain, "gini impurity of an empty node");
  const double p0 = count0 / n;
  const double p1 = count1 / n;
  return 1.0 - (p0 * p0 + p1 * p1);
}

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;  // gain for newton trees

  bool operator==(const SplitCandidate&) const = default;
};

struct TreeParams {
  int max_depth = 12;
  std::size_t min_samples_leaf = 5;
  std::size_t mtry = 0;  // features tried per node; 0 = all

  bool operator==(const TreeParams&) const = default;

  static TreeParams classification() { return {12, 5, 0}; }
  static TreeParams regression() { return {3, 5, 0}; }
};

struct NewtonParams {
  double lambda = 1.0;
  double gamma = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double impurity_decrease = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, 2> proba{0.0, 0.0};  // classification leaves
  double value = 0.0;                     // regression leaves (proba[1] for classification)
  std::size_t samples = 0;
  double weight = 0.0;  // sample weight mass reaching the node

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  TreeKind kind = TreeKind::kClassification;
  SplitCriterion criterion = SplitCriterion::kGini;
  std::size_t feature_count = 0;
  TreeParams params;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  bool operator==(const DecisionTree&) const = default;

  std::size_t leaf_index(std::span<const double> row) const {
    if (row.size() != feature_count) {
      throw Error(ErrorKind::kDimension,
                  strprintf("row has %zu features, tree expects %zu", row.size(), feature_count));
    }
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
  }

  std::array<double, 2> predict_proba(std::span<const double> row) const { return nodes[leaf_index(row)].proba; }
  double predict_value(std::span<const double> row) const { return nodes[leaf_index(row)].value; }

  int depth() const { return depth_from(0); }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

 private:
  int depth_from(std::size_t i) const {
    const auto& n = nodes[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
  }
};

// Row indices of every column sorted by (value, row). Built once per matrix
// and shared by all trees fitted on it.
class ColumnOrder {
 public:
  explicit ColumnOrder(MatrixView m) : rows_(m.rows), cols_(m.cols), order_(m.rows * m.cols) {
    for (std::size_t f = 0; f < cols_; ++f) {
      auto* col = order_.data() + f * rows_;
      for (std::size_t r = 0; r < rows_; ++r) col[r] = r;
      std::sort(col, col + rows_, [&](std::size_t a, std::size_t b) {
        const double va = m.at(a, f), vb = m.at(b, f);
        return va < vb || (va == vb && a < b);
      });
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const std::size_t> column(std::size_t f) const { return {order_.data() + f * rows_, rows_}; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::size_t> order_;
};

namespace detail {

struct GiniCriterion {
  std::span<const double> labels;
  std::span<const double> weights;

  struct Stats {
    double w0 = 0.0;
    double w1 = 0.0;
    double total() const { return w0 + w1; }
  };

  void add(Stats& s, std::size_t row) const {
    const double w = weights.empty() ? 1.0 : weights[row];
    (labels[row] > 0.5 ? s.w1 : s.w0) += w;
  }
  // weighted sums can cancel to -1e-17 or so
  Stats minus(const Stats& a, const Stats& b) const {
    return {std::max(0.0, a.w0 - b.w0), std::max(0.0, a.w1 - b.w1)};
  }
  bool pure(const Stats& s) const { return s.w0 <= 0.0 || s.w1 <= 0.0; }
  double mass(const Stats& s) const { return s.total(); }

  double score(const Stats& parent, const Stats& left, const Stats& right) const {
    const double n = parent.total();
    const double nl = left.total();
    const double nr = right.total();
    if (nl <= 0.0 || nr <= 0.0) return 0.0;
    return gini_impurity(parent.w0, parent.w1) - (nl / n) * gini_impurity(left.w0, left.w1) -
           (nr / n) * gini_impurity(right.w0, right.w1);
  }
  bool accept(double score) const { return score > kMinImpurityDecrease; }

  void fill_leaf(TreeNode& node, const Stats& s) const {
    const double n = s.total();
    node.proba = n > 0.0 ? std::array<double, 2>{s.w0 / n, s.w1 / n} : std::array<double, 2>{0.5, 0.5};
    node.value = node.proba[1];
  }
};

struct VarianceCriterion {
  std::span<const double> targets;
  std::span<const double> weights;

  struct Stats {
    double w = 0.0;
    double sum = 0.0;
  };

  void add(Stats& s, std::size_t row) const {
    const double w = weights.empty() ? 1.0 : weights[row];
    s.w += w;
    s.sum += w * targets[row];
  }
  Stats minus(const Stats& a, const Stats& b) const { return {a.w - b.w, a.sum - b.sum}; }
  bool pure(const Stats&) const { return false; }
  double mass(const Stats& s) const { return s.w; }

  // Reduction in weighted mean squared error.
  double score(const Stats& parent, const Stats& left, const Stats& right) const {
    if (left.w <= 0.0 || right.w <= 0.0) return 0.0;
    return (left.sum * left.sum / left.w + right.sum * right.sum / right.w - parent.sum * parent.sum / parent.w) /
           parent.w;
  }
  bool accept(double score) const { return score > kMinImpurityDecrease; }

  void fill_leaf(TreeNode& node, const Stats& s) const { node.value = s.w > 0.0 ? s.sum / s.w : 0.0; }
};

struct NewtonCriterion {
  std::span<const double> grad;
  std::span<const double> hess;
  NewtonParams reg;

  struct Stats {
    double g = 0.0;
    double h = 0.0;
  };

  void add(Stats& s, std::size_t row) const {
    s.g += grad[row];
    s.h += hess[row];
  }
  Stats minus(const Stats& a, const Stats& b) const { return {a.g - b.g, a.h - b.h}; }
  bool pure(const Stats&) const { return false; }
  double mass(const Stats& s) const { return s.h; }

  double term(const Stats& s) const {
    const double denom = s.h + reg.lambda;
    return denom > 0.0 ? s.g * s.g / denom : 0.0;
  }
  double score(const Stats& parent, const Stats& left, const Stats& right) const {
    return 0.5 * (term(left) + term(right) - term(parent)) - reg.gamma;
  }
  bool accept(double score) const { return score > 0.0; }

  void fill_leaf(TreeNode& node, const Stats& s) const {
    const double denom = s.h + reg.lambda;
    node.value = denom > 0.0 ? -s.g / denom : 0.0;
  }
};

// Each feature keeps the node's samples in (value, row) order, laid out as
// one contiguous segment per node; a split stably partitions every segment,
// so children stay sorted without re-sorting.
template <typename Criterion>
class TreeGrower {
 public:
  TreeGrower(MatrixView rows, const Criterion& crit, const TreeParams& params, std::uint64_t seed,
             const ColumnOrder* shared = nullptr)
      : rows_(rows), crit_(crit), params_(params), rng_(seed), shared_(shared) {
    if (shared_ && (shared_->rows() != rows.rows || shared_->cols() != rows.cols)) {
      throw Error(ErrorKind::kDimension, "column order was built for a different matrix");
    }
  }

  DecisionTree grow(std::vector<std::size_t> samples, TreeKind kind, SplitCriterion criterion) {
    DecisionTree tree;
    tree.kind = kind;
    tree.criterion = criterion;
    tree.feature_count = rows_.cols;
    tree.params = params_;
    nodes_.clear();
    presort(samples);
    build(std::move(samples), 0, 0);
    tree.nodes = std::move(nodes_);
    return tree;
  }

  // Best split of `samples` taken as a single root node.
  std::optional<SplitCandidate> root_split(const std::vector<std::size_t>& samples) {
    presort(samples);
    return find_split(0, samples.size(), stats_of(samples));
  }

  typename Criterion::Stats stats_of(std::span<const std::size_t> samples) const {
    typename Criterion::Stats s{};
    for (std::size_t i : samples) crit_.add(s, i);
    return s;
  }

 private:
  // The sorted multiset is the shared column order with each row repeated
  // as often as it occurs in `samples`.
  void presort(std::span<const std::size_t> samples) {
    if (!shared_) {
      local_.emplace(rows_);
      shared_ = &*local_;
    }
    n_ = samples.size();
    order_.resize(rows_.cols * n_);
    multiplicity_.assign(rows_.rows, 0);
    for (std::size_t s : samples) ++multiplicity_[s];
    for (std::size_t f = 0; f < rows_.cols; ++f) {
      auto* seg = order_.data() + f * n_;
      for (std::size_t r : shared_->column(f)) {
        for (std::uint32_t k = 0; k < multiplicity_[r]; ++k) *seg++ = r;
      }
    }
    goes_left_.assign(rows_.rows, 0);
    scratch_.resize(n_);
  }

  std::optional<SplitCandidate> find_split(std::size_t lo, std::size_t hi, const typename Criterion::Stats& parent) {
    const std::size_t n = hi - lo;
    const std::size_t msl = std::max<std::size_t>(params_.min_samples_leaf, 1);
    if (n < 2 * msl || crit_.pure(parent)) return std::nullopt;

    std::optional<SplitCandidate> best;
    double best_score = 0.0;
    for (std::size_t f : candidate_features()) {
      const std::size_t* seg = order_.data() + f * n_ + lo;
      typename Criterion::Stats left{};
      for (std::size_t i = 0; i + 1 < n; ++i) {
        crit_.add(left, seg[i]);
        const double v = rows_.at(seg[i], f);
        const double next = rows_.at(seg[i + 1], f);
        if (v == next) continue;
        const std::size_t nl = i + 1;
        if (nl < msl || n - nl < msl) continue;
        const auto right = crit_.minus(parent, left);
        const double score = crit_.score(parent, left, right);
        if (!crit_.accept(score)) continue;
        // scores within rounding of the best count as ties, which keep the earlier candidate
        if (!best || score > best_score + kTieTolerance * std::max(1.0, std::abs(best_score))) {
          best_score = score;
          best = SplitCandidate{f, midpoint(v, next), score};
        }
      }
    }
    return best;
  }

  static double midpoint(double a, double b) {
    const double m = (a + b) / 2.0;
    return m < b ? m : a;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> all(rows_.cols);
    for (std::size_t f = 0; f < rows_.cols; ++f) all[f] = f;
    if (params_.mtry == 0 || params_.mtry >= rows_.cols) return all;
    // partial Fisher-Yates, then ascending so tie-breaking stays by index
    for (std::size_t i = 0; i < params_.mtry; ++i) {
      std::swap(all[i], all[i + rng_.index(all.size() - i)]);
    }
    all.resize(params_.mtry);
    std::sort(all.begin(), all.end());
    return all;
  }

  // `samples` is the node's multiset in arrival order; its sorted copies live
  // in order_[f * n_ + lo, f * n_ + lo + samples.size()).
  int build(std::vector<std::size_t> samples, std::size_t lo, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const auto stats = stats_of(samples);
    const std::size_t hi = lo + samples.size();
    {
      auto& node = nodes_.back();
      node.samples = samples.size();
      node.weight = crit_.mass(stats);
    }
    std::optional<SplitCandidate> split;
    if (depth < params_.max_depth) split = find_split(lo, hi, stats);
    if (!split) {
      crit_.fill_leaf(nodes_[static_cast<std::size_t>(id)], stats);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) {
      const bool l = rows_.at(s, split->feature) <= split->threshold;
      goes_left_[s] = l ? 1 : 0;
      (l ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    for (std::size_t f = 0; f < rows_.cols; ++f) {
      std::size_t* seg = order_.data() + f * n_ + lo;
      std::size_t nl = 0, nr = 0;
      for (std::size_t i = 0; i < hi - lo; ++i) {
        if (goes_left_[seg[i]]) {
          seg[nl++] = seg[i];
        } else {
          scratch_[nr++] = seg[i];
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(nr), seg + nl);
    }
    {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      node.feature = static_cast<int>(split->feature);
      node.threshold = split->threshold;
      node.impurity_decrease = split->impurity_decrease;
    }
    const std::size_t mid = lo + left.size();
    const int l = build(std::move(left), lo, depth + 1);
    const int r = build(std::move(right), mid, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  MatrixView rows_;
  Criterion crit_;
  TreeParams params_;
  Rng rng_;
  const ColumnOrder* shared_;
  std::optional<ColumnOrder> local_;
  std::vector<TreeNode> nodes_;
  std::size_t n_ = 0;
  std::vector<std::uint32_t> multiplicity_;
  std::vector<std::size_t> order_;
  std::vector<unsigned char> goes_left_;
  std::vector<std::size_t> scratch_;
};

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline void check_aligned(MatrixView rows, std::span<const double> a, const char* what) {
  if (a.size() != rows.rows) {
    throw Error(ErrorKind::kDimension, strprintf("%s has %zu entries for %zu rows", what, a.size(), rows.rows));
  }
}

inline std::vector<std::size_t> resolve_samples(MatrixView rows, std::span<const std::size_t> sample_rows) {
  if (sample_rows.empty()) return all_rows(rows.rows);
  for (std::size_t i : sample_rows) {
    if (i >= rows.rows) throw Error(ErrorKind::kDimension, "sample row index out of range");
  }
  return {sample_rows.begin(), sample_rows.end()};
}

}  // namespace detail

// Best (feature, threshold) over all rows, or nullopt when no split improves
// the node or every split would leave a child under min_samples_leaf.
// Classification targets are 0/1.
inline std::optional<SplitCandidate> best_split(MatrixView rows, std::span<const double> targets, TreeKind kind,
                                                std::size_t min_samples_leaf = 1) {
  detail::check_aligned(rows, targets, "targets");
  if (rows.rows < 2 || rows.cols < 1) return std::nullopt;
  TreeParams params{1, min_samples_leaf, 0};
  const auto samples = detail::all_rows(rows.rows);
  if (kind == TreeKind::kClassification) {
    detail::TreeGrower<detail::GiniCriterion> g(rows, {targets, {}}, params, 0);
    return g.root_split(samples);
  }
  detail::TreeGrower<detail::VarianceCriterion> g(rows, {targets, {}}, params, 0);
  return g.root_split(samples);
}

// Grows one tree. `sample_rows` (may repeat rows; empty = every row) selects
// the training multiset; `sample_weights`, when given, is indexed by row.
// `order` may carry a ColumnOrder of `rows` to skip the per-tree sort.
inline DecisionTree grow_tree(MatrixView rows, std::span<const double> targets, TreeKind kind,
                              const TreeParams& params, std::uint64_t seed = 0,
                              std::span<const double> sample_weights = {},
                              std::span<const std::size_t> sample_rows = {}, const ColumnOrder* order = nullptr) {
  detail::check_aligned(rows, targets, "targets");
  if (!sample_weights.empty()) detail::check_aligned(rows, sample_weights, "sample weights");
  if (rows.rows == 0) throw Error(ErrorKind::kDimension, "cannot grow a tree on zero rows");
  if (params.max_depth < 0) throw Error(ErrorKind::kConfig, "max_depth must be >= 0");
  auto samples = detail::resolve_samples(rows, sample_rows);
  if (kind == TreeKind::kClassification) {
    detail::TreeGrower<detail::GiniCriterion> g(rows, {targets, sample_weights}, params, seed, order);
    return g.grow(std::move(samples), kind, SplitCriterion::kGini);
  }
  detail::TreeGrower<detail::VarianceCriterion> g(rows, {targets, sample_weights}, params, seed, order);
  return g.grow(std::move(samples), kind, SplitCriterion::kVariance);
}

// Regression tree on per-row gradients/hessians: split gain
// 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma, leaf weight -G/(H+l).
inline DecisionTree grow_newton_tree(MatrixView rows, std::span<const double> grad, std::span<const double> hess,
                                     const NewtonParams& reg, const TreeParams& params, std::uint64_t seed = 0,
                                     std::span<const std::size_t> sample_rows = {},
                                     const ColumnOrder* order = nullptr) {
  detail::check_aligned(rows, grad, "gradients");
  detail::check_aligned(rows, hess, "hessians");
  if (rows.rows == 0) throw Error(ErrorKind::kDimension, "cannot grow a tree on zero rows");
  if (reg.lambda < 0.0 || reg.gamma < 0.0) throw Error(ErrorKind::kConfig, "lambda and gamma must be >= 0");
  detail::TreeGrower<detail::NewtonCriterion> g(rows, {grad, hess, reg}, params, seed, order);
  return g.grow(detail::resolve_samples(rows, sample_rows), TreeKind::kRegression, SplitCriterion::kNewton);
}

// Impurity-decrease importance weighted by the fraction of training mass at
// each split (plain summed gain for newton trees), normalised to sum to 1.
inline std::vector<double> tree_feature_importance(const DecisionTree& tree) {
  std::vector<double> imp(tree.feature_count, 0.0);
  if (tree.nodes.empty()) return imp;
  const double root = tree.nodes[0].weight;
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) continue;
    const double frac = tree.criterion == SplitCriterion::kNewton || root <= 0.0 ? 1.0 : n.weight / root;
    imp[static_cast<std::size_t>(n.feature)] += frac * n.impurity_decrease;
  }
  double total = 0.0;
  for (double v : imp) total += v;
  if (total > 0.0) {
    for (double& v : imp) v /= total;
  }
  return imp;
}

// ------------------------------------------------------------
// JSON: nested node objects
// ------------------------------------------------------------

namespace detail {

inline nlohmann::json node_to_json(const DecisionTree& t, std::size_t i) {
  const auto& n = t.nodes[i];
  nlohmann::json j = {{"samples", n.samples}, {"weight", n.weight}};
  if (n.is_leaf()) {
    if (t.kind == TreeKind::kClassification) j["proba"] = {n.proba[0], n.proba[1]};
    j["value"] = n.value;
    return j;
  }
  j["feature"] = n.feature;
  j["threshold"] = n.threshold;
  j["decrease"] = n.impurity_decrease;
  j["left"] = node_to_json(t, static_cast<std::size_t>(n.left));
  j["right"] = node_to_json(t, static_cast<std::size_t>(n.right));
  return j;
}

inline int node_from_json(DecisionTree& t, const nlohmann::json& j) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  TreeNode n;
  n.samples = j.at("samples").get<std::size_t>();
  n.weight = j.at("weight").get<double>();
  if (j.contains("feature")) {
    n.feature = j.at("feature").get<int>();
    if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= t.feature_count) {
      throw Error(ErrorKind::kSchema, "tree node feature index out of range");
    }
    n.threshold = j.at("threshold").get<double>();
    n.impurity_decrease = j.at("decrease").get<double>();
    t.nodes[static_cast<std::size_t>(id)] = n;
    const int l = node_from_json(t, j.at("left"));
    const int r = node_from_json(t, j.at("right"));
    t.nodes[static_cast<std::size_t>(id)].left = l;
    t.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
  if (j.contains("proba")) n.proba = {j.at("proba").at(0).get<double>(), j.at("proba").at(1).get<double>()};
  n.value = j.at("value").get<double>();
  t.nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

}  // namespace detail

inline nlohmann::json to_json(const DecisionTree& tree) {
  return {{"kind", tree.kind == TreeKind::kClassification ? "classification" : "regression"},
          {"criterion", to_string(tree.criterion)},
          {"feature_count", tree.feature_count},
          {"max_depth", tree.params.max_depth},
          {"min_samples_leaf", tree.params.min_samples_leaf},
          {"mtry", tree.params.mtry},
          {"root", detail::node_to_json(tree, 0)}};
}

inline DecisionTree tree_from_json(const nlohmann::json& j) {
  DecisionTree t;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "classification") {
    t.kind = TreeKind::kClassification;
  } else if (kind == "regression") {
    t.kind = TreeKind::kRegression;
  } else {
    throw Error(ErrorKind::kSchema, "unknown tree kind '" + kind + "'");
  }
  const auto crit = j.at("criterion").get<std::string>();
  if (crit == "gini") {
    t.criterion = SplitCriterion::kGini;
  } else if (crit == "variance") {
    t.criterion = SplitCriterion::kVariance;
  } else if (crit == "newton") {
    t.criterion = SplitCriterion::kNewton;
  } else {
    throw Error(ErrorKind::kSchema, "unknown split criterion '" + crit + "'");
  }
  t.feature_count = j.at("feature_count").get<std::size_t>();
  t.params.max_depth = j.at("max_depth").get<int>();
  t.params.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  t.params.mtry = j.at("mtry").get<std::size_t>();
  detail::node_from_json(t, j.at("root"));
  return t;
}

}  // namespace earlydrop

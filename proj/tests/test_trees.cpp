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

#include <random>

#include "test_support.hpp"

namespace earlydrop {
namespace {

struct Data {
  std::vector<double> values;  // row-major
  std::size_t rows = 0, cols = 0;
  std::vector<double> y;

  MatrixView view() const { return {values, rows, cols}; }
  std::vector<std::vector<double>> nested() const {
    std::vector<std::vector<double>> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r].assign(values.begin() + r * cols, values.begin() + (r + 1) * cols);
    return out;
  }
};

Data make(std::vector<std::vector<double>> x, std::vector<double> y) {
  Data d;
  d.rows = x.size();
  d.cols = x.front().size();
  for (auto& r : x) d.values.insert(d.values.end(), r.begin(), r.end());
  d.y = std::move(y);
  return d;
}

// ---- gini_impurity ----

TEST(Gini, Values) {
  EXPECT_EQ(gini_impurity(5, 5), 0.5);
  EXPECT_EQ(gini_impurity(7, 0), 0.0);
  EXPECT_DOUBLE_EQ(gini_impurity(3, 1), 1.0 - (9.0 / 16 + 1.0 / 16));
  EXPECT_DOUBLE_EQ(gini_impurity(3, 1), 0.375);
}

TEST(Gini, SymmetricAndPeakedAtBalance) {
  for (int a = 0; a <= 20; ++a) {
    for (int b = 0; b <= 20; ++b) {
      if (a + b == 0) continue;
      EXPECT_EQ(gini_impurity(a, b), gini_impurity(b, a));
      EXPECT_LE(gini_impurity(a, b), gini_impurity((a + b) / 2.0, (a + b) / 2.0) + 1e-15);
      EXPECT_GE(gini_impurity(a, b), 0.0);
      EXPECT_LE(gini_impurity(a, b), 0.5);
    }
  }
}

TEST(Gini, EmptyNodeIsDomainError) {
  try {
    gini_impurity(0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

// ---- best_split ----

TEST(BestSplit, MidpointOfGap) {
  const auto d = make({{1}, {2}, {10}, {11}}, {0, 0, 1, 1});
  // brute force over the three candidate thresholds
  const auto oracle = testing_support::oracle_best_split(d.nested(), d.y, true, 1);
  const auto s = best_split(d.view(), d.y, TreeKind::kClassification);
  ASSERT_TRUE(s && oracle);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_EQ(s->threshold, 6.0);
  EXPECT_EQ(oracle->threshold, 6.0);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 0.5);
  EXPECT_DOUBLE_EQ(oracle->decrease, 0.5);
}

TEST(BestSplit, ConstantTargetHasNoSplit) {
  const auto d = make({{1, 4}, {2, 3}, {3, 2}, {4, 1}}, {1, 1, 1, 1});
  EXPECT_FALSE(best_split(d.view(), d.y, TreeKind::kClassification));
  EXPECT_FALSE(best_split(d.view(), d.y, TreeKind::kRegression));
}

TEST(BestSplit, PicksTheSeparatingFeature) {
  const auto d = make({{5, 1}, {1, 2}, {4, 3}, {2, 4}, {3, 5}, {6, 6}}, {1, 0, 1, 0, 0, 1});
  const auto oracle = testing_support::oracle_best_split(d.nested(), d.y, true, 1);
  const auto s = best_split(d.view(), d.y, TreeKind::kClassification);
  ASSERT_TRUE(s && oracle);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_EQ(oracle->feature, 0u);
  EXPECT_EQ(s->threshold, 3.5);
}

TEST(BestSplit, TiesGoToLowestFeatureThenThreshold) {
  // both features separate identically
  const auto d = make({{1, 1}, {2, 2}, {3, 3}, {4, 4}}, {0, 0, 1, 1});
  auto s = best_split(d.view(), d.y, TreeKind::kClassification);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  // symmetric labels give equal decrease at 1.5 and 3.5 on one feature
  const auto e = make({{1}, {2}, {3}, {4}}, {1, 0, 0, 1});
  s = best_split(e.view(), e.y, TreeKind::kClassification);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 1.5);
}

TEST(BestSplit, MinSamplesLeafCanForbidEverySplit) {
  const auto d = make({{1}, {2}, {3}}, {0, 1, 1});
  EXPECT_TRUE(best_split(d.view(), d.y, TreeKind::kClassification, 1));
  EXPECT_FALSE(best_split(d.view(), d.y, TreeKind::kClassification, 2));
}

TEST(BestSplit, MatchesExhaustiveEnumerationOnRandomFixtures) {
  std::mt19937_64 gen(12345);
  for (int fixture = 0; fixture < 300; ++fixture) {
    const std::size_t n = 2 + gen() % 11, dcols = 1 + gen() % 3, msl = 1 + gen() % 3;
    const bool classification = fixture % 2 == 0;
    std::vector<std::vector<double>> x(n, std::vector<double>(dcols));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = static_cast<double>(gen() % 5);
      y[i] = classification ? static_cast<double>(gen() % 2) : static_cast<double>(gen() % 7) * 0.5;
    }
    const auto d = make(x, y);
    const auto kind = classification ? TreeKind::kClassification : TreeKind::kRegression;
    const auto got = best_split(d.view(), d.y, kind, msl);
    const auto want = testing_support::oracle_best_split(x, y, classification, msl);
    ASSERT_EQ(got.has_value(), want.has_value()) << "fixture " << fixture;
    if (!got) continue;
    EXPECT_EQ(got->feature, want->feature) << "fixture " << fixture;
    EXPECT_EQ(got->threshold, want->threshold) << "fixture " << fixture;
    EXPECT_NEAR(got->impurity_decrease, want->decrease, 1e-12) << "fixture " << fixture;
  }
}

// ---- grow_tree ----

TEST(GrowTree, StumpSeparatesLinearData) {
  const auto d = make({{0.5}, {1.5}, {2.0}, {7.0}, {8.5}, {9.0}}, {0, 0, 0, 1, 1, 1});
  TreeParams p{1, 1, 0};
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, p);
  EXPECT_EQ(t.depth(), 1);
  // training accuracy by direct routing
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto pr = t.predict_proba(d.view().row(r));
    EXPECT_EQ(pr[1] > pr[0] ? 1.0 : 0.0, d.y[r]);
  }
}

TEST(GrowTree, DepthZeroIsSingleLeaf) {
  const auto d = make({{1}, {2}, {3}, {4}, {5}}, {1, 0, 1, 1, 0});
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {0, 1, 0});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].proba[1], 0.6);
  std::vector<double> yr = {1, 2, 3, 4, 10};
  const auto r = grow_tree(d.view(), yr, TreeKind::kRegression, {0, 1, 0});
  ASSERT_EQ(r.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(r.nodes[0].value, 4.0);
}

TEST(GrowTree, MisalignedTargetsIsDimensionError) {
  const auto d = make({{1}, {2}, {3}}, {0, 1, 1});
  std::vector<double> y = {0, 1};
  try {
    grow_tree(d.view(), y, TreeKind::kClassification, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

Data random_data(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 gen(seed);
  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (auto& v : x[i]) {
      v = static_cast<double>(gen() % 1000) / 10.0;
      s += v;
    }
    y[i] = (s + static_cast<double>(gen() % 200) > 100.0 * static_cast<double>(d)) ? 1.0 : 0.0;
  }
  return make(x, y);
}

TEST(GrowTree, DeterministicUnderSeed) {
  const auto d = random_data(7, 200, 4);
  TreeParams p{6, 2, 2};
  EXPECT_EQ(grow_tree(d.view(), d.y, TreeKind::kClassification, p, 99),
            grow_tree(d.view(), d.y, TreeKind::kClassification, p, 99));
  p.mtry = 4;
  EXPECT_EQ(grow_tree(d.view(), d.y, TreeKind::kClassification, p, 1),
            grow_tree(d.view(), d.y, TreeKind::kClassification, p, 2));
}

TEST(GrowTree, RespectsDepthAndLeafSize) {
  const auto d = random_data(8, 300, 3);
  for (int depth : {1, 3, 5}) {
    for (std::size_t msl : {1u, 5u, 20u}) {
      const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {depth, msl, 0});
      EXPECT_LE(t.depth(), depth);
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) {
          EXPECT_GE(n.samples, msl);
          EXPECT_GE(n.proba[0], 0.0);
          EXPECT_GE(n.proba[1], 0.0);
          EXPECT_NEAR(n.proba[0] + n.proba[1], 1.0, 1e-15);
        }
      }
    }
  }
}

TEST(GrowTree, RegressionLeafIsMeanOfItsTargets) {
  auto d = random_data(9, 150, 2);
  std::mt19937_64 gen(3);
  for (auto& v : d.y) v = static_cast<double>(gen() % 1000) / 7.0;
  const auto t = grow_tree(d.view(), d.y, TreeKind::kRegression, {3, 5, 0});
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (std::size_t r = 0; r < d.rows; ++r) {
    auto& [sum, cnt] = acc[t.leaf_index(d.view().row(r))];
    sum += d.y[r];
    ++cnt;
  }
  for (const auto& [leaf, sc] : acc) {
    EXPECT_NEAR(t.nodes[leaf].value, sc.first / static_cast<double>(sc.second), 1e-12);
    EXPECT_EQ(t.nodes[leaf].samples, sc.second);
  }
}

TEST(GrowTree, RootMatchesBestSplit) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = random_data(seed, 40, 3);
    const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {4, 1, 0});
    const auto s = best_split(d.view(), d.y, TreeKind::kClassification, 1);
    if (!s) {
      EXPECT_TRUE(t.nodes[0].is_leaf());
      continue;
    }
    EXPECT_EQ(t.nodes[0].feature, static_cast<int>(s->feature));
    EXPECT_EQ(t.nodes[0].threshold, s->threshold);
  }
}

TEST(GrowTree, SampleRowsActAsMultiset) {
  const auto d = random_data(10, 60, 2);
  std::vector<std::size_t> rows;
  std::vector<double> w(d.rows, 1.0);
  for (std::size_t i = 0; i < d.rows; ++i) {
    rows.push_back(i);
    if (i % 3 == 0) {
      rows.push_back(i);
      w[i] = 2.0;
    }
  }
  // duplicated rows and doubled weights describe the same training set
  const TreeParams p{4, 1, 0};
  const auto a = grow_tree(d.view(), d.y, TreeKind::kClassification, p, 0, {}, rows);
  const auto b = grow_tree(d.view(), d.y, TreeKind::kClassification, p, 0, w);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
  }
}

// ---- predict ----

TEST(Predict, RoutesLeftOnLessOrEqual) {
  const auto d = make({{1}, {2}, {10}, {11}}, {0, 0, 1, 1});
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {1, 1, 0});
  ASSERT_EQ(t.nodes[0].threshold, 6.0);
  const std::vector<double> two = {2.0}, six = {6.0}, above = {6.0000001};
  EXPECT_EQ(t.predict_proba(two), (std::array<double, 2>{1.0, 0.0}));
  EXPECT_EQ(t.predict_proba(six), (std::array<double, 2>{1.0, 0.0}));
  EXPECT_EQ(t.predict_proba(above), (std::array<double, 2>{0.0, 1.0}));
}

TEST(Predict, SingleLeafAnswersEveryRow) {
  const auto d = make({{1}, {2}}, {1, 1});
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {});
  for (double v : {-1e9, 0.0, 3.0, 1e9}) {
    const std::vector<double> row = {v};
    EXPECT_EQ(t.predict_proba(row), (std::array<double, 2>{0.0, 1.0}));
  }
}

TEST(Predict, WrongWidthIsDimensionError) {
  const auto d = make({{1, 2}, {2, 1}}, {0, 1});
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {1, 1, 0});
  const std::vector<double> row = {1.0};
  try {
    t.predict_proba(row);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

// ---- importance ----

TEST(Importance, LeafOnlyIsZero) {
  const auto d = make({{1, 2}, {2, 3}}, {1, 1});
  const auto imp = tree_feature_importance(grow_tree(d.view(), d.y, TreeKind::kClassification, {}));
  EXPECT_EQ(imp, (std::vector<double>{0.0, 0.0}));
}

TEST(Importance, StumpIsOneHot) {
  // only feature 2 orders the labels
  const auto d = make({{5, 4, 1}, {5, 2, 2}, {5, 3, 8}, {5, 1, 9}}, {0, 0, 1, 1});
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {1, 1, 0});
  ASSERT_EQ(t.nodes[0].feature, 2);
  EXPECT_EQ(tree_feature_importance(t), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Importance, DepthTwoMatchesHandComputation) {
  // x0 splits {0,0,0,1 | 1,1}, then x1 cleans the left side
  const auto d = make({{1, 1}, {2, 1}, {3, 1}, {4, 5}, {5, 1}, {6, 1}}, {0, 0, 0, 1, 1, 1});
  const auto t = grow_tree(d.view(), d.y, TreeKind::kClassification, {2, 1, 0});
  // root: x0 <= 3.5 splits 3/3 perfectly, so the tree is a stump
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_EQ(tree_feature_importance(t), (std::vector<double>{1.0, 0.0}));

  const auto h = make({{1, 1}, {2, 1}, {3, 5}, {4, 1}, {5, 1}, {6, 1}}, {0, 0, 1, 0, 1, 1});
  const auto g = grow_tree(h.view(), h.y, TreeKind::kClassification, {2, 1, 0});
  // hand computation: walk every internal node, weight = n_node / 6
  std::vector<double> want(2, 0.0);
  std::function<void(int, std::vector<std::size_t>)> walk = [&](int id, std::vector<std::size_t> rows) {
    const auto& n = g.nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return;
    std::vector<std::size_t> l, r;
    double c[2] = {0, 0}, cl[2] = {0, 0}, cr[2] = {0, 0};
    for (auto i : rows) {
      const bool left = h.values[i * 2 + static_cast<std::size_t>(n.feature)] <= n.threshold;
      (left ? l : r).push_back(i);
      c[static_cast<int>(h.y[i])] += 1;
      (left ? cl : cr)[static_cast<int>(h.y[i])] += 1;
    }
    const double nn = static_cast<double>(rows.size());
    const double dec = testing_support::oracle_gini(c[0], c[1]) -
                       static_cast<double>(l.size()) / nn * testing_support::oracle_gini(cl[0], cl[1]) -
                       static_cast<double>(r.size()) / nn * testing_support::oracle_gini(cr[0], cr[1]);
    want[static_cast<std::size_t>(n.feature)] += nn / 6.0 * dec;
    walk(n.left, l);
    walk(n.right, r);
  };
  walk(0, {0, 1, 2, 3, 4, 5});
  const double total = want[0] + want[1];
  ASSERT_GT(total, 0.0);
  const auto imp = tree_feature_importance(g);
  EXPECT_NEAR(imp[0], want[0] / total, 1e-12);
  EXPECT_NEAR(imp[1], want[1] / total, 1e-12);
}

TEST(Importance, NonNegativeAndNormalised) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = random_data(seed + 100, 120, 3);
    const auto imp = tree_feature_importance(grow_tree(d.view(), d.y, TreeKind::kClassification, {5, 2, 0}));
    double s = 0.0;
    for (double v : imp) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

// ---- newton trees ----

TEST(NewtonTree, LeafWeightIsMinusGOverHPlusLambda) {
  const auto d = make({{1}, {1}, {1}}, {0, 0, 0});
  std::vector<double> g = {-1.0, -0.5, -0.5}, h = {1.0, 1.0, 1.0};
  const auto t = grow_newton_tree(d.view(), g, h, {1.0, 0.0}, {3, 1, 0});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].value, 0.5);  // G = -2, H = 3
}

TEST(NewtonTree, LargeGammaBlocksEverySplit) {
  const auto d = random_data(4, 80, 2);
  std::vector<double> g(d.rows), h(d.rows, 0.25);
  for (std::size_t i = 0; i < d.rows; ++i) g[i] = 0.5 - d.y[i];
  const auto t = grow_newton_tree(d.view(), g, h, {1.0, 1e6}, {3, 1, 0});
  EXPECT_EQ(t.nodes.size(), 1u);
  const auto free = grow_newton_tree(d.view(), g, h, {1.0, 0.0}, {3, 1, 0});
  EXPECT_GT(free.nodes.size(), 1u);
}

// ---- persistence ----

TEST(TreeJson, RoundTripIsExact) {
  const auto d = random_data(21, 100, 3);
  for (auto kind : {TreeKind::kClassification, TreeKind::kRegression}) {
    const auto t = grow_tree(d.view(), d.y, kind, {5, 2, 2}, 17);
    const auto back = tree_from_json(nlohmann::json::parse(to_json(t).dump()));
    EXPECT_EQ(back, t);
  }
}

TEST(TreeJson, RejectsUnknownKind) {
  auto j = to_json(grow_tree(make({{1}, {2}}, {0, 1}).view(), std::vector<double>{0, 1}, TreeKind::kClassification, {}));
  j["kind"] = "bush";
  try {
    tree_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
}

}  // namespace
}  // namespace earlydrop

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
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "cohort.hpp"
#include "common.hpp"
#include "csv.hpp"

namespace earlydrop {

enum class Group { kCompleter, kNonCompleter };

inline const char* to_string(Group g) { return g == Group::kCompleter ? "completer" : "non-completer"; }

struct GroupSample {
  Group group = Group::kCompleter;
  std::vector<double> values;  // seconds

  void validate() const {
    if (values.empty()) throw Error(ErrorKind::kSample, std::string(to_string(group)) + " sample is empty");
    for (double v : values) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kSample, "sample values must be finite");
    }
  }
};

namespace detail {

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
  return boost::math::quantile(std_normal, p);
}

inline double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace detail

// ------------------------------------------------------------
// Shapiro-Wilk (Royston 1995, AS R94)
// ------------------------------------------------------------

inline constexpr std::size_t kShapiroMaxN = 5000;

struct ShapiroResult {
  double w = 1.0;
  double p = 1.0;
  std::size_t n = 0;                          // sample size actually tested
  std::optional<std::uint64_t> subsample_seed;  // set when n was capped at 5000
};

// Positive coefficients a_1..a_{n/2}; x_(n+1-i) is weighted by a_i and x_(i)
// by -a_i.
inline std::vector<double> shapiro_coefficients(std::size_t n) {
  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  const double an25 = static_cast<double>(n) + 0.25;
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    // m_i = Phi^-1((i - 3/8)/(n + 1/4)), negative for the lower half
    a[i] = detail::normal_quantile((static_cast<double>(i + 1) - 0.375) / an25);
    summ2 += a[i] * a[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
  const double a1 = detail::poly(c1, rsn) - a[0] / ssumm2;
  std::size_t first;
  double fac;
  if (n > 5) {
    const double a2 = -a[1] / ssumm2 + detail::poly(c2, rsn);
    fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[0] = a1;
    a[1] = a2;
    first = 2;
  } else {
    fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
    a[0] = a1;
    first = 1;
  }
  for (std::size_t i = first; i < half; ++i) a[i] = -a[i] / fac;
  return a;
}

inline ShapiroResult shapiro_wilk(std::span<const double> values, std::uint64_t subsample_seed = 0) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kSample, "sample values must be finite");
  }
  if (values.size() < 3) throw Error(ErrorKind::kSample, "Shapiro-Wilk needs at least 3 values");
  ShapiroResult res;
  std::vector<double> x(values.begin(), values.end());
  if (x.size() > kShapiroMaxN) {
    Rng rng(subsample_seed);
    for (std::size_t i = 0; i < kShapiroMaxN; ++i) std::swap(x[i], x[i + rng.index(x.size() - i)]);
    x.resize(kShapiroMaxN);
    res.subsample_seed = subsample_seed;
  }
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  res.n = n;
  const double range = x.back() - x.front();
  if (!(range > 0.0) || range < 1e-19 * std::max(1.0, std::abs(x.back()))) {
    throw Error(ErrorKind::kDegenerateSample, "sample has zero range");
  }

  // W is the squared correlation between the data and the antisymmetric
  // coefficient vector; 1 - W is formed directly to keep precision near 1.
  const auto a = shapiro_coefficients(n);
  double mean = 0.0;
  for (double v : x) mean += (v - x.front()) / range;
  mean /= static_cast<double>(n);
  double ssx = 0.0, sax = 0.0, ssa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ai = 0.0;
    if (i < n / 2) {
      ai = -a[i];
    } else if (n - 1 - i < n / 2) {
      ai = a[n - 1 - i];
    }
    const double xi = (x[i] - x.front()) / range - mean;
    ssx += xi * xi;
    sax += ai * xi;
    ssa += ai * ai;
  }
  const double root = std::sqrt(ssa * ssx);
  double w1 = (root - sax) * (root + sax) / (ssa * ssx);
  w1 = std::clamp(w1, 0.0, 1.0);
  res.w = 1.0 - w1;

  if (n == 3) {
    constexpr double pi6 = 6.0 / 3.14159265358979323846;
    constexpr double stqr = 3.14159265358979323846 / 3.0;
    res.p = std::clamp(pi6 * (std::asin(std::sqrt(res.w)) - stqr), 0.0, 1.0);
    return res;
  }
  if (w1 <= 0.0) {
    res.p = 1.0;
    return res;
  }
  static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};
  const double an = static_cast<double>(n);
  double y = std::log(w1);
  double m, s;
  if (n <= 11) {
    const double gamma = detail::poly(g, an);
    if (y >= gamma) {
      res.p = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    m = detail::poly(c3, an);
    s = std::exp(detail::poly(c4, an));
  } else {
    const double ln = std::log(an);
    m = detail::poly(c5, ln);
    s = std::exp(detail::poly(c6, ln));
  }
  res.p = std::clamp(detail::normal_upper_tail((y - m) / s), 0.0, 1.0);
  return res;
}

// ------------------------------------------------------------
// Wilcoxon rank-sum (Mann-Whitney U)
// ------------------------------------------------------------

enum class PValueMethod { kExact, kNormalApprox };

inline const char* to_string(PValueMethod m) { return m == PValueMethod::kExact ? "exact" : "normal-approx"; }

struct RankSumResult {
  double u = 0.0;  // R_a - n_a(n_a + 1)/2
  double p = 1.0;  // two-sided
  PValueMethod method = PValueMethod::kExact;
};

inline constexpr std::size_t kExactRankSumMaxN = 20;

// Number of rank subsets of size na out of na+nb giving each U = 0..na*nb.
inline std::vector<std::uint64_t> rank_sum_null_counts(std::size_t na, std::size_t nb) {
  // counts[i][j][u]: arrangements of i a's and j b's with statistic u, built
  // by appending the largest element (an a adds j to U, a b adds nothing)
  std::vector<std::vector<std::vector<std::uint64_t>>> c(
      na + 1, std::vector<std::vector<std::uint64_t>>(nb + 1));
  for (std::size_t i = 0; i <= na; ++i) {
    for (std::size_t j = 0; j <= nb; ++j) {
      auto& cur = c[i][j];
      cur.assign(i * j + 1, 0);
      if (i == 0 || j == 0) {
        cur[0] = 1;
        continue;
      }
      const auto& with_a = c[i - 1][j];
      for (std::size_t u = 0; u < with_a.size(); ++u) cur[u + j] += with_a[u];
      const auto& with_b = c[i][j - 1];
      for (std::size_t u = 0; u < with_b.size(); ++u) cur[u] += with_b[u];
    }
  }
  return c[na][nb];
}

inline RankSumResult wilcoxon_rank_sum(const GroupSample& a, const GroupSample& b) {
  a.validate();
  b.validate();
  const std::size_t na = a.values.size();
  const std::size_t nb = b.values.size();
  const std::size_t n = na + nb;

  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n);
  for (std::size_t i = 0; i < na; ++i) pooled.emplace_back(a.values[i], i);
  for (std::size_t i = 0; i < nb; ++i) pooled.emplace_back(b.values[i], na + i);
  std::sort(pooled.begin(), pooled.end());

  double rank_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second < na) rank_a += mid;
    }
    if (t > 1.0) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }

  RankSumResult res;
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  res.u = rank_a - dna * (dna + 1.0) / 2.0;

  if (n <= kExactRankSumMaxN && !ties) {
    res.method = PValueMethod::kExact;
    const auto counts = rank_sum_null_counts(na, nb);
    const auto u = static_cast<std::size_t>(std::llround(res.u));
    std::uint64_t lower = 0, upper = 0, total = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      total += counts[k];
      if (k <= u) lower += counts[k];
      if (k >= u) upper += counts[k];
    }
    res.p = std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / static_cast<double>(total));
    return res;
  }

  res.method = PValueMethod::kNormalApprox;
  const double mean = dna * dnb / 2.0;
  const double dn = static_cast<double>(n);
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    res.p = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.u - mean) - 0.5) / std::sqrt(var);
  res.p = std::clamp(2.0 * detail::normal_upper_tail(z), 0.0, 1.0);
  return res;
}

// ------------------------------------------------------------
// median time comparison
// ------------------------------------------------------------

struct MedianRatio {
  double median_completer = 0.0;
  double median_non_completer = 0.0;
  std::optional<double> ratio_percent;  // empty when the non-completer median is 0
};

inline MedianRatio median_ratio_report(const GroupSample& completers, const GroupSample& non_completers) {
  completers.validate();
  non_completers.validate();
  MedianRatio r;
  r.median_completer = median(completers.values);
  r.median_non_completer = median(non_completers.values);
  if (r.median_non_completer != 0.0) {
    r.ratio_percent = 100.0 * (r.median_completer / r.median_non_completer - 1.0);
  }
  return r;
}

// Total derived time each learner spent on step 1.1, split by label. Learners
// who never opened the step are left out.
inline std::pair<GroupSample, GroupSample> first_step_extract(std::span<const LabeledLearner> learners,
                                                              const CourseSpec& spec,
                                                              double cap = kDefaultTimeCapSeconds) {
  const StepId first{1, 1};
  if (!spec.has_step(first)) throw Error(ErrorKind::kSchema, "course spec has no step 1.1");
  std::pair<GroupSample, GroupSample> out{{Group::kCompleter, {}}, {Group::kNonCompleter, {}}};
  for (const auto& l : learners) {
    double total = 0.0;
    bool visited = false;
    for (const auto& tv : derive_time_spent(l.timeline, cap)) {
      if (tv.visit.step_id() != first) continue;
      visited = true;
      total += tv.duration;
    }
    if (!visited) continue;
    (l.completion.label == 1 ? out.first : out.second).values.push_back(total);
  }
  return out;
}

// ------------------------------------------------------------
// combined report
// ------------------------------------------------------------

struct StatReport {
  std::string course_id;
  std::size_t completers = 0;
  std::size_t non_completers = 0;
  std::optional<ShapiroResult> shapiro_completer;  // empty when the group is too small or constant
  std::optional<ShapiroResult> shapiro_non_completer;
  RankSumResult wilcoxon;
  MedianRatio medians;
};

inline StatReport make_stat_report(const GroupSample& completers, const GroupSample& non_completers,
                                   std::uint64_t seed, std::string course_id = {}) {
  StatReport r;
  r.course_id = std::move(course_id);
  r.completers = completers.values.size();
  r.non_completers = non_completers.values.size();
  auto shapiro = [&](const GroupSample& s, std::uint64_t stream) -> std::optional<ShapiroResult> {
    try {
      return shapiro_wilk(s.values, derive_seed(seed, stream));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kSample || e.kind() == ErrorKind::kDegenerateSample) return std::nullopt;
      throw;
    }
  };
  r.shapiro_completer = shapiro(completers, 0);
  r.shapiro_non_completer = shapiro(non_completers, 1);
  r.wilcoxon = wilcoxon_rank_sum(completers, non_completers);
  r.medians = median_ratio_report(completers, non_completers);
  return r;
}

inline nlohmann::json to_json(const StatReport& r) {
  auto sw = [](const std::optional<ShapiroResult>& s) -> nlohmann::json {
    if (!s) return nullptr;
    nlohmann::json j = {{"W", s->w}, {"p", s->p}, {"n", s->n}};
    j["subsample_seed"] = s->subsample_seed ? nlohmann::json(*s->subsample_seed) : nlohmann::json(nullptr);
    return j;
  };
  return {{"course_id", r.course_id},
          {"groups", {{"completer", r.completers}, {"non_completer", r.non_completers}}},
          {"shapiro", {{"completer", sw(r.shapiro_completer)}, {"non_completer", sw(r.shapiro_non_completer)}}},
          {"wilcoxon", {{"statistic", r.wilcoxon.u}, {"p", r.wilcoxon.p}, {"method", to_string(r.wilcoxon.method)}}},
          {"medians", {{"completer", r.medians.median_completer}, {"non_completer", r.medians.median_non_completer}}},
          {"ratio_percent", r.medians.ratio_percent ? nlohmann::json(*r.medians.ratio_percent) : nlohmann::json(nullptr)},
          {"ratio_defined", r.medians.ratio_percent.has_value()}};
}

inline std::string render_summary(const StatReport& r) {
  auto sw = [](const std::optional<ShapiroResult>& s) {
    if (!s) return std::string("n/a");
    return strprintf("W = %.5f, p = %.3g (n = %zu%s)", s->w, s->p, s->n, s->subsample_seed ? ", subsampled" : "");
  };
  std::string out = "Time spent on step 1.1" + (r.course_id.empty() ? std::string() : " (" + r.course_id + ")") + "\n";
  out += strprintf("  completers:      n = %zu, median = %.1f s\n", r.completers, r.medians.median_completer);
  out += strprintf("  non-completers:  n = %zu, median = %.1f s\n", r.non_completers, r.medians.median_non_completer);
  out += r.medians.ratio_percent ? strprintf("  completers spent %+.1f%% time relative to non-completers\n",
                                             *r.medians.ratio_percent)
                                 : std::string("  ratio undefined (non-completer median is 0)\n");
  out += "  Shapiro-Wilk completers:     " + sw(r.shapiro_completer) + "\n";
  out += "  Shapiro-Wilk non-completers: " + sw(r.shapiro_non_completer) + "\n";
  out += strprintf("  Wilcoxon rank-sum: U = %.1f, p = %.3g (%s)\n", r.wilcoxon.u, r.wilcoxon.p,
                   to_string(r.wilcoxon.method));
  return out;
}

// group,n,median_seconds
inline std::string medians_csv(const StatReport& r) {
  std::string out;
  csv::append_row(out, {"group", "n", "median_seconds"});
  csv::append_row(out, {"completer", std::to_string(r.completers), format_double(r.medians.median_completer)});
  csv::append_row(out,
                  {"non-completer", std::to_string(r.non_completers), format_double(r.medians.median_non_completer)});
  return out;
}

}  // namespace earlydrop

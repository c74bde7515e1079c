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

#include <charconv>
#include <compare>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "csv.hpp"

namespace earlydrop {

// After run merging the same learner id in two runs is two learners.
struct LearnerKey {
  std::string learner_id;
  int run = 0;

  auto operator<=>(const LearnerKey&) const = default;
  bool operator==(const LearnerKey&) const = default;
};

enum class FeatureMode { kAggregate, kPerStep };

inline const char* to_string(FeatureMode mode) {
  return mode == FeatureMode::kAggregate ? "aggregate" : "per-step";
}

inline FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "aggregate") return FeatureMode::kAggregate;
  if (text == "per-step") return FeatureMode::kPerStep;
  throw Error(ErrorKind::kConfig, "unknown feature mode '" + std::string(text) + "'");
}

inline const std::vector<std::string>& aggregate_columns() {
  static const std::vector<std::string> names = {"number_of_accesses", "time_spent", "correct_answers",
                                                 "wrong_answers"};
  return names;
}

// Read-only row-major view handed to the tree learners.
struct MatrixView {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return values.subspan(r * cols, cols); }
};

// Learners x named features, with binary labels aligned to rows.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(std::vector<std::string> columns, FeatureMode mode) : columns_(std::move(columns)), mode_(mode) {
    std::set<std::string> seen;
    for (const auto& c : columns_) {
      if (!seen.insert(c).second) throw Error(ErrorKind::kSchema, "duplicate column '" + c + "'");
    }
  }

  void add_row(LearnerKey key, std::span<const double> values, int label) {
    if (values.size() != columns_.size()) {
      throw Error(ErrorKind::kDimension,
                  strprintf("row has %zu values, matrix has %zu columns", values.size(), columns_.size()));
    }
    if (label != 0 && label != 1) throw Error(ErrorKind::kDomain, "label must be 0 or 1");
    for (double v : values) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::kDomain, "feature values must be finite and >= 0");
    }
    keys_.push_back(std::move(key));
    values_.insert(values_.end(), values.begin(), values.end());
    labels_.push_back(label);
  }

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return columns_.size(); }
  FeatureMode mode() const { return mode_; }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<LearnerKey>& keys() const { return keys_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * columns_.size(), columns_.size());
  }
  double at(std::size_t r, std::size_t c) const { return values_[r * columns_.size() + c]; }

  MatrixView view() const { return {values_, rows(), cols()}; }

  std::size_t count_label(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
  }

  // Rows picked by index; indices may repeat.
  FeatureMatrix select(std::span<const std::size_t> indices) const {
    FeatureMatrix out;
    out.columns_ = columns_;
    out.mode_ = mode_;
    out.keys_.reserve(indices.size());
    out.labels_.reserve(indices.size());
    out.values_.reserve(indices.size() * cols());
    for (std::size_t i : indices) {
      if (i >= rows()) throw Error(ErrorKind::kDimension, "row index out of range");
      out.keys_.push_back(keys_[i]);
      out.labels_.push_back(labels_[i]);
      auto r = row(i);
      out.values_.insert(out.values_.end(), r.begin(), r.end());
    }
    return out;
  }

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::vector<std::string> columns_;
  FeatureMode mode_ = FeatureMode::kPerStep;
  std::vector<LearnerKey> keys_;
  std::vector<double> values_;
  std::vector<int> labels_;
};

// ------------------------------------------------------------
// CSV / JSON export
// ------------------------------------------------------------
//
// CSV layout: learner_id,run,<feature columns...>,label

inline std::string to_csv(const FeatureMatrix& m) {
  std::string out;
  std::vector<std::string> header = {"learner_id", "run"};
  header.insert(header.end(), m.columns().begin(), m.columns().end());
  header.push_back("label");
  csv::append_row(out, header);
  std::vector<std::string> fields;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    fields.clear();
    fields.push_back(m.keys()[r].learner_id);
    fields.push_back(std::to_string(m.keys()[r].run));
    for (double v : m.row(r)) fields.push_back(format_double(v));
    fields.push_back(std::to_string(m.labels()[r]));
    csv::append_row(out, fields);
  }
  return out;
}

namespace detail {

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorKind::kParse, strprintf("line %zu: bad %s '%s'", line, what, std::string(text).c_str()));
  }
  return value;
}

}  // namespace detail

inline FeatureMatrix feature_matrix_from_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorKind::kParse, "feature CSV is empty");
  const auto& header = records.front().fields;
  if (header.size() < 4 || header[0] != "learner_id" || header[1] != "run" || header.back() != "label") {
    throw Error(ErrorKind::kSchema, "feature CSV header must be learner_id,run,<features...>,label");
  }
  std::vector<std::string> columns(header.begin() + 2, header.end() - 1);
  const FeatureMode mode = columns == aggregate_columns() ? FeatureMode::kAggregate : FeatureMode::kPerStep;
  FeatureMatrix m(std::move(columns), mode);
  std::vector<double> values(m.cols());
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorKind::kParse, strprintf("line %zu: expected %zu fields, got %zu", rec.line, header.size(),
                                               rec.fields.size()));
    }
    const int run = detail::parse_number<int>(rec.fields[1], rec.line, "run");
    for (std::size_t c = 0; c < m.cols(); ++c) {
      values[c] = detail::parse_number<double>(rec.fields[c + 2], rec.line, "feature value");
    }
    const int label = detail::parse_number<int>(rec.fields.back(), rec.line, "label");
    try {
      m.add_row({rec.fields[0], run}, values, label);
    } catch (const Error& e) {
      throw Error(ErrorKind::kParse, strprintf("line %zu: %s", rec.line, e.what()));
    }
  }
  return m;
}

inline nlohmann::json to_json(const FeatureMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back({{"learner_id", m.keys()[r].learner_id},
                    {"run", m.keys()[r].run},
                    {"values", std::vector<double>(m.row(r).begin(), m.row(r).end())},
                    {"label", m.labels()[r]}});
  }
  return {{"mode", to_string(m.mode())}, {"columns", m.columns()}, {"rows", std::move(rows)}};
}

}  // namespace earlydrop

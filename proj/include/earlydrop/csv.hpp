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

// Minimal RFC-4180 reader/writer: comma separator, double-quote quoting with
// "" escapes, CRLF or LF record ends, quoted fields may span lines.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace earlydrop::csv {

struct Record {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

inline std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  std::size_t pos = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();
  while (pos < n) {
    Record rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool done = false;
    while (!done) {
      if (pos >= n) {
        if (in_quotes) throw Error(ErrorKind::kParse, strprintf("line %zu: unterminated quoted field", rec.line));
        rec.fields.push_back(std::move(field));
        break;
      }
      const char c = text[pos];
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < n && text[pos + 1] == '"') {
            field.push_back('"');
            pos += 2;
          } else {
            in_quotes = false;
            ++pos;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++pos;
        }
        continue;
      }
      switch (c) {
        case '"':
          if (!field.empty() || field_was_quoted) {
            throw Error(ErrorKind::kParse, strprintf("line %zu: stray quote inside field", line));
          }
          in_quotes = true;
          field_was_quoted = true;
          ++pos;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          field_was_quoted = false;
          ++pos;
          break;
        case '\r':
          if (pos + 1 < n && text[pos + 1] == '\n') ++pos;
          [[fallthrough]];
        case '\n':
          rec.fields.push_back(std::move(field));
          ++pos;
          ++line;
          done = true;
          break;
        default:
          if (field_was_quoted) {
            throw Error(ErrorKind::kParse, strprintf("line %zu: text after closing quote", line));
          }
          field.push_back(c);
          ++pos;
      }
    }
    // blank lines carry no record
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, "cannot read '" + path + "'");
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void append_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  out.push_back('\n');
}

}  // namespace earlydrop::csv

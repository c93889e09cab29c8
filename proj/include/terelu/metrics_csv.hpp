// Copyright 2026 The TERELU Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Per-epoch metrics CSV:
//
//   # key = value            (effective configuration, one line per key)
//   epoch,train_loss,train_acc,val_loss,val_acc,beta_0,...,beta_{L-1}
//   1,2.30...,0.11...,...
//
// Floats are written with 17 significant digits so identical runs produce
// identical bytes.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "terelu/network.hpp"

namespace terelu::csv {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kBaseColumns[] = {"epoch", "train_loss", "train_acc", "val_loss",
                                               "val_acc"};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string header_line(std::size_t beta_columns) {
  std::string h = "epoch,train_loss,train_acc,val_loss,val_acc";
  for (std::size_t i = 0; i < beta_columns; ++i) h += ",beta_" + std::to_string(i);
  return h;
}

inline std::string row_line(const MetricsRow& r) {
  std::string s = std::to_string(r.epoch);
  for (double v : {r.train_loss, r.train_acc, r.val_loss, r.val_acc}) s += "," + format_double(v);
  for (double b : r.beta_values) s += "," + format_double(b);
  return s;
}

/// Streams metrics to a file, flushing after every row so that a run that
/// aborts part way still leaves the completed epochs on disk.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path,
                const std::vector<std::pair<std::string, std::string>>& config,
                std::size_t beta_columns)
      : out_(path, std::ios::binary | std::ios::trunc), beta_columns_(beta_columns) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& [k, v] : config) out_ << "# " << k << " = " << v << '\n';
    out_ << header_line(beta_columns) << '\n';
    out_.flush();
  }

  void write(const MetricsRow& row) {
    if (row.beta_values.size() != beta_columns_)
      throw std::logic_error("MetricsWriter: beta column count changed mid-run");
    out_ << row_line(row) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
  std::size_t beta_columns_;
};

struct RunTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

/// Parses a metrics CSV, checking the header against the fixed schema.
inline RunTable read_metrics(std::istream& in, const std::string& source) {
  RunTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    if (!have_header) {
      constexpr std::size_t base = std::size(kBaseColumns);
      for (std::size_t i = 0; i < cells.size() || i < base; ++i) {
        const std::string expected =
            i < base ? kBaseColumns[i] : "beta_" + std::to_string(i - base);
        const std::string got = i < cells.size() ? cells[i] : "<missing>";
        if (got != expected)
          throw SchemaError(source + ": bad column " + std::to_string(i + 1) + " '" + got +
                            "', expected '" + expected + "'");
      }
      t.columns = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw SchemaError(source + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(t.columns.size()));
    std::vector<double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || *end != '\0')
        throw SchemaError(source + ": line " + std::to_string(line_no) + " column '" +
                          t.columns[i] + "' is not a number: '" + cells[i] + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw SchemaError(source + ": empty file, no header");
  if (t.rows.empty()) throw SchemaError(source + ": header but no data rows");
  return t;
}

inline RunTable read_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_metrics(in, path.string());
}

/// Long-format rows `run,epoch,metric,value`. Each epoch yields the four loss
/// and accuracy curves plus acc_gap = train_acc - val_acc; beta columns are
/// appended when include_beta is set.
inline void write_long(std::ostream& out, const std::vector<std::pair<std::string, RunTable>>& runs,
                       bool include_beta) {
  out << "run,epoch,metric,value\n";
  for (const auto& [name, t] : runs) {
    for (const auto& r : t.rows) {
      const std::string prefix = name + "," + std::to_string(static_cast<long long>(r[0])) + ",";
      for (std::size_t c = 1; c < 5; ++c)
        out << prefix << t.columns[c] << "," << format_double(r[c]) << '\n';
      out << prefix << "acc_gap," << format_double(r[2] - r[4]) << '\n';
      if (include_beta)
        for (std::size_t c = 5; c < r.size(); ++c)
          out << prefix << t.columns[c] << "," << format_double(r[c]) << '\n';
    }
  }
}

}  // namespace terelu::csv

// Copyright 2026 The KGE Authors.
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

// Evaluation reports and their tab-separated rendering:
//   <dataset>\t<metric>\t<mode>\t<value>\t<num_queries>\t<seconds>

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "kge/triples.hpp"

namespace kge {

struct EvalReport {
  std::string dataset;
  std::string metric;  // e.g. "hit@10", "hit@5%", "accuracy", "hits@1"
  std::string mode;    // "raw", "filtered", or "-" where not applicable
  double value = 0;    // percent
  std::int64_t num_queries = 0;
  double seconds = 0;

  bool operator==(const EvalReport &) const = default;
};

inline std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

inline std::string to_tsv(const EvalReport &r) {
  return r.dataset + '\t' + r.metric + '\t' + r.mode + '\t' +
         format_number(r.value, 4) + '\t' + std::to_string(r.num_queries) +
         '\t' + format_number(r.seconds, 3);
}

// Parses one rendered line. Returns nullopt for anything that is not a
// six-column report line.
inline std::optional<EvalReport> parse_report_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto cols = detail::split(line, '\t');
  if (cols.size() != 6) return std::nullopt;
  EvalReport r;
  r.dataset = std::string(cols[0]);
  r.metric = std::string(cols[1]);
  r.mode = std::string(cols[2]);
  try {
    r.value = std::stod(std::string(cols[3]));
    r.seconds = std::stod(std::string(cols[5]));
  } catch (const std::exception &) {
    return std::nullopt;
  }
  auto [ptr, ec] = std::from_chars(cols[4].data(),
                                   cols[4].data() + cols[4].size(),
                                   r.num_queries);
  if (ec != std::errc() || ptr != cols[4].data() + cols[4].size()) {
    return std::nullopt;
  }
  return r;
}

// Reads every report line of a stream, skipping '#' comments and blanks.
inline std::vector<EvalReport> read_reports(std::istream &in) {
  std::vector<EvalReport> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto r = parse_report_line(line);
    if (!r) throw ParseError("<report>", line_no, "not a report line");
    out.push_back(std::move(*r));
  }
  return out;
}

}  // namespace kge

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

// Readers for question-answering datasets and the WikiMovies KB format.

#pragma once

#include <cctype>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kge/qa.hpp"
#include "kge/triples.hpp"

namespace kge {

struct QaParseSummary {
  std::size_t lines = 0;
  std::size_t pairs = 0;
  std::size_t malformed = 0;
};

// SimpleQuestions: `subject\trelation\tobject\tquestion`.
inline std::vector<QAPair> parse_simplequestions(std::istream &in,
                                                 QaParseSummary *summary = nullptr,
                                                 std::ostream *warn = nullptr) {
  std::vector<QAPair> out;
  QaParseSummary s;
  std::string line;
  while (std::getline(in, line)) {
    ++s.lines;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 4 || cols[0].empty() || cols[1].empty() ||
        cols[2].empty() || detail::trim(cols[3]).empty()) {
      ++s.malformed;
      continue;
    }
    QAPair pair;
    pair.subject_name = std::string(cols[0]);
    pair.relation_name = std::string(cols[1]);
    pair.answer_names.emplace_back(cols[2]);
    pair.question = std::string(detail::trim(cols[3]));
    out.push_back(std::move(pair));
  }
  s.pairs = out.size();
  if (warn != nullptr) {
    if (out.empty()) *warn << "warning: no question/answer pairs read\n";
    if (s.malformed > 0) {
      *warn << "warning: skipped " << s.malformed << " malformed lines\n";
    }
  }
  if (summary != nullptr) *summary = s;
  return out;
}

namespace detail {

// Strips the leading "<number> " of WikiMovies lines; false if absent.
inline bool strip_line_number(std::string_view &line) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i >= line.size() || line[i] != ' ') return false;
  line.remove_prefix(i + 1);
  return true;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : split(s, ',')) {
    part = trim(part);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

}  // namespace detail

// WikiMovies QA: `<n> <question>\t<answer>, <answer>, ...`.
inline std::vector<QAPair> parse_wikimovies(std::istream &in,
                                            QaParseSummary *summary = nullptr,
                                            std::ostream *warn = nullptr) {
  std::vector<QAPair> out;
  QaParseSummary s;
  std::string line;
  while (std::getline(in, line)) {
    ++s.lines;
    detail::strip_cr(line);
    if (line.empty()) continue;
    std::string_view view = line;
    auto cols = detail::split(view, '\t');
    if (cols.size() < 2 || !detail::strip_line_number(cols[0])) {
      ++s.malformed;
      continue;
    }
    QAPair pair;
    pair.question = std::string(detail::trim(cols[0]));
    pair.answer_names = detail::split_list(cols[1]);
    if (pair.question.empty() || pair.answer_names.empty()) {
      ++s.malformed;
      continue;
    }
    out.push_back(std::move(pair));
  }
  s.pairs = out.size();
  if (warn != nullptr) {
    if (out.empty()) *warn << "warning: no question/answer pairs read\n";
    if (s.malformed > 0) {
      *warn << "warning: skipped " << s.malformed << " malformed lines\n";
    }
  }
  if (summary != nullptr) *summary = s;
  return out;
}

inline const std::vector<std::string> &default_wikimovies_relations() {
  static const std::vector<std::string> relations = {
      "directed_by",  "written_by", "starred_actors",  "release_year",
      "in_language",  "has_tags",   "has_genre",       "has_imdb_votes",
      "has_imdb_rating"};
  return relations;
}

// WikiMovies KB: `<n> <subject words> <relation> <obj>, <obj>, ...`. Lines
// whose relation is not listed in `relations` are skipped and counted.
inline TripleStore parse_wikimovies_kb(
    std::istream &in, std::span<const std::string> relations,
    QaParseSummary *summary = nullptr) {
  TripleStore store;
  QaParseSummary s;
  std::string line;
  while (std::getline(in, line)) {
    ++s.lines;
    detail::strip_cr(line);
    if (line.empty()) continue;
    std::string_view view = line;
    if (!detail::strip_line_number(view)) {
      ++s.malformed;
      continue;
    }
    std::size_t rel_pos = std::string_view::npos;
    std::string_view rel;
    for (const auto &name : relations) {
      const std::string needle = " " + name + " ";
      const auto pos = view.find(needle);
      if (pos != std::string_view::npos && pos < rel_pos) {
        rel_pos = pos;
        rel = std::string_view(name);
      }
    }
    if (rel_pos == std::string_view::npos) {
      ++s.malformed;
      continue;
    }
    const auto subject = detail::trim(view.substr(0, rel_pos));
    const auto objects = detail::split_list(view.substr(rel_pos + rel.size() + 2));
    if (subject.empty() || objects.empty()) {
      ++s.malformed;
      continue;
    }
    const std::int32_t sid = store.entities.add(subject);
    const std::int32_t rid = store.relations.add(rel);
    for (const auto &o : objects) {
      const Triple t{sid, rid, store.entities.add(o)};
      if (!store.known.contains(t)) {
        store.triples.push_back(t);
        store.known.insert(t);
      }
    }
  }
  s.pairs = store.triples.size();
  if (summary != nullptr) *summary = s;
  return store;
}

inline TripleStore parse_wikimovies_kb(std::istream &in,
                                       QaParseSummary *summary = nullptr) {
  return parse_wikimovies_kb(in, default_wikimovies_relations(), summary);
}

struct ResolveSummary {
  std::size_t unresolved_answers = 0;
  std::size_t unresolved_subjects = 0;
  std::size_t unresolved_relations = 0;
};

// Maps the raw names of each pair onto KB ids. Names absent from the KB
// resolve to nothing and are counted.
inline void resolve_pairs(std::span<QAPair> pairs, const QaKnowledgeBase &kb,
                          const QaLabels &labels,
                          ResolveSummary *summary = nullptr,
                          std::ostream *warn = nullptr) {
  ResolveSummary s;
  for (QAPair &pair : pairs) {
    pair.answers.clear();
    for (const auto &name : pair.answer_names) {
      const std::int32_t id = kb.entities().lookup(name);
      if (id < 0) {
        ++s.unresolved_answers;
      } else {
        pair.answers.push_back(id);
      }
    }
    if (!pair.subject_name.empty()) {
      const std::int32_t id = kb.entities().lookup(pair.subject_name);
      if (id < 0) {
        ++s.unresolved_subjects;
        pair.gold_subject.reset();
      } else {
        pair.gold_subject = id;
      }
    }
    if (!pair.relation_name.empty()) {
      const ClassId c = labels.lookup(pair.relation_name, kb.relations());
      if (c < 0) {
        ++s.unresolved_relations;
        pair.gold_relation.reset();
      } else {
        pair.gold_relation = c;
      }
    }
  }
  if (warn != nullptr &&
      s.unresolved_answers + s.unresolved_subjects + s.unresolved_relations > 0) {
    *warn << "warning: names absent from the KB: " << s.unresolved_answers
          << " answers, " << s.unresolved_subjects << " subjects, "
          << s.unresolved_relations << " relations\n";
  }
  if (summary != nullptr) *summary = s;
}

}  // namespace kge

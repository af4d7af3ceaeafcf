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

// Vocabularies, triple stores and the triple TSV parser.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kge {

// Raised for malformed input lines; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string &source, std::size_t line,
             const std::string &what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// String <-> dense id map. Ids are assigned in order of first insertion.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names) {
    for (auto &name : names) add(name);
  }

  std::int32_t add(std::string_view name) {
    auto [it, inserted] =
        index_.try_emplace(std::string(name), static_cast<std::int32_t>(names_.size()));
    if (inserted) names_.emplace_back(name);
    return it->second;
  }

  std::optional<std::int32_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // -1 when absent.
  std::int32_t lookup(std::string_view name) const {
    auto id = find(name);
    return id ? *id : -1;
  }

  const std::string &name(std::int32_t id) const { return names_.at(id); }
  const std::vector<std::string> &names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }

  bool operator==(const Vocabulary &other) const {
    return names_ == other.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Triple {
  std::int32_t subject = 0;
  std::int32_t relation = 0;
  std::int32_t object = 0;

  auto operator<=>(const Triple &) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple &t) const {
    std::uint64_t h = static_cast<std::uint32_t>(t.subject);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(t.relation);
    h = h * 0x9E3779B97F4A7C15ULL + static_cast<std::uint32_t>(t.object);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

// Index of known true triples, used to filter candidates at evaluation time
// and to validate answers during question answering.
class KnownTriples {
 public:
  void insert(const Triple &t) {
    if (!all_.insert(t).second) return;
    objects_[key(t.subject, t.relation)].push_back(t.object);
    subjects_[key(t.object, t.relation)].push_back(t.subject);
    relations_[key(t.subject, t.object)].push_back(t.relation);
  }

  void insert(std::span<const Triple> triples) {
    for (const Triple &t : triples) insert(t);
  }

  bool contains(const Triple &t) const { return all_.contains(t); }

  // Objects o with (subject, relation, o) known, in insertion order.
  std::span<const std::int32_t> objects(std::int32_t subject,
                                        std::int32_t relation) const {
    return get(objects_, key(subject, relation));
  }
  // Subjects s with (s, relation, object) known.
  std::span<const std::int32_t> subjects(std::int32_t relation,
                                         std::int32_t object) const {
    return get(subjects_, key(object, relation));
  }
  // Relations r with (subject, r, object) known.
  std::span<const std::int32_t> relations(std::int32_t subject,
                                          std::int32_t object) const {
    return get(relations_, key(subject, object));
  }

  std::size_t size() const { return all_.size(); }

 private:
  using Map = std::unordered_map<std::uint64_t, std::vector<std::int32_t>>;

  static std::uint64_t key(std::int32_t a, std::int32_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }
  static std::span<const std::int32_t> get(const Map &m, std::uint64_t k) {
    auto it = m.find(k);
    if (it == m.end()) return {};
    return it->second;
  }

  std::unordered_set<Triple, TripleHash> all_;
  Map objects_;
  Map subjects_;
  Map relations_;
};

struct TripleStore {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
  KnownTriples known;
};

struct TripleFormat {
  // FB2M/FB5M style: the object column lists several whitespace-separated
  // objects, each forming its own triple.
  bool split_objects = false;
};

struct ParseSummary {
  std::size_t lines = 0;
  std::size_t triples = 0;
};

namespace detail {

inline void strip_cr(std::string &line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace detail

// Reads `subject\trelation\tobject` lines, assigning ids in the shared
// vocabularies in first-appearance order. Blank lines are skipped. Unknown
// names are added unless `frozen`, in which case they map to id -1.
inline std::vector<Triple> read_triples(std::istream &in, Vocabulary &entities,
                                        Vocabulary &relations,
                                        const std::string &source = "<stream>",
                                        TripleFormat format = {},
                                        ParseSummary *summary = nullptr,
                                        bool frozen = false) {
  std::vector<Triple> out;
  std::string line;
  std::size_t line_no = 0;
  auto id_of = [frozen](Vocabulary &v, std::string_view name) {
    return frozen ? v.lookup(name) : v.add(name);
  };
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 3) {
      throw ParseError(source, line_no,
                       "expected 3 tab-separated columns, got " +
                           std::to_string(cols.size()));
    }
    if (cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      throw ParseError(source, line_no, "empty field");
    }
    const std::int32_t s = id_of(entities, cols[0]);
    const std::int32_t r = id_of(relations, cols[1]);
    if (format.split_objects) {
      std::size_t pos = 0;
      const std::string_view objs = cols[2];
      while (pos < objs.size()) {
        const auto first = objs.find_first_not_of(" ", pos);
        if (first == std::string_view::npos) break;
        auto last = objs.find(' ', first);
        if (last == std::string_view::npos) last = objs.size();
        out.push_back({s, r, id_of(entities, objs.substr(first, last - first))});
        pos = last;
      }
    } else {
      out.push_back({s, r, id_of(entities, cols[2])});
    }
  }
  if (summary != nullptr) {
    summary->lines += line_no;
    summary->triples += out.size();
  }
  return out;
}

inline std::vector<Triple> read_triples(const std::filesystem::path &path,
                                        Vocabulary &entities,
                                        Vocabulary &relations,
                                        TripleFormat format = {},
                                        bool frozen = false) {
  auto in = detail::open_input(path);
  return read_triples(in, entities, relations, path.string(), format, nullptr,
                      frozen);
}

// Appends every file in order into one store sharing a single vocabulary
// pass; the known index covers all of them.
inline TripleStore parse_triples(std::span<const std::filesystem::path> paths,
                                 TripleFormat format = {}) {
  TripleStore store;
  for (const auto &path : paths) {
    auto triples =
        read_triples(path, store.entities, store.relations, format);
    store.triples.insert(store.triples.end(), triples.begin(), triples.end());
  }
  if (store.triples.empty()) {
    throw std::invalid_argument("parse_triples: no triples read");
  }
  store.known.insert(store.triples);
  return store;
}

inline TripleStore parse_triples(const std::filesystem::path &path,
                                 TripleFormat format = {}) {
  return parse_triples(std::span(&path, 1), format);
}

inline TripleStore parse_triples(std::istream &in,
                                 const std::string &source = "<stream>",
                                 TripleFormat format = {}) {
  TripleStore store;
  store.triples = read_triples(in, store.entities, store.relations, source,
                               format);
  if (store.triples.empty()) {
    throw std::invalid_argument("parse_triples: no triples read from " +
                                source);
  }
  store.known.insert(store.triples);
  return store;
}

}  // namespace kge

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

// Question answering over a knowledge base by relation prediction.
//
// Questions are matched to KB entities with an alias table. A bag-of-words
// classifier over question words (plus hashed bigrams) predicts the relation.
// The answer is read off the KB by walking relations from most to least
// likely and taking the first linked entity that has an edge with that
// relation.

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kge/embedding.hpp"
#include "kge/report.hpp"
#include "kge/triples.hpp"

namespace kge {

// Lowercases ASCII, turns ASCII punctuation into spaces and collapses runs of
// whitespace. Bytes >= 0x80 pass through untouched.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool separator =
        c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v' || (c < 0x80 && std::ispunct(c));
    if (separator) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

inline std::vector<std::string_view> tokenize(std::string_view normalized) {
  std::vector<std::string_view> out;
  if (normalized.empty()) return out;
  for (auto part : detail::split(normalized, ' ')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Number of UTF-8 code points.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (char ch : s) n += (static_cast<unsigned char>(ch) & 0xC0) != 0x80;
  return n;
}

inline constexpr std::size_t kMaxAliasTokens = 10;

// Normalized surface string -> entities, plus how often each entity was the
// linked subject of a training question.
class AliasTable {
 public:
  // Returns false when the alias normalizes to nothing.
  bool add_alias(std::string_view surface, std::int32_t entity) {
    std::string key = normalize_text(surface);
    if (key.empty()) return false;
    auto &entities = aliases_[std::move(key)];
    if (std::find(entities.begin(), entities.end(), entity) == entities.end()) {
      entities.push_back(entity);
    }
    return true;
  }

  std::span<const std::int32_t> lookup(std::string_view surface) const {
    return lookup_normalized(normalize_text(surface));
  }

  std::span<const std::int32_t> lookup_normalized(const std::string &key) const {
    auto it = aliases_.find(key);
    if (it == aliases_.end()) return {};
    return it->second;
  }

  void add_frequency(std::int32_t entity, std::uint64_t count = 1) {
    frequency_[entity] += count;
  }

  std::uint64_t frequency(std::int32_t entity) const {
    auto it = frequency_.find(entity);
    return it == frequency_.end() ? 0 : it->second;
  }

  const std::unordered_map<std::int32_t, std::uint64_t> &frequencies() const {
    return frequency_;
  }

  std::size_t alias_count() const { return aliases_.size(); }
  bool empty() const { return aliases_.empty(); }

 private:
  std::unordered_map<std::string, std::vector<std::int32_t>> aliases_;
  std::unordered_map<std::int32_t, std::uint64_t> frequency_;
};

struct AliasLoadSummary {
  std::size_t lines = 0;
  std::size_t inserted = 0;
  std::size_t malformed = 0;       // not `<entity>\t<surface>`
  std::size_t unknown_entity = 0;  // entity absent from the KB
};

// Reads `<entity_id>\t<surface string>` lines. Bad lines are skipped and
// counted; warnings go to `warn` when given. `training_subjects` holds the
// linked subject of every training question and feeds the frequencies.
inline AliasTable build_alias_table(std::istream &names,
                                    const Vocabulary &entities,
                                    std::span<const std::int32_t> training_subjects,
                                    AliasLoadSummary *summary = nullptr,
                                    std::ostream *warn = nullptr) {
  AliasTable table;
  AliasLoadSummary s;
  std::string line;
  while (std::getline(names, line)) {
    ++s.lines;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      ++s.malformed;
      continue;
    }
    const std::int32_t entity = entities.lookup(cols[0]);
    if (entity < 0) {
      ++s.unknown_entity;
      continue;
    }
    if (table.add_alias(cols[1], entity)) {
      ++s.inserted;
    } else {
      ++s.malformed;
    }
  }
  for (std::int32_t e : training_subjects) {
    if (e >= 0) table.add_frequency(e);
  }
  if (warn != nullptr) {
    if (s.malformed > 0) {
      *warn << "warning: skipped " << s.malformed << " malformed alias lines\n";
    }
    if (s.unknown_entity > 0) {
      *warn << "warning: skipped " << s.unknown_entity
            << " aliases of entities not in the KB\n";
    }
    if (s.inserted == 0) *warn << "warning: alias table has zero entities\n";
  }
  if (summary != nullptr) *summary = s;
  return table;
}

// Every entity is its own alias (WikiMovies-style KBs name entities by their
// surface form).
inline AliasTable alias_table_from_names(const Vocabulary &entities,
                                         std::span<const std::int32_t> training_subjects) {
  AliasTable table;
  for (std::size_t e = 0; e < entities.size(); ++e) {
    table.add_alias(entities.name(static_cast<std::int32_t>(e)),
                    static_cast<std::int32_t>(e));
  }
  for (std::int32_t e : training_subjects) {
    if (e >= 0) table.add_frequency(e);
  }
  return table;
}

struct LinkedEntity {
  std::int32_t entity = 0;
  std::uint64_t frequency = 0;
  std::size_t alias_length = 0;  // longest matching alias, in code points

  bool operator==(const LinkedEntity &) const = default;
};

// Matches every span of up to kMaxAliasTokens tokens. Entities are ordered
// rarest first (training frequency), then by longer matched alias, then by id.
inline std::vector<LinkedEntity> link_entities_detailed(std::string_view question,
                                                        const AliasTable &table) {
  const std::string normalized = normalize_text(question);
  const auto tokens = tokenize(normalized);
  std::unordered_map<std::int32_t, std::size_t> best_length;
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    key.clear();
    for (std::size_t j = i; j < tokens.size() && j - i < kMaxAliasTokens; ++j) {
      if (j > i) key.push_back(' ');
      key.append(tokens[j]);
      auto hits = table.lookup_normalized(key);
      if (hits.empty()) continue;
      const std::size_t len = utf8_length(key);
      for (std::int32_t e : hits) {
        auto &best = best_length[e];
        best = std::max(best, len);
      }
    }
  }
  std::vector<LinkedEntity> out;
  out.reserve(best_length.size());
  for (auto [e, len] : best_length) out.push_back({e, table.frequency(e), len});
  std::sort(out.begin(), out.end(), [](const LinkedEntity &a, const LinkedEntity &b) {
    if (a.frequency != b.frequency) return a.frequency < b.frequency;
    if (a.alias_length != b.alias_length) return a.alias_length > b.alias_length;
    return a.entity < b.entity;
  });
  return out;
}

inline std::vector<std::int32_t> link_entities(std::string_view question,
                                               const AliasTable &table) {
  std::vector<std::int32_t> out;
  for (const auto &l : link_entities_detailed(question, table)) {
    out.push_back(l.entity);
  }
  return out;
}

// 32-bit FNV-1a over signed bytes.
inline std::uint32_t hash_token(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint32_t>(static_cast<std::int8_t>(c));
    h *= 16777619u;
  }
  return h;
}

// Word ids [0, words) followed by bigram buckets [words, words + buckets).
class QuestionFeaturizer {
 public:
  QuestionFeaturizer() = default;
  QuestionFeaturizer(Vocabulary words, std::uint32_t buckets)
      : words_(std::move(words)), buckets_(buckets) {}

  // Word vocabulary over the normalized training questions.
  template <typename Questions>
  static QuestionFeaturizer build(const Questions &questions,
                                  std::uint32_t buckets) {
    Vocabulary words;
    for (const auto &q : questions) {
      const std::string norm = normalize_text(q);
      for (auto tok : tokenize(norm)) words.add(tok);
    }
    return QuestionFeaturizer(std::move(words), buckets);
  }

  std::vector<TokenId> featurize(std::string_view question) const {
    const std::string norm = normalize_text(question);
    const auto tokens = tokenize(norm);
    std::vector<TokenId> ids;
    ids.reserve(2 * tokens.size());
    for (auto tok : tokens) {
      const std::int32_t id = words_.lookup(tok);
      if (id >= 0) ids.push_back(id);
    }
    if (buckets_ > 0) {
      for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        const std::uint64_t h =
            static_cast<std::uint64_t>(hash_token(tokens[i])) * 116049371u +
            hash_token(tokens[i + 1]);
        ids.push_back(static_cast<TokenId>(words_.size() + h % buckets_));
      }
    }
    return ids;
  }

  std::size_t input_size() const { return words_.size() + buckets_; }
  const Vocabulary &words() const { return words_; }
  std::uint32_t buckets() const { return buckets_; }

 private:
  Vocabulary words_;
  std::uint32_t buckets_ = 0;
};

inline constexpr std::uint32_t kDefaultBigramBuckets = 2000000;

// Relation labels. With inverse labels enabled, class r + R means "the
// question entity is the object of relation r".
class QaLabels {
 public:
  QaLabels() = default;
  QaLabels(std::size_t relation_count, bool with_inverse)
      : relations_(relation_count), inverse_(with_inverse) {}

  std::size_t size() const { return inverse_ ? 2 * relations_ : relations_; }
  std::size_t relation_count() const { return relations_; }
  bool with_inverse() const { return inverse_; }

  ClassId forward(std::int32_t r) const { return r; }
  ClassId inverse(std::int32_t r) const {
    return static_cast<ClassId>(relations_ + r);
  }
  std::int32_t relation(ClassId c) const {
    return static_cast<std::size_t>(c) < relations_
               ? c
               : static_cast<std::int32_t>(c - relations_);
  }
  bool is_inverse(ClassId c) const {
    return static_cast<std::size_t>(c) >= relations_;
  }

  std::string name(ClassId c, const Vocabulary &relations) const {
    const std::string &base = relations.name(relation(c));
    return is_inverse(c) ? "~" + base : base;
  }

  // -1 when unknown.
  ClassId lookup(std::string_view name, const Vocabulary &relations) const {
    if (inverse_ && !name.empty() && name.front() == '~') {
      const std::int32_t r = relations.lookup(name.substr(1));
      return r < 0 ? -1 : inverse(r);
    }
    return relations.lookup(name);
  }

 private:
  std::size_t relations_ = 0;
  bool inverse_ = false;
};

// KB plus per-entity relation indexes used to prune the answer loop.
class QaKnowledgeBase {
 public:
  QaKnowledgeBase() = default;
  explicit QaKnowledgeBase(TripleStore store) : store_(std::move(store)) {
    for (const Triple &t : store_.triples) {
      add_unique(out_[t.subject], t.relation);
      add_unique(in_[t.object], t.relation);
    }
  }

  const TripleStore &store() const { return store_; }
  const Vocabulary &entities() const { return store_.entities; }
  const Vocabulary &relations() const { return store_.relations; }

  // Entities reached from `entity` through label `c`.
  std::span<const std::int32_t> follow(std::int32_t entity, ClassId c,
                                       const QaLabels &labels) const {
    const std::int32_t r = labels.relation(c);
    return labels.is_inverse(c) ? store_.known.subjects(r, entity)
                                : store_.known.objects(entity, r);
  }

  std::span<const std::int32_t> out_relations(std::int32_t entity) const {
    auto it = out_.find(entity);
    return it == out_.end() ? std::span<const std::int32_t>{} : it->second;
  }
  std::span<const std::int32_t> in_relations(std::int32_t entity) const {
    auto it = in_.find(entity);
    return it == in_.end() ? std::span<const std::int32_t>{} : it->second;
  }

 private:
  static void add_unique(std::vector<std::int32_t> &v, std::int32_t r) {
    if (std::find(v.begin(), v.end(), r) == v.end()) v.push_back(r);
  }

  TripleStore store_;
  std::unordered_map<std::int32_t, std::vector<std::int32_t>> out_;
  std::unordered_map<std::int32_t, std::vector<std::int32_t>> in_;
};

struct QAPair {
  std::string question;
  // Raw strings as distributed; resolved against a KB by resolve_pairs.
  std::vector<std::string> answer_names;
  std::string subject_name;
  std::string relation_name;
  // Resolved answer entities.
  std::vector<std::int32_t> answers;
  // Supporting fact when the dataset provides one (SimpleQuestions), or the
  // one found by relation extraction.
  std::optional<std::int32_t> gold_subject;
  std::optional<ClassId> gold_relation;
};

struct RelationExtractionSummary {
  std::size_t pairs = 0;
  std::size_t matched = 0;   // pairs that produced at least one relation
  std::size_t produced = 0;  // labelled pairs emitted
};

// For pairs without a supporting fact: links the question and emits one
// labelled pair per distinct relation connecting a linked entity to a gold
// answer. The subject is the first linked entity (linker order) that
// realises the relation. Pairs that already carry a gold relation are copied.
inline std::vector<QAPair> extract_relations(std::span<const QAPair> pairs,
                                             const QaKnowledgeBase &kb,
                                             const QaLabels &labels,
                                             const AliasTable &table,
                                             RelationExtractionSummary *summary = nullptr) {
  std::vector<QAPair> out;
  RelationExtractionSummary s;
  for (const QAPair &pair : pairs) {
    ++s.pairs;
    if (pair.gold_relation) {
      out.push_back(pair);
      ++s.matched;
      ++s.produced;
      continue;
    }
    const std::unordered_set<std::int32_t> gold(pair.answers.begin(),
                                                pair.answers.end());
    std::vector<ClassId> seen;
    for (std::int32_t e : link_entities(pair.question, table)) {
      for (std::int32_t a : pair.answers) {
        auto add = [&](ClassId c) {
          if (std::find(seen.begin(), seen.end(), c) != seen.end()) return;
          seen.push_back(c);
          QAPair labelled = pair;
          labelled.gold_subject = e;
          labelled.gold_relation = c;
          out.push_back(std::move(labelled));
        };
        for (std::int32_t r : kb.store().known.relations(e, a)) {
          add(labels.forward(r));
        }
        if (labels.with_inverse()) {
          for (std::int32_t r : kb.store().known.relations(a, e)) {
            add(labels.inverse(r));
          }
        }
      }
    }
    if (!seen.empty()) ++s.matched;
    s.produced += seen.size();
  }
  if (summary != nullptr) *summary = s;
  return out;
}

struct TrainingSetSummary {
  std::size_t skipped_no_relation = 0;
  std::size_t skipped_no_features = 0;
};

// One example per labelled pair: question features => gold relation.
inline std::vector<Example> make_relation_training_set(
    std::span<const QAPair> pairs, const QuestionFeaturizer &featurizer,
    TrainingSetSummary *summary = nullptr) {
  std::vector<Example> out;
  TrainingSetSummary s;
  for (const QAPair &pair : pairs) {
    if (!pair.gold_relation || *pair.gold_relation < 0) {
      ++s.skipped_no_relation;
      continue;
    }
    auto features = featurizer.featurize(pair.question);
    if (features.empty()) {
      ++s.skipped_no_features;
      continue;
    }
    out.push_back({std::move(features), *pair.gold_relation});
  }
  if (summary != nullptr) *summary = s;
  return out;
}

// Everything answer_question reads. All members are read-only.
struct QaSystem {
  const EmbeddingModel *model = nullptr;
  const QuestionFeaturizer *featurizer = nullptr;
  const QaLabels *labels = nullptr;
  const QaKnowledgeBase *kb = nullptr;
  const AliasTable *aliases = nullptr;
};

struct Answer {
  ClassId relation = 0;
  std::int32_t subject = 0;
  std::vector<std::int32_t> entities;
};

// Relation classes by descending score; ties by class id. An empty feature
// set scores every class equally.
inline std::vector<ClassId> rank_relations(std::string_view question,
                                           const QaSystem &qa) {
  const EmbeddingModel &model = *qa.model;
  std::vector<float> scores(model.output_class_count(), 0.0f);
  const auto features = qa.featurizer->featurize(question);
  if (!features.empty()) {
    auto hidden = average_input<float>(features, model);
    score_all<float>(hidden, model, scores);
  }
  std::vector<ClassId> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ClassId a, ClassId b) { return scores[a] > scores[b]; });
  return order;
}

// Walks relations from most to least likely; the first linked candidate (in
// linker order) having an edge with the relation gives the answer.
inline std::optional<Answer> answer_question(std::string_view question,
                                             const QaSystem &qa) {
  const auto candidates = link_entities(question, *qa.aliases);
  if (candidates.empty()) return std::nullopt;
  const QaLabels &labels = *qa.labels;

  // Labels realised by at least one candidate; others can be skipped.
  std::vector<char> reachable(labels.size(), 0);
  bool any = false;
  for (std::int32_t e : candidates) {
    for (std::int32_t r : qa.kb->out_relations(e)) {
      reachable[labels.forward(r)] = 1;
      any = true;
    }
    if (labels.with_inverse()) {
      for (std::int32_t r : qa.kb->in_relations(e)) {
        reachable[labels.inverse(r)] = 1;
        any = true;
      }
    }
  }
  if (!any) return std::nullopt;

  for (ClassId c : rank_relations(question, qa)) {
    if (!reachable[c]) continue;
    for (std::int32_t e : candidates) {
      auto reached = qa.kb->follow(e, c, labels);
      if (!reached.empty()) {
        return Answer{c, e, {reached.begin(), reached.end()}};
      }
    }
  }
  return std::nullopt;
}

enum class QaMetric {
  kSubjectRelation,  // predicted (subject, relation) equals the gold fact
  kHitsAt1,          // first predicted answer is a gold answer
};

inline bool qa_correct(const QAPair &pair, const std::optional<Answer> &answer,
                       QaMetric metric) {
  if (!answer) return false;
  if (metric == QaMetric::kSubjectRelation) {
    return pair.gold_subject && pair.gold_relation &&
           answer->subject == *pair.gold_subject &&
           answer->relation == *pair.gold_relation;
  }
  return !answer->entities.empty() &&
         std::find(pair.answers.begin(), pair.answers.end(),
                   answer->entities.front()) != pair.answers.end();
}

// Prediction dump line: <question>\t<relation>\t<subject>\t<answers>.
inline std::string prediction_line(const QAPair &pair,
                                   const std::optional<Answer> &answer,
                                   const QaSystem &qa) {
  std::string question = pair.question;
  std::replace(question.begin(), question.end(), '\t', ' ');
  if (!answer) return question + "\tNO_ANSWER\tNO_ANSWER\t";
  std::string line = question + '\t' +
                     qa.labels->name(answer->relation, qa.kb->relations()) +
                     '\t' + qa.kb->entities().name(answer->subject) + '\t';
  for (std::size_t i = 0; i < answer->entities.size(); ++i) {
    if (i > 0) line.push_back(',');
    line += qa.kb->entities().name(answer->entities[i]);
  }
  return line;
}

inline EvalReport evaluate_qa(std::span<const QAPair> pairs, const QaSystem &qa,
                              QaMetric metric,
                              std::ostream *predictions = nullptr) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_qa: empty test set");
  const auto start = std::chrono::steady_clock::now();
  std::int64_t correct = 0;
  for (const QAPair &pair : pairs) {
    const auto answer = answer_question(pair.question, qa);
    correct += qa_correct(pair, answer, metric) ? 1 : 0;
    if (predictions != nullptr) {
      *predictions << prediction_line(pair, answer, qa) << '\n';
    }
  }
  EvalReport r;
  r.metric = metric == QaMetric::kSubjectRelation ? "accuracy" : "hits@1";
  r.mode = "-";
  r.num_queries = static_cast<std::int64_t>(pairs.size());
  r.value = 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.size());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  return r;
}

// Percentage of pairs whose gold relation is the classifier's top choice.
inline double relation_top1_accuracy(std::span<const QAPair> pairs,
                                     const QaSystem &qa) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const QAPair &pair : pairs) {
    if (!pair.gold_relation) continue;
    ++total;
    correct += rank_relations(pair.question, qa).front() == *pair.gold_relation;
  }
  return total == 0 ? 0.0 : 100.0 * correct / total;
}

}  // namespace kge

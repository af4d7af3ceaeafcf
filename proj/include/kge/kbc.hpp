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

// Knowledge base completion as classification.
//
// Entity prediction: the input bag is {anchor entity, relation token} where
// each relation owns one token for predicting the object and another for
// predicting the subject; the classes are all entities. The averaged hidden
// vector is (v_e + v_r) / 2, so a class score is 0.5 * <v_e + v_r, w_p>.
//
// Relation prediction: each entity owns a subject token and an object token;
// the input bag is {subject token, object token} and the classes are all
// relations.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kge/embedding.hpp"
#include "kge/report.hpp"
#include "kge/triples.hpp"

namespace kge {

enum class Task : std::uint8_t {
  kEntityPrediction = 1,
  kRelationPrediction = 2,
  kQaRelation = 3,
};

enum class Direction : std::uint8_t {
  kPredictObject,
  kPredictSubject,
  kPredictRelation,
};

enum class RankMode { kRaw, kFiltered };

inline const char *to_string(RankMode mode) {
  return mode == RankMode::kRaw ? "raw" : "filtered";
}

class DirectionalVocab {
 public:
  DirectionalVocab(Task task, std::size_t entity_count,
                   std::size_t relation_count)
      : task_(task), entities_(entity_count), relations_(relation_count) {
    if (task == Task::kQaRelation) {
      throw std::invalid_argument("DirectionalVocab: not a completion task");
    }
  }

  Task task() const { return task_; }
  std::size_t entity_count() const { return entities_; }
  std::size_t relation_count() const { return relations_; }

  std::size_t input_size() const {
    return task_ == Task::kEntityPrediction ? entities_ + 2 * relations_
                                            : 2 * entities_;
  }
  std::size_t output_size() const {
    return task_ == Task::kEntityPrediction ? entities_ : relations_;
  }

  // Entity prediction tokens.
  TokenId entity_token(std::int32_t entity) const { return entity; }
  TokenId relation_token(std::int32_t relation, Direction d) const {
    return static_cast<TokenId>(entities_ + 2 * relation +
                                (d == Direction::kPredictSubject ? 1 : 0));
  }

  // Relation prediction tokens.
  TokenId subject_token(std::int32_t entity) const { return 2 * entity; }
  TokenId object_token(std::int32_t entity) const { return 2 * entity + 1; }

 private:
  Task task_;
  std::size_t entities_;
  std::size_t relations_;
};

inline DirectionalVocab build_vocab(const TripleStore &store, Task task) {
  if (store.triples.empty() || store.entities.empty()) {
    throw std::invalid_argument("build_vocab: empty triple store");
  }
  return DirectionalVocab(task, store.entities.size(), store.relations.size());
}

// A ranking query derived from a triple. `input` is empty when the triple
// mentions a name unknown to the model; such queries count as misses.
struct Query {
  std::vector<TokenId> input;
  ClassId target = 0;
  Triple triple;
  Direction direction = Direction::kPredictObject;
};

namespace detail {

inline bool in_range(std::int32_t id, std::size_t n) {
  return id >= 0 && static_cast<std::size_t>(id) < n;
}

}  // namespace detail

// Entity task: two queries per triple (object, then subject). Relation task:
// one query per triple.
inline std::vector<Query> make_queries(std::span<const Triple> triples,
                                       const DirectionalVocab &vocab) {
  std::vector<Query> out;
  const std::size_t ne = vocab.entity_count();
  const std::size_t nr = vocab.relation_count();
  out.reserve(triples.size() *
              (vocab.task() == Task::kEntityPrediction ? 2 : 1));
  for (const Triple &t : triples) {
    const bool known = detail::in_range(t.subject, ne) &&
                       detail::in_range(t.object, ne) &&
                       detail::in_range(t.relation, nr);
    if (vocab.task() == Task::kEntityPrediction) {
      Query fwd{{}, t.object, t, Direction::kPredictObject};
      Query bwd{{}, t.subject, t, Direction::kPredictSubject};
      if (known) {
        fwd.input = {vocab.entity_token(t.subject),
                     vocab.relation_token(t.relation, Direction::kPredictObject)};
        bwd.input = {vocab.entity_token(t.object),
                     vocab.relation_token(t.relation, Direction::kPredictSubject)};
      }
      out.push_back(std::move(fwd));
      out.push_back(std::move(bwd));
    } else {
      Query q{{}, t.relation, t, Direction::kPredictRelation};
      if (known) {
        q.input = {vocab.subject_token(t.subject), vocab.object_token(t.object)};
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

inline void check_task(const DirectionalVocab &vocab, Task task,
                       const char *what) {
  if (vocab.task() != task) {
    throw std::invalid_argument(std::string(what) + ": vocabulary built for "
                                "another task");
  }
}

inline void check_triples(std::span<const Triple> triples,
                          const DirectionalVocab &vocab) {
  for (const Triple &t : triples) {
    if (!detail::in_range(t.subject, vocab.entity_count()) ||
        !detail::in_range(t.object, vocab.entity_count()) ||
        !detail::in_range(t.relation, vocab.relation_count())) {
      throw std::out_of_range("triple id outside the vocabulary");
    }
  }
}

// Each triple (e, r, p) gives {e, r->object} => p and {p, r->subject} => e.
inline std::vector<Example> encode_entity_prediction(
    std::span<const Triple> triples, const DirectionalVocab &vocab) {
  check_task(vocab, Task::kEntityPrediction, "encode_entity_prediction");
  check_triples(triples, vocab);
  std::vector<Example> out;
  out.reserve(2 * triples.size());
  for (Query &q : make_queries(triples, vocab)) {
    out.push_back({std::move(q.input), q.target});
  }
  return out;
}

inline std::vector<Example> encode_entity_prediction(
    const TripleStore &store, const DirectionalVocab &vocab) {
  return encode_entity_prediction(store.triples, vocab);
}

// Each triple (e, r, p) gives {e as subject, p as object} => r.
inline std::vector<Example> encode_relation_prediction(
    std::span<const Triple> triples, const DirectionalVocab &vocab) {
  check_task(vocab, Task::kRelationPrediction, "encode_relation_prediction");
  check_triples(triples, vocab);
  std::vector<Example> out;
  out.reserve(triples.size());
  for (const Triple &t : triples) {
    out.push_back({{vocab.subject_token(t.subject), vocab.object_token(t.object)},
                   t.relation});
  }
  return out;
}

inline std::vector<Example> encode_relation_prediction(
    const TripleStore &store, const DirectionalVocab &vocab) {
  return encode_relation_prediction(store.triples, vocab);
}

struct DecodedExample {
  Triple triple;
  Direction direction;

  bool operator==(const DecodedExample &) const = default;
};

// Inverse of the encoders.
inline DecodedExample decode(const Example &example,
                             const DirectionalVocab &vocab) {
  if (example.input_tokens.size() != 2) {
    throw std::invalid_argument("decode: expected a two-token example");
  }
  const auto ne = static_cast<TokenId>(vocab.entity_count());
  if (vocab.task() == Task::kRelationPrediction) {
    const TokenId a = example.input_tokens[0];
    const TokenId b = example.input_tokens[1];
    if (a % 2 != 0 || b % 2 != 1) {
      throw std::invalid_argument("decode: bad subject/object tokens");
    }
    return {{a / 2, example.label, b / 2}, Direction::kPredictRelation};
  }
  const TokenId anchor = example.input_tokens[0];
  const TokenId rel = example.input_tokens[1] - ne;
  if (anchor >= ne || rel < 0) {
    throw std::invalid_argument("decode: bad entity/relation tokens");
  }
  if (rel % 2 == 0) {
    return {{anchor, rel / 2, example.label}, Direction::kPredictObject};
  }
  return {{example.label, rel / 2, anchor}, Direction::kPredictSubject};
}

// Other true answers of a query, taken from the known index. The target
// itself may appear in the list and is ignored by ranking.
inline std::span<const std::int32_t> known_answers(const Query &q,
                                                   const KnownTriples &known) {
  switch (q.direction) {
    case Direction::kPredictObject:
      return known.objects(q.triple.subject, q.triple.relation);
    case Direction::kPredictSubject:
      return known.subjects(q.triple.relation, q.triple.object);
    case Direction::kPredictRelation:
      return known.relations(q.triple.subject, q.triple.object);
  }
  return {};
}

inline constexpr std::int64_t kMissRank = std::numeric_limits<std::int64_t>::max();

// 1 + number of non-excluded candidates scoring strictly above the target.
// Ties go to the target.
template <typename Real>
std::int64_t rank_target(std::span<const Real> scores, ClassId target,
                         std::span<const std::int32_t> excluded = {}) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) {
    throw std::logic_error("rank_target: target not among the candidates");
  }
  const Real t = scores[target];
  std::int64_t above = 0;
  for (Real s : scores) above += s > t ? 1 : 0;
  for (std::int32_t c : excluded) {
    if (c != target && detail::in_range(c, scores.size()) && scores[c] > t) {
      --above;
    }
  }
  return above + 1;
}

template <typename Real>
std::int64_t rank_target(const BasicEmbeddingModel<Real> &model,
                         const Query &query, RankMode mode,
                         const KnownTriples *known = nullptr) {
  if (query.input.empty()) return kMissRank;
  if (mode == RankMode::kFiltered && known == nullptr) {
    throw std::invalid_argument("rank_target: filtered mode needs known index");
  }
  auto hidden = average_input<Real>(query.input, model);
  auto scores = score_all<Real>(hidden, model);
  return rank_target<Real>(
      scores, query.target,
      mode == RankMode::kFiltered ? known_answers(query, *known)
                                  : std::span<const std::int32_t>{});
}

struct QueryRanks {
  std::vector<std::int64_t> raw;
  std::vector<std::int64_t> filtered;  // empty unless a known index was given
};

// Ranks every query of `triples` in raw mode, and in filtered mode when
// `known` is non-null. Queries are spread over `threads` readers.
template <typename Real>
QueryRanks compute_ranks(const BasicEmbeddingModel<Real> &model,
                         const DirectionalVocab &vocab,
                         std::span<const Triple> triples,
                         const KnownTriples *known, int threads = 1) {
  if (vocab.input_size() != model.input_vocab_size() ||
      vocab.output_size() != model.output_class_count()) {
    throw std::invalid_argument("compute_ranks: model does not match vocab");
  }
  const auto queries = make_queries(triples, vocab);
  QueryRanks ranks;
  ranks.raw.resize(queries.size());
  if (known != nullptr) ranks.filtered.resize(queries.size());

  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<Real> hidden(model.dim());
    std::vector<Real> scores(model.output_class_count());
    for (std::size_t i = begin; i < end; ++i) {
      const Query &q = queries[i];
      if (q.input.empty()) {
        ranks.raw[i] = kMissRank;
        if (known != nullptr) ranks.filtered[i] = kMissRank;
        continue;
      }
      average_input<Real>(q.input, model, hidden);
      score_all<Real>(hidden, model, scores);
      ranks.raw[i] = rank_target<Real>(scores, q.target);
      if (known != nullptr) {
        ranks.filtered[i] =
            rank_target<Real>(scores, q.target, known_answers(q, *known));
      }
    }
  };
  const std::size_t n = queries.size();
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                              std::max<std::size_t>(n, 1));
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(run, n * w / workers, n * (w + 1) / workers);
    }
  }
  return ranks;
}

// Percentage of ranks <= k.
inline double hit_at(std::span<const std::int64_t> ranks, std::int64_t k) {
  if (ranks.empty()) throw std::invalid_argument("hit_at: no ranks");
  std::int64_t hits = 0;
  for (std::int64_t r : ranks) hits += r <= k ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

template <typename Real>
EvalReport evaluate_hits(const BasicEmbeddingModel<Real> &model,
                         const DirectionalVocab &vocab,
                         std::span<const Triple> test, std::int64_t k,
                         RankMode mode, const KnownTriples *known = nullptr,
                         int threads = 1) {
  if (test.empty()) throw std::invalid_argument("evaluate_hits: empty test set");
  if (mode == RankMode::kFiltered && known == nullptr) {
    throw std::invalid_argument("evaluate_hits: filtered mode needs known index");
  }
  const auto start = std::chrono::steady_clock::now();
  auto ranks = compute_ranks(model, vocab, test,
                             mode == RankMode::kFiltered ? known : nullptr,
                             threads);
  const auto &used = mode == RankMode::kFiltered ? ranks.filtered : ranks.raw;
  EvalReport r;
  r.metric = "hit@" + std::to_string(k);
  r.mode = to_string(mode);
  r.value = hit_at(used, k);
  r.num_queries = static_cast<std::int64_t>(used.size());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  return r;
}

// K = floor(percent * classes / 100).
inline std::int64_t k_for_percent(double percent, std::size_t classes) {
  if (!(percent > 0 && percent <= 100)) {
    throw std::invalid_argument("hit percent must be in (0, 100]");
  }
  return static_cast<std::int64_t>(
      std::floor(percent * static_cast<double>(classes) / 100.0 + 1e-9));
}

template <typename Real>
EvalReport evaluate_hit_at_percent(const BasicEmbeddingModel<Real> &model,
                                   const DirectionalVocab &vocab,
                                   std::span<const Triple> test, double percent,
                                   int threads = 1) {
  check_task(vocab, Task::kRelationPrediction, "evaluate_hit_at_percent");
  const std::int64_t k = k_for_percent(percent, model.output_class_count());
  EvalReport r =
      evaluate_hits(model, vocab, test, k, RankMode::kRaw, nullptr, threads);
  r.metric = "hit@" + format_number(percent, percent == std::floor(percent) ? 0 : 2) +
             "%(k=" + std::to_string(k) + ")";
  return r;
}

}  // namespace kge

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

// Batch command line: train, eval, qa {train, answer, eval}, grid.
//
// Reports go to the output stream as TSV, logs to the error stream. Exit
// codes: 0 success, 1 runtime failure, 2 usage error.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kge/kge.hpp"

namespace kge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

inline std::string fnv1a64_hex(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// What was run and with which settings. The hash covers the command,
// parameters, paths and seed; timings and metrics are excluded so that
// identical invocations hash identically.
struct RunManifest {
  std::string command;
  Json params = Json::object();
  Json paths = Json::object();
  std::uint64_t seed = 0;
  double wall_time_seconds = 0;
  std::vector<EvalReport> metrics;

  Json identity() const {
    Json j;
    j["command"] = command;
    j["params"] = params;
    j["paths"] = paths;
    j["seed"] = seed;
    return j;
  }

  std::string hash() const { return fnv1a64_hex(identity().dump()).substr(0, 12); }

  Json to_json() const {
    Json j = identity();
    j["hash"] = hash();
    j["wall_time_seconds"] = wall_time_seconds;
    j["metrics"] = Json::array();
    for (const auto &m : metrics) {
      j["metrics"].push_back({{"dataset", m.dataset},
                              {"metric", m.metric},
                              {"mode", m.mode},
                              {"value", m.value},
                              {"num_queries", m.num_queries},
                              {"seconds", m.seconds}});
    }
    return j;
  }
};

inline void write_manifest(const RunManifest &m, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << m.to_json().dump(2) << '\n';
}

// The emitted dataset column is `<dataset>@<manifest hash>`.
inline std::string report_line(EvalReport r, const RunManifest &m) {
  r.dataset += "@" + m.hash();
  return to_tsv(r);
}

inline int default_threads() {
  if (const char *env = std::getenv("KGE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception &) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

inline std::string dataset_name(const std::string &path) {
  return std::filesystem::path(path).stem().string();
}

// ---------------------------------------------------------------------------
// Knowledge base completion.

struct KbcTrainOptions {
  std::string task = "entity";
  std::string train;
  std::string valid;
  bool include_valid = false;
  std::size_t dim = 100;
  int epoch = 5;
  int neg = 5;
  double lr = 0.2;
  std::string loss = "ns";
  int threads = 1;
  std::uint64_t seed = 0;
  std::string out;
};

inline Task parse_kbc_task(const std::string &task) {
  if (task == "entity") return Task::kEntityPrediction;
  if (task == "relation") return Task::kRelationPrediction;
  throw UsageError("unknown task '" + task + "'");
}

struct KbcData {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
};

// Train and valid share one vocabulary pass, train first.
inline KbcData load_kbc_data(const std::string &train, const std::string &valid) {
  KbcData data;
  data.train = read_triples(train, data.entities, data.relations);
  if (data.train.empty()) throw std::invalid_argument(train + ": no triples");
  if (!valid.empty()) {
    data.valid = read_triples(valid, data.entities, data.relations);
  }
  return data;
}

struct KbcRun {
  ModelFile file;
  TrainStats stats;
  RunManifest manifest;
};

inline LossConfig loss_config(const std::string &loss, int neg) {
  if (loss == "softmax") return {LossKind::kSoftmax, 0};
  if (loss == "ns") return {LossKind::kNegativeSampling, neg};
  throw UsageError("unknown loss '" + loss + "'");
}

inline KbcRun train_kbc(const KbcData &data, const KbcTrainOptions &opt,
                        bool include_valid, std::ostream *log) {
  const Task task = parse_kbc_task(opt.task);
  const DirectionalVocab vocab(task, data.entities.size(), data.relations.size());
  std::vector<Triple> triples = data.train;
  if (include_valid) {
    triples.insert(triples.end(), data.valid.begin(), data.valid.end());
  }
  const auto examples = task == Task::kEntityPrediction
                            ? encode_entity_prediction(triples, vocab)
                            : encode_relation_prediction(triples, vocab);
  TrainConfig config;
  config.epochs = opt.epoch;
  config.lr0 = opt.lr;
  config.loss = loss_config(opt.loss, opt.neg);
  config.threads = opt.threads;
  config.seed = opt.seed;
  config.dim = opt.dim;
  config.log = log;

  KbcRun run;
  run.manifest.command = "train";
  run.manifest.params = {{"task", opt.task},   {"dim", opt.dim},
                         {"epoch", opt.epoch}, {"loss", opt.loss},
                         {"neg", opt.loss == "ns" ? opt.neg : 0},
                         {"lr", opt.lr},       {"threads", opt.threads},
                         {"include_valid", include_valid}};
  run.manifest.paths = {{"train", opt.train}, {"valid", opt.valid}};
  run.manifest.seed = opt.seed;

  auto [model, stats] =
      train<float>(examples, config, vocab.input_size(), vocab.output_size());
  run.stats = stats;
  run.manifest.wall_time_seconds = stats.wall_time_seconds;
  run.file.task = task;
  run.file.model = std::move(model);
  run.file.vocabularies["entities"] = data.entities.names();
  run.file.vocabularies["relations"] = data.relations.names();
  run.file.metadata["manifest"] = run.manifest.identity().dump();
  run.file.metadata["manifest_hash"] = run.manifest.hash();
  return run;
}

struct KbcModel {
  ModelFile file;
  Vocabulary entities;
  Vocabulary relations;
  DirectionalVocab vocab{Task::kEntityPrediction, 0, 0};
};

inline KbcModel open_kbc_model(ModelFile file) {
  if (file.task == Task::kQaRelation) {
    throw UsageError("model was trained for question answering, not completion");
  }
  KbcModel m;
  m.entities = Vocabulary(file.vocabulary("entities"));
  m.relations = Vocabulary(file.vocabulary("relations"));
  m.vocab = DirectionalVocab(file.task, m.entities.size(), m.relations.size());
  if (file.model.input_vocab_size() != m.vocab.input_size() ||
      file.model.output_class_count() != m.vocab.output_size()) {
    throw ModelFileError("matrix sizes do not match the vocabularies");
  }
  m.file = std::move(file);
  return m;
}

// Reads triples against a fixed vocabulary; unknown names become -1.
inline std::vector<Triple> read_frozen(const std::string &path, const KbcModel &m) {
  Vocabulary entities = m.entities;
  Vocabulary relations = m.relations;
  return read_triples(path, entities, relations, {}, /*frozen=*/true);
}

inline KnownTriples known_from(const std::vector<std::string> &paths,
                               const KbcModel &m) {
  KnownTriples known;
  for (const auto &p : paths) {
    for (const Triple &t : read_frozen(p, m)) {
      if (t.subject >= 0 && t.relation >= 0 && t.object >= 0) known.insert(t);
    }
  }
  return known;
}

inline void print_train_stats(std::ostream &out, const TrainStats &s,
                              const RunManifest &m) {
  out << "# train examples=" << s.examples_processed
      << " final_loss=" << format_number(s.final_avg_loss, 6)
      << " seconds=" << format_number(s.wall_time_seconds, 3)
      << " manifest=" << m.hash() << '\n';
}

// Filtered Hit@K, raw Hit@K, and Hit@p% reports for one model.
struct KbcEvalRequest {
  std::int64_t k = 10;
  std::string mode = "filtered";  // raw | filtered | both
  std::optional<double> hit_percent;
  int threads = 1;
  std::string dataset;
};

inline std::vector<EvalReport> eval_kbc(const KbcModel &m,
                                        const std::vector<Triple> &test,
                                        const KnownTriples *known,
                                        const KbcEvalRequest &req) {
  std::vector<EvalReport> out;
  if (req.hit_percent) {
    auto r = evaluate_hit_at_percent(m.file.model, m.vocab, test,
                                     *req.hit_percent, req.threads);
    r.dataset = req.dataset;
    out.push_back(r);
    return out;
  }
  const auto start = std::chrono::steady_clock::now();
  const bool want_raw = req.mode == "raw" || req.mode == "both";
  const bool want_filtered = req.mode == "filtered" || req.mode == "both";
  auto ranks = compute_ranks(m.file.model, m.vocab, test,
                             want_filtered ? known : nullptr, req.threads);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  auto make = [&](RankMode mode, const std::vector<std::int64_t> &ranks) {
    EvalReport r;
    r.dataset = req.dataset;
    r.metric = "hit@" + std::to_string(req.k);
    r.mode = to_string(mode);
    r.value = hit_at(ranks, req.k);
    r.num_queries = static_cast<std::int64_t>(ranks.size());
    r.seconds = seconds;
    return r;
  };
  if (want_raw) out.push_back(make(RankMode::kRaw, ranks.raw));
  if (want_filtered) out.push_back(make(RankMode::kFiltered, ranks.filtered));
  return out;
}

// ---------------------------------------------------------------------------
// Question answering.

struct QaTrainOptions {
  std::string pairs;
  std::string valid_pairs;
  std::string format = "simplequestions";  // simplequestions | wikimovies
  std::string kb;
  std::string kb_format = "tsv";  // tsv | fb | wikimovies
  std::string aliases;
  std::size_t dim = 100;
  int epoch = 5;
  double lr = 1.0;
  bool bigrams = false;
  std::uint32_t buckets = kDefaultBigramBuckets;
  std::optional<bool> inverse;  // defaults to true for wikimovies
  int threads = 1;
  std::uint64_t seed = 0;
  std::string out;

  bool use_inverse() const { return inverse.value_or(format == "wikimovies"); }
};

inline TripleStore load_kb(const std::string &path, const std::string &format) {
  if (format == "wikimovies") {
    auto in = detail::open_input(path);
    auto store = parse_wikimovies_kb(in);
    if (store.triples.empty()) throw std::invalid_argument(path + ": empty KB");
    return store;
  }
  if (format != "tsv" && format != "fb") {
    throw UsageError("unknown KB format '" + format + "'");
  }
  return parse_triples(std::filesystem::path(path),
                       TripleFormat{.split_objects = format == "fb"});
}

inline std::vector<QAPair> load_pairs(const std::string &path,
                                      const std::string &format,
                                      std::ostream *warn) {
  auto in = detail::open_input(path);
  if (format == "simplequestions") return parse_simplequestions(in, nullptr, warn);
  if (format == "wikimovies") return parse_wikimovies(in, nullptr, warn);
  throw UsageError("unknown QA format '" + format + "'");
}

inline AliasTable load_aliases(const std::string &path, const QaKnowledgeBase &kb,
                               std::span<const std::int32_t> subjects,
                               std::ostream *warn) {
  if (path.empty()) return alias_table_from_names(kb.entities(), subjects);
  auto in = detail::open_input(path);
  return build_alias_table(in, kb.entities(), subjects, nullptr, warn);
}

// Labelled training pairs and the linked subjects that feed the alias
// frequencies.
struct QaTrainingData {
  std::vector<QAPair> labelled;
  std::vector<std::int32_t> subjects;
};

inline QaTrainingData prepare_qa_training(std::vector<QAPair> pairs,
                                          const QaKnowledgeBase &kb,
                                          const QaLabels &labels,
                                          const std::string &aliases,
                                          std::ostream *warn) {
  resolve_pairs(pairs, kb, labels, nullptr, warn);
  QaTrainingData data;
  const bool has_gold = std::all_of(pairs.begin(), pairs.end(), [](const QAPair &p) {
    return !p.relation_name.empty();
  });
  if (has_gold) {
    data.labelled = std::move(pairs);
  } else {
    const AliasTable unweighted = load_aliases(aliases, kb, {}, warn);
    RelationExtractionSummary s;
    data.labelled = extract_relations(pairs, kb, labels, unweighted, &s);
    if (warn != nullptr) {
      *warn << "relation extraction: " << s.matched << "/" << s.pairs
            << " pairs matched, " << s.produced << " labelled examples\n";
    }
  }
  for (const QAPair &p : data.labelled) {
    if (p.gold_subject) data.subjects.push_back(*p.gold_subject);
  }
  return data;
}

struct QaBundle {
  ModelFile file;
  QuestionFeaturizer featurizer;
  QaLabels labels;
  QaKnowledgeBase kb;
  AliasTable aliases;

  QaSystem system() const {
    return {&file.model, &featurizer, &labels, &kb, &aliases};
  }
};

inline QaBundle open_qa_model(ModelFile file, QaKnowledgeBase kb,
                              const std::string &aliases, std::ostream *warn) {
  if (file.task != Task::kQaRelation) {
    throw UsageError("model was not trained for question answering");
  }
  QaBundle b;
  const std::uint32_t buckets =
      static_cast<std::uint32_t>(std::stoul(file.meta("buckets", "0")));
  b.featurizer = QuestionFeaturizer(Vocabulary(file.vocabulary("words")), buckets);
  const auto &relations = file.vocabulary("relations");
  b.labels = QaLabels(relations.size(), file.meta("inverse") == "1");
  if (b.featurizer.input_size() != file.model.input_vocab_size() ||
      b.labels.size() != file.model.output_class_count()) {
    throw ModelFileError("matrix sizes do not match the vocabularies");
  }
  // Relation ids of the model refer to its own relation list; the KB must
  // carry exactly that list.
  if (kb.relations().names() != relations) {
    Vocabulary remapped(relations);
    for (const auto &name : kb.relations().names()) remapped.add(name);
    if (remapped.size() != relations.size()) {
      throw UsageError("KB has relations unknown to the model");
    }
    TripleStore store;
    store.entities = kb.entities();
    store.relations = remapped;
    for (const Triple &t : kb.store().triples) {
      Triple u = t;
      u.relation = remapped.lookup(kb.relations().name(t.relation));
      store.triples.push_back(u);
    }
    store.known.insert(store.triples);
    kb = QaKnowledgeBase(std::move(store));
  }
  b.kb = std::move(kb);
  std::vector<std::int32_t> subjects;
  for (const auto &line : file.vocabulary("entity_frequency")) {
    auto cols = detail::split(line, '\t');
    if (cols.size() != 2) continue;
    const std::int32_t e = b.kb.entities().lookup(cols[0]);
    if (e < 0) continue;
    const auto count = std::stoull(std::string(cols[1]));
    for (std::uint64_t i = 0; i < count; ++i) subjects.push_back(e);
  }
  b.aliases = load_aliases(aliases, b.kb, subjects, warn);
  b.file = std::move(file);
  return b;
}

struct QaRun {
  ModelFile file;
  TrainStats stats;
  RunManifest manifest;
};

inline QaRun train_qa(const QaKnowledgeBase &kb, const QaTrainingData &data,
                      const QaTrainOptions &opt, std::ostream *log) {
  const QaLabels labels(kb.relations().size(), opt.use_inverse());
  std::vector<std::string> questions;
  questions.reserve(data.labelled.size());
  for (const QAPair &p : data.labelled) questions.push_back(p.question);
  const std::uint32_t buckets = opt.bigrams ? opt.buckets : 0;
  const auto featurizer = QuestionFeaturizer::build(questions, buckets);
  TrainingSetSummary summary;
  const auto examples =
      make_relation_training_set(data.labelled, featurizer, &summary);
  if (log != nullptr &&
      summary.skipped_no_relation + summary.skipped_no_features > 0) {
    *log << "warning: skipped " << summary.skipped_no_relation
         << " pairs without a relation and " << summary.skipped_no_features
         << " without features\n";
  }

  TrainConfig config;
  config.epochs = opt.epoch;
  config.lr0 = opt.lr;
  config.loss = {LossKind::kSoftmax, 0};
  config.threads = opt.threads;
  config.seed = opt.seed;
  config.dim = opt.dim;
  config.log = log;

  QaRun run;
  run.manifest.command = "qa train";
  run.manifest.params = {{"format", opt.format}, {"kb_format", opt.kb_format},
                         {"dim", opt.dim},       {"epoch", opt.epoch},
                         {"lr", opt.lr},         {"bigrams", opt.bigrams},
                         {"buckets", buckets},   {"inverse", opt.use_inverse()},
                         {"threads", opt.threads}};
  run.manifest.paths = {{"pairs", opt.pairs}, {"kb", opt.kb}, {"aliases", opt.aliases}};
  run.manifest.seed = opt.seed;

  auto [model, stats] = train<float>(examples, config, featurizer.input_size(),
                                     labels.size());
  run.stats = stats;
  run.manifest.wall_time_seconds = stats.wall_time_seconds;
  run.file.task = Task::kQaRelation;
  run.file.model = std::move(model);
  run.file.vocabularies["words"] = featurizer.words().names();
  run.file.vocabularies["relations"] = kb.relations().names();
  std::map<std::int32_t, std::uint64_t> freq;
  for (std::int32_t e : data.subjects) ++freq[e];
  auto &lines = run.file.vocabularies["entity_frequency"];
  for (auto [e, n] : freq) {
    lines.push_back(kb.entities().name(e) + '\t' + std::to_string(n));
  }
  run.file.metadata["buckets"] = std::to_string(buckets);
  run.file.metadata["inverse"] = opt.use_inverse() ? "1" : "0";
  run.file.metadata["format"] = opt.format;
  run.file.metadata["kb_format"] = opt.kb_format;
  run.file.metadata["manifest"] = run.manifest.identity().dump();
  run.file.metadata["manifest_hash"] = run.manifest.hash();
  return run;
}

inline QaMetric parse_qa_metric(const std::string &metric,
                                const std::string &format) {
  if (metric == "accuracy") return QaMetric::kSubjectRelation;
  if (metric == "hits@1") return QaMetric::kHitsAt1;
  if (metric == "auto") {
    return format == "wikimovies" ? QaMetric::kHitsAt1
                                  : QaMetric::kSubjectRelation;
  }
  throw UsageError("unknown QA metric '" + metric + "'");
}

// ---------------------------------------------------------------------------
// Commands.

inline void require(bool ok, const std::string &message) {
  if (!ok) throw UsageError(message);
}

// Input paths that do not exist are usage errors, not runtime failures.
inline void require_file(const std::string &path, const std::string &flag) {
  if (path.empty()) return;
  require(std::filesystem::is_regular_file(path),
          flag + ": no such file: " + path);
}

inline void check_kbc_train_flags(const KbcTrainOptions &opt, bool neg_given) {
  require(!opt.train.empty(), "--train is required");
  require(!opt.out.empty(), "--out is required");
  require_file(opt.train, "--train");
  require_file(opt.valid, "--valid");
  require(opt.loss == "softmax" || opt.loss == "ns", "--loss must be softmax or ns");
  require(!(opt.loss == "softmax" && neg_given),
          "--neg is meaningless with --loss softmax");
  require(!opt.include_valid || !opt.valid.empty(),
          "--include-valid needs --valid");
  require(opt.dim >= 1 && opt.epoch >= 0 && opt.lr > 0 && opt.threads >= 1,
          "--dim, --epoch, --lr, --threads out of range");
  require(opt.loss == "softmax" || opt.neg >= 1, "--neg must be >= 1");
}

inline int cmd_train_kbc(const KbcTrainOptions &opt, std::ostream &out,
                         std::ostream &err) {
  const KbcData data = load_kbc_data(opt.train, opt.valid);
  auto run = train_kbc(data, opt, opt.include_valid, &err);
  save_model(run.file, std::filesystem::path(opt.out));
  write_manifest(run.manifest, opt.out + ".manifest.json");
  print_train_stats(out, run.stats, run.manifest);
  return kExitOk;
}

struct KbcEvalOptions {
  std::string model;
  std::string test;
  std::vector<std::string> filter;
  std::int64_t k = 10;
  std::string mode = "filtered";
  std::optional<double> hit_percent;
  int threads = 1;
  std::string dataset;
};

inline int cmd_eval_kbc(const KbcEvalOptions &opt, std::ostream &out,
                        std::ostream & /*err*/) {
  require(!opt.model.empty() && !opt.test.empty(), "--model and --test are required");
  require(opt.mode == "raw" || opt.mode == "filtered" || opt.mode == "both",
          "--mode must be raw, filtered or both");
  require(opt.k >= 1, "--k must be >= 1");
  require_file(opt.model, "--model");
  require_file(opt.test, "--test");
  for (const auto &f : opt.filter) require_file(f, "--filter");
  KbcModel m = open_kbc_model(load_model(std::filesystem::path(opt.model)));
  if (opt.hit_percent) {
    require(m.file.task == Task::kRelationPrediction,
            "--hit-percent needs a relation-prediction model");
    require(*opt.hit_percent > 0 && *opt.hit_percent <= 100,
            "--hit-percent must be in (0, 100]");
  } else {
    require(opt.mode == "raw" || !opt.filter.empty(),
            "filtered evaluation needs --filter <train,valid,test>");
  }
  const auto test = read_frozen(opt.test, m);
  require(!test.empty(), "empty test set");
  KnownTriples known;
  if (!opt.hit_percent && opt.mode != "raw") known = known_from(opt.filter, m);

  RunManifest manifest;
  manifest.command = "eval";
  manifest.params = {{"k", opt.k},
                     {"mode", opt.mode},
                     {"hit_percent", opt.hit_percent ? *opt.hit_percent : 0.0},
                     {"model_manifest", m.file.meta("manifest_hash")}};
  manifest.paths = {{"model", opt.model}, {"test", opt.test}, {"filter", opt.filter}};
  manifest.seed = m.file.model.seed;

  KbcEvalRequest req;
  req.k = opt.k;
  req.mode = opt.mode;
  req.hit_percent = opt.hit_percent;
  req.threads = opt.threads;
  req.dataset = opt.dataset.empty() ? dataset_name(opt.test) : opt.dataset;
  for (const auto &r : eval_kbc(m, test, &known, req)) {
    out << report_line(r, manifest) << '\n';
  }
  return kExitOk;
}

inline void check_qa_train_flags(const QaTrainOptions &opt) {
  require(!opt.pairs.empty(), "--pairs is required");
  require(!opt.kb.empty(), "--kb is required");
  require(!opt.out.empty(), "--out is required");
  require_file(opt.pairs, "--pairs");
  require_file(opt.kb, "--kb");
  require_file(opt.aliases, "--aliases");
  require(opt.format == "simplequestions" || opt.format == "wikimovies",
          "--format must be simplequestions or wikimovies");
  require(opt.kb_format == "tsv" || opt.kb_format == "fb" ||
              opt.kb_format == "wikimovies",
          "--kb-format must be tsv, fb or wikimovies");
  require(opt.dim >= 1 && opt.epoch >= 0 && opt.lr > 0 && opt.threads >= 1,
          "--dim, --epoch, --lr, --threads out of range");
  require(!opt.bigrams || opt.buckets >= 1, "--buckets must be >= 1");
}

inline int cmd_qa_train(const QaTrainOptions &opt, std::ostream &out,
                        std::ostream &err) {
  const QaKnowledgeBase kb(load_kb(opt.kb, opt.kb_format));
  const QaLabels labels(kb.relations().size(), opt.use_inverse());
  auto data = prepare_qa_training(load_pairs(opt.pairs, opt.format, &err), kb,
                                  labels, opt.aliases, &err);
  auto run = train_qa(kb, data, opt, &err);
  save_model(run.file, std::filesystem::path(opt.out));
  write_manifest(run.manifest, opt.out + ".manifest.json");
  print_train_stats(out, run.stats, run.manifest);
  return kExitOk;
}

struct QaUseOptions {
  std::string model;
  std::string kb;
  std::string kb_format;  // default: as recorded in the model
  std::string aliases;
  std::string question;
  std::string pairs;
  std::string format;  // default: as recorded in the model
  std::string metric = "auto";
  std::string dump;
  std::string dataset;
};

inline QaBundle open_qa(const QaUseOptions &opt, std::ostream &err) {
  require(!opt.model.empty() && !opt.kb.empty(), "--model and --kb are required");
  require_file(opt.model, "--model");
  require_file(opt.kb, "--kb");
  require_file(opt.aliases, "--aliases");
  require_file(opt.pairs, "--pairs");
  ModelFile file = load_model(std::filesystem::path(opt.model));
  const std::string kb_format =
      opt.kb_format.empty() ? file.meta("kb_format", "tsv") : opt.kb_format;
  return open_qa_model(std::move(file), QaKnowledgeBase(load_kb(opt.kb, kb_format)),
                       opt.aliases, &err);
}

inline int cmd_qa_answer(const QaUseOptions &opt, std::ostream &out,
                         std::ostream &err) {
  require(!normalize_text(opt.question).empty(), "--question must not be empty");
  const QaBundle qa = open_qa(opt, err);
  const QaSystem system = qa.system();
  const auto answer = answer_question(opt.question, system);
  if (!answer) {
    out << "NO_ANSWER\n";
    return kExitOk;
  }
  std::string answers;
  for (std::size_t i = 0; i < answer->entities.size(); ++i) {
    if (i > 0) answers.push_back(',');
    answers += qa.kb.entities().name(answer->entities[i]);
  }
  out << qa.labels.name(answer->relation, qa.kb.relations()) << '\t'
      << qa.kb.entities().name(answer->subject) << '\t' << answers << '\n';
  return kExitOk;
}

inline int cmd_qa_eval(const QaUseOptions &opt, std::ostream &out,
                       std::ostream &err) {
  require(!opt.pairs.empty(), "--pairs is required");
  const QaBundle qa = open_qa(opt, err);
  const std::string format =
      opt.format.empty() ? qa.file.meta("format", "simplequestions") : opt.format;
  const QaMetric metric = parse_qa_metric(opt.metric, format);
  auto pairs = load_pairs(opt.pairs, format, &err);
  require(!pairs.empty(), "empty test set");
  resolve_pairs(pairs, qa.kb, qa.labels, nullptr, &err);

  RunManifest manifest;
  manifest.command = "qa eval";
  manifest.params = {{"format", format},
                     {"metric", opt.metric},
                     {"model_manifest", qa.file.meta("manifest_hash")}};
  manifest.paths = {{"model", opt.model}, {"kb", opt.kb},
                    {"aliases", opt.aliases}, {"pairs", opt.pairs}};
  manifest.seed = qa.file.model.seed;

  std::ofstream dump;
  if (!opt.dump.empty()) {
    dump.open(opt.dump);
    if (!dump) throw std::runtime_error("cannot write " + opt.dump);
  }
  EvalReport r = evaluate_qa(pairs, qa.system(), metric,
                             opt.dump.empty() ? nullptr : &dump);
  r.dataset = opt.dataset.empty() ? dataset_name(opt.pairs) : opt.dataset;
  out << report_line(r, manifest) << '\n';
  return kExitOk;
}

struct GridOptions {
  std::string task = "entity";  // entity | relation | qa
  std::vector<std::size_t> dims;
  std::vector<int> epochs;
  std::vector<int> negs;
  std::string select_metric;  // filtered-hit@10 | hit@5pct | accuracy
  KbcTrainOptions kbc;        // task/dim/epoch/neg overridden per config
  std::vector<std::string> filter;
  std::string test;
  QaTrainOptions qa;
  std::string valid_pairs;
  std::string test_pairs;
};

inline std::string default_select_metric(const std::string &task) {
  if (task == "relation") return "hit@5pct";
  if (task == "qa") return "accuracy";
  return "filtered-hit@10";
}

inline int cmd_grid(GridOptions opt, std::ostream &out, std::ostream &err) {
  require(opt.task == "entity" || opt.task == "relation" || opt.task == "qa",
          "--task must be entity, relation or qa");
  if (opt.select_metric.empty()) opt.select_metric = default_select_metric(opt.task);
  require(!opt.dims.empty() && !opt.epochs.empty(),
          "empty grid: --grid-dim and --grid-epoch need values");
  const bool ns = opt.task != "qa" && opt.kbc.loss == "ns";
  require(ns || opt.negs.empty(), "--grid-neg is meaningless with softmax");
  if (ns && opt.negs.empty()) opt.negs.push_back(opt.kbc.neg);
  if (!ns) opt.negs = {0};

  struct Config {
    std::size_t dim;
    int epoch;
    int neg;
  };
  std::vector<Config> configs;
  for (auto d : opt.dims) {
    for (int e : opt.epochs) {
      for (int n : opt.negs) configs.push_back({d, e, n});
    }
  }

  auto config_comment = [](const Config &c, const RunManifest &m) {
    return "dim=" + std::to_string(c.dim) + " epoch=" + std::to_string(c.epoch) +
           " neg=" + std::to_string(c.neg) + " manifest=" + m.hash();
  };

  struct Row {
    Config config;
    RunManifest manifest;
    EvalReport report;
  };
  std::vector<Row> rows;

  if (opt.task == "qa") {
    require(opt.select_metric == "accuracy",
            "--select-metric for qa must be accuracy");
    require(!opt.valid_pairs.empty(), "--valid-pairs is required");
    require_file(opt.valid_pairs, "--valid-pairs");
    require_file(opt.test_pairs, "--test-pairs");
    check_qa_train_flags(opt.qa);
    const QaKnowledgeBase kb(load_kb(opt.qa.kb, opt.qa.kb_format));
    const QaLabels labels(kb.relations().size(), opt.qa.use_inverse());
    const auto data = prepare_qa_training(load_pairs(opt.qa.pairs, opt.qa.format, &err),
                                          kb, labels, opt.qa.aliases, &err);
    auto valid = load_pairs(opt.valid_pairs, opt.qa.format, &err);
    require(!valid.empty(), "empty validation set");
    const QaMetric metric = parse_qa_metric("auto", opt.qa.format);
    auto run_config = [&](const Config &c, const QaTrainingData &training,
                          std::vector<QAPair> pairs, const std::string &name) {
      QaTrainOptions o = opt.qa;
      o.dim = c.dim;
      o.epoch = c.epoch;
      auto run = train_qa(kb, training, o, nullptr);
      QaBundle b = open_qa_model(std::move(run.file), kb, o.aliases, &err);
      resolve_pairs(pairs, b.kb, b.labels);
      EvalReport r = evaluate_qa(pairs, b.system(), metric);
      r.dataset = name;
      return Row{c, run.manifest, r};
    };
    for (const Config &c : configs) {
      rows.push_back(run_config(c, data, valid, "valid"));
      out << "# grid " << config_comment(c, rows.back().manifest) << '\n'
          << report_line(rows.back().report, rows.back().manifest) << '\n';
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].report.value > rows[best].report.value) best = i;
    }
    if (!opt.test_pairs.empty()) {
      auto test = load_pairs(opt.test_pairs, opt.qa.format, &err);
      Row r = run_config(rows[best].config, data, test, "test");
      out << "# retrain train " << config_comment(r.config, r.manifest) << '\n'
          << report_line(r.report, r.manifest) << '\n';
    }
    out << "# selected " << config_comment(rows[best].config, rows[best].manifest)
        << '\n'
        << report_line(rows[best].report, rows[best].manifest) << '\n';
    return kExitOk;
  }

  KbcTrainOptions base = opt.kbc;
  base.task = opt.task;
  base.out = "-";
  check_kbc_train_flags(base, false);
  require(!base.valid.empty(), "--valid is required for grid search");
  require_file(opt.test, "--test");
  for (const auto &f : opt.filter) require_file(f, "--filter");
  const bool filtered = opt.select_metric == "filtered-hit@10";
  if (opt.task == "entity") {
    require(filtered, "--select-metric for entity must be filtered-hit@10");
    require(!opt.filter.empty(), "--filter <train,valid,test> is required");
  } else {
    require(opt.select_metric == "hit@5pct",
            "--select-metric for relation must be hit@5pct");
  }
  const KbcData data = load_kbc_data(base.train, base.valid);

  auto evaluate = [&](KbcRun &run, const std::string &path,
                      const std::string &name) {
    KbcModel m = open_kbc_model(std::move(run.file));
    const auto triples = read_frozen(path, m);
    require(!triples.empty(), path + ": empty evaluation set");
    KnownTriples known;
    if (filtered) known = known_from(opt.filter, m);
    KbcEvalRequest req;
    req.threads = base.threads;
    req.dataset = name;
    if (filtered) {
      req.k = 10;
      req.mode = "filtered";
    } else {
      req.hit_percent = 5.0;
    }
    return eval_kbc(m, triples, &known, req).front();
  };

  for (const Config &c : configs) {
    KbcTrainOptions o = base;
    o.dim = c.dim;
    o.epoch = c.epoch;
    o.neg = ns ? c.neg : o.neg;
    auto run = train_kbc(data, o, false, nullptr);
    RunManifest manifest = run.manifest;
    EvalReport r = evaluate(run, base.valid, "valid");
    manifest.metrics.push_back(r);
    rows.push_back({c, manifest, r});
    out << "# grid " << config_comment(c, manifest) << '\n'
        << report_line(r, manifest) << '\n';
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].report.value > rows[best].report.value) best = i;
  }
  if (!opt.test.empty()) {
    KbcTrainOptions o = base;
    o.dim = rows[best].config.dim;
    o.epoch = rows[best].config.epoch;
    o.neg = ns ? rows[best].config.neg : o.neg;
    std::vector<bool> regimes = {false};
    if (base.include_valid) regimes.push_back(true);
    for (bool with_valid : regimes) {
      auto run = train_kbc(data, o, with_valid, nullptr);
      RunManifest manifest = run.manifest;
      EvalReport r = evaluate(run, opt.test, with_valid ? "test-train+valid" : "test-train");
      out << "# retrain " << (with_valid ? "train+valid " : "train ")
          << config_comment(rows[best].config, manifest) << '\n'
          << report_line(r, manifest) << '\n';
    }
  }
  out << "# selected " << config_comment(rows[best].config, rows[best].manifest)
      << '\n'
      << report_line(rows[best].report, rows[best].manifest) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char *const *argv, std::ostream &out,
               std::ostream &err) {
  CLI::App app{"Bag-of-words knowledge graph embeddings"};
  app.require_subcommand(1);
  const int threads = default_threads();

  KbcTrainOptions train_opt;
  train_opt.threads = threads;
  auto *train_cmd = app.add_subcommand("train", "train a completion model");
  train_cmd->add_option("--task", train_opt.task, "entity or relation")
      ->check(CLI::IsMember({"entity", "relation"}));
  train_cmd->add_option("--train", train_opt.train, "training triples (TSV)");
  train_cmd->add_option("--valid", train_opt.valid, "validation triples (TSV)");
  train_cmd->add_flag("--include-valid", train_opt.include_valid,
                      "train on train+valid");
  train_cmd->add_option("--dim", train_opt.dim);
  train_cmd->add_option("--epoch", train_opt.epoch);
  auto *neg_opt = train_cmd->add_option("--neg", train_opt.neg);
  train_cmd->add_option("--lr", train_opt.lr);
  train_cmd->add_option("--loss", train_opt.loss, "softmax or ns");
  train_cmd->add_option("--threads", train_opt.threads);
  train_cmd->add_option("--seed", train_opt.seed);
  train_cmd->add_option("--out", train_opt.out, "model path");

  KbcEvalOptions eval_opt;
  eval_opt.threads = threads;
  auto *eval_cmd = app.add_subcommand("eval", "evaluate a completion model");
  eval_cmd->add_option("--model", eval_opt.model);
  eval_cmd->add_option("--test", eval_opt.test);
  eval_cmd->add_option("--filter", eval_opt.filter, "train,valid,test")
      ->delimiter(',');
  eval_cmd->add_option("--k", eval_opt.k);
  eval_cmd->add_option("--mode", eval_opt.mode, "raw, filtered or both");
  eval_cmd->add_option("--hit-percent", eval_opt.hit_percent);
  eval_cmd->add_option("--threads", eval_opt.threads);
  eval_cmd->add_option("--dataset", eval_opt.dataset, "name in reports");

  auto *qa_cmd = app.add_subcommand("qa", "question answering");
  qa_cmd->require_subcommand(1);
  QaTrainOptions qa_train_opt;
  qa_train_opt.threads = threads;
  bool inverse_flag = false;
  bool no_inverse_flag = false;
  auto add_qa_train_flags = [&](CLI::App *cmd, QaTrainOptions &o) {
    cmd->add_option("--pairs", o.pairs, "training pairs");
    cmd->add_option("--format", o.format, "simplequestions or wikimovies");
    cmd->add_option("--kb", o.kb);
    cmd->add_option("--kb-format", o.kb_format, "tsv, fb or wikimovies");
    cmd->add_option("--aliases", o.aliases, "<entity>\\t<surface> file");
    cmd->add_option("--lr", o.lr);
    cmd->add_flag("--bigrams", o.bigrams);
    cmd->add_option("--buckets", o.buckets);
    cmd->add_flag("--inverse-relations", inverse_flag);
    cmd->add_flag("--no-inverse-relations", no_inverse_flag);
    cmd->add_option("--threads", o.threads);
    cmd->add_option("--seed", o.seed);
  };
  auto *qa_train = qa_cmd->add_subcommand("train", "train a relation classifier");
  add_qa_train_flags(qa_train, qa_train_opt);
  qa_train->add_option("--dim", qa_train_opt.dim);
  qa_train->add_option("--epoch", qa_train_opt.epoch);
  qa_train->add_option("--out", qa_train_opt.out);

  QaUseOptions qa_use;
  auto add_qa_use_flags = [&](CLI::App *cmd) {
    cmd->add_option("--model", qa_use.model);
    cmd->add_option("--kb", qa_use.kb);
    cmd->add_option("--kb-format", qa_use.kb_format);
    cmd->add_option("--aliases", qa_use.aliases);
  };
  auto *qa_answer = qa_cmd->add_subcommand("answer", "answer one question");
  add_qa_use_flags(qa_answer);
  auto *question_opt = qa_answer->add_option("--question", qa_use.question);
  auto *qa_eval = qa_cmd->add_subcommand("eval", "evaluate on QA pairs");
  add_qa_use_flags(qa_eval);
  qa_eval->add_option("--pairs", qa_use.pairs);
  qa_eval->add_option("--format", qa_use.format);
  qa_eval->add_option("--metric", qa_use.metric, "auto, accuracy or hits@1");
  qa_eval->add_option("--dump", qa_use.dump, "predictions TSV");
  qa_eval->add_option("--dataset", qa_use.dataset);

  GridOptions grid_opt;
  grid_opt.kbc.threads = threads;
  grid_opt.qa.threads = threads;
  auto *grid_cmd = app.add_subcommand("grid", "hyper-parameter grid search");
  grid_cmd->add_option("--task", grid_opt.task, "entity, relation or qa");
  grid_cmd->add_option("--grid-dim", grid_opt.dims)->delimiter(',');
  grid_cmd->add_option("--grid-epoch", grid_opt.epochs)->delimiter(',');
  grid_cmd->add_option("--grid-neg", grid_opt.negs)->delimiter(',');
  grid_cmd->add_option("--select-metric", grid_opt.select_metric);
  grid_cmd->add_option("--train", grid_opt.kbc.train);
  grid_cmd->add_option("--valid", grid_opt.kbc.valid);
  grid_cmd->add_option("--test", grid_opt.test);
  grid_cmd->add_option("--filter", grid_opt.filter)->delimiter(',');
  grid_cmd->add_flag("--include-valid", grid_opt.kbc.include_valid);
  grid_cmd->add_option("--neg", grid_opt.kbc.neg);
  grid_cmd->add_option("--loss", grid_opt.kbc.loss);
  grid_cmd->add_option("--seed", grid_opt.kbc.seed);
  grid_cmd->add_option("--valid-pairs", grid_opt.valid_pairs);
  grid_cmd->add_option("--test-pairs", grid_opt.test_pairs);
  // Shared between the completion and QA variants.
  double grid_lr = 0;
  int grid_threads = threads;
  grid_cmd->add_option("--lr", grid_lr);
  grid_cmd->add_option("--threads", grid_threads);
  grid_cmd->add_option("--pairs", grid_opt.qa.pairs);
  grid_cmd->add_option("--format", grid_opt.qa.format);
  grid_cmd->add_option("--kb", grid_opt.qa.kb);
  grid_cmd->add_option("--kb-format", grid_opt.qa.kb_format);
  grid_cmd->add_option("--aliases", grid_opt.qa.aliases);
  grid_cmd->add_flag("--bigrams", grid_opt.qa.bigrams);
  grid_cmd->add_option("--buckets", grid_opt.qa.buckets);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train_cmd) {
      check_kbc_train_flags(train_opt, neg_opt->count() > 0);
      return cmd_train_kbc(train_opt, out, err);
    }
    if (*eval_cmd) return cmd_eval_kbc(eval_opt, out, err);
    if (*qa_train) {
      require(!(inverse_flag && no_inverse_flag),
              "--inverse-relations and --no-inverse-relations conflict");
      if (inverse_flag) qa_train_opt.inverse = true;
      if (no_inverse_flag) qa_train_opt.inverse = false;
      check_qa_train_flags(qa_train_opt);
      return cmd_qa_train(qa_train_opt, out, err);
    }
    if (*qa_answer) {
      require(question_opt->count() > 0, "--question is required");
      return cmd_qa_answer(qa_use, out, err);
    }
    if (*qa_eval) return cmd_qa_eval(qa_use, out, err);
    if (*grid_cmd) {
      if (grid_lr > 0) {
        grid_opt.kbc.lr = grid_lr;
        grid_opt.qa.lr = grid_lr;
      }
      grid_opt.kbc.threads = grid_threads;
      grid_opt.qa.threads = grid_threads;
      grid_opt.qa.seed = grid_opt.kbc.seed;
      grid_opt.qa.out = "-";
      return cmd_grid(grid_opt, out, err);
    }
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace kge::cli

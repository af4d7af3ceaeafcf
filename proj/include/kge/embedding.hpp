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

// Dense bag-of-words embedding model: an input lookup table averaged into a
// hidden vector, followed by a linear classifier over output classes. Both
// the full softmax loss and the one-versus-all loss with negative sampling
// are provided as single-example SGD steps.
//
// The model is templated on its scalar type. Production code uses float;
// gradient checks instantiate the same code with double.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kge {

using TokenId = std::int32_t;
using ClassId = std::int32_t;

// Row-major dense matrix.
template <typename Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Real(0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<Real> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const Real> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  Real &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  Real operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  bool operator==(const Matrix &other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

// One training instance: a bag of input tokens and a class label.
struct Example {
  std::vector<TokenId> input_tokens;
  ClassId label = 0;

  bool operator==(const Example &other) const = default;
};

enum class LossKind { kSoftmax, kNegativeSampling };

struct LossConfig {
  LossKind kind = LossKind::kSoftmax;
  // Number of negative classes drawn per example (one-vs-all only).
  int negatives = 0;
};

template <typename Real>
struct BasicEmbeddingModel {
  Matrix<Real> input;   // input_vocab_size x dim
  Matrix<Real> output;  // output_class_count x dim
  std::uint64_t seed = 0;

  std::size_t input_vocab_size() const { return input.rows(); }
  std::size_t output_class_count() const { return output.rows(); }
  std::size_t dim() const { return input.cols(); }

  bool operator==(const BasicEmbeddingModel &other) const = default;
};

using EmbeddingModel = BasicEmbeddingModel<float>;

namespace detail {

// Parameters are shared between lock-free training workers. Every access to
// a shared scalar goes through a relaxed atomic so that concurrent readers
// never observe a torn value.
template <typename Real>
inline Real shared_load(const Real &x) {
  return std::atomic_ref<Real>(const_cast<Real &>(x))
      .load(std::memory_order_relaxed);
}

template <typename Real>
inline void shared_store(Real &x, Real v) {
  std::atomic_ref<Real>(x).store(v, std::memory_order_relaxed);
}

// Four partial sums break the add dependency chain.
template <typename Real>
inline Real shared_dot(std::span<const Real> shared,
                       std::span<const Real> local) {
  Real s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t n = local.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += shared_load(shared[i]) * local[i];
    s1 += shared_load(shared[i + 1]) * local[i + 1];
    s2 += shared_load(shared[i + 2]) * local[i + 2];
    s3 += shared_load(shared[i + 3]) * local[i + 3];
  }
  for (; i < n; ++i) s0 += shared_load(shared[i]) * local[i];
  return (s0 + s1) + (s2 + s3);
}

// shared += alpha * local
template <typename Real>
inline void shared_axpy(std::span<Real> shared, Real alpha,
                        std::span<const Real> local) {
  for (std::size_t i = 0; i < local.size(); ++i) {
    shared_store(shared[i], shared_load(shared[i]) + alpha * local[i]);
  }
}

// grad += alpha * row and row += alpha * hidden in one pass; the gradient
// sees the row as it was before the update.
template <typename Real>
inline void shared_update(std::span<Real> row, Real alpha,
                          std::span<const Real> hidden, std::span<Real> grad) {
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const Real w = shared_load(row[i]);
    grad[i] += alpha * w;
    shared_store(row[i], w + alpha * hidden[i]);
  }
}

// local += alpha * shared
template <typename Real>
inline void local_axpy(std::span<Real> local, Real alpha,
                       std::span<const Real> shared) {
  for (std::size_t i = 0; i < local.size(); ++i) {
    local[i] += alpha * shared_load(shared[i]);
  }
}

template <typename Real>
void check_example(const Example &example,
                   const BasicEmbeddingModel<Real> &model) {
  if (example.input_tokens.empty()) {
    throw std::invalid_argument("example has no input tokens");
  }
  for (TokenId t : example.input_tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.input_vocab_size()) {
      throw std::out_of_range("input token id " + std::to_string(t) +
                              " out of range");
    }
  }
  if (example.label < 0 ||
      static_cast<std::size_t>(example.label) >= model.output_class_count()) {
    throw std::out_of_range("label " + std::to_string(example.label) +
                            " out of range");
  }
}

}  // namespace detail

// Input rows uniform on [-1/dim, 1/dim], output rows zero. The draw sequence
// only depends on the seed, so float and double models built from the same
// seed agree up to rounding.
template <typename Real = float>
BasicEmbeddingModel<Real> init_model(std::size_t input_vocab_size,
                                     std::size_t output_class_count,
                                     std::size_t dim, std::uint64_t seed) {
  if (input_vocab_size == 0 || output_class_count == 0 || dim == 0) {
    throw std::invalid_argument(
        "init_model: vocabulary size, class count and dim must be >= 1");
  }
  BasicEmbeddingModel<Real> model;
  model.seed = seed;
  model.input = Matrix<Real>(input_vocab_size, dim);
  model.output = Matrix<Real>(output_class_count, dim);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / static_cast<double>(dim);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Real &v : model.input.values()) v = static_cast<Real>(uniform(rng));
  return model;
}

// Mean of the input rows selected by `tokens`; repeated ids count repeatedly.
template <typename Real>
void average_input(std::span<const TokenId> tokens,
                   const BasicEmbeddingModel<Real> &model,
                   std::span<Real> hidden) {
  if (tokens.empty()) {
    throw std::invalid_argument("average_input: empty token list");
  }
  if (hidden.size() != model.dim()) {
    throw std::invalid_argument("average_input: hidden size != dim");
  }
  std::fill(hidden.begin(), hidden.end(), Real(0));
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.input_vocab_size()) {
      throw std::out_of_range("average_input: token id " + std::to_string(t) +
                              " out of range");
    }
    detail::local_axpy<Real>(hidden, Real(1), model.input.row(t));
  }
  const Real scale = Real(1) / static_cast<Real>(tokens.size());
  for (Real &h : hidden) h *= scale;
}

template <typename Real>
std::vector<Real> average_input(std::span<const TokenId> tokens,
                                const BasicEmbeddingModel<Real> &model) {
  std::vector<Real> hidden(model.dim());
  average_input<Real>(tokens, model, hidden);
  return hidden;
}

// scores[k] = <output row k, hidden>. Reads the output matrix without atomic
// accesses; must not run concurrently with training.
template <typename Real>
void score_all(std::span<const Real> hidden,
               const BasicEmbeddingModel<Real> &model, std::span<Real> scores) {
  if (hidden.size() != model.dim()) {
    throw std::invalid_argument("score_all: hidden size != dim");
  }
  if (scores.size() != model.output_class_count()) {
    throw std::invalid_argument("score_all: score buffer size != class count");
  }
  const std::size_t dim = model.dim();
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const Real *w = model.output.row(k).data();
    Real s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= dim; i += 4) {
      s0 += w[i] * hidden[i];
      s1 += w[i + 1] * hidden[i + 1];
      s2 += w[i + 2] * hidden[i + 2];
      s3 += w[i + 3] * hidden[i + 3];
    }
    for (; i < dim; ++i) s0 += w[i] * hidden[i];
    scores[k] = (s0 + s1) + (s2 + s3);
  }
}

template <typename Real>
std::vector<Real> score_all(std::span<const Real> hidden,
                            const BasicEmbeddingModel<Real> &model) {
  std::vector<Real> scores(model.output_class_count());
  score_all<Real>(hidden, model, scores);
  return scores;
}

// Max-shifted softmax.
template <typename Real>
void softmax_probs(std::span<const Real> scores, std::span<Real> probs) {
  if (scores.empty()) {
    throw std::invalid_argument("softmax_probs: empty score vector");
  }
  const Real max = *std::max_element(scores.begin(), scores.end());
  double total = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    probs[k] = static_cast<Real>(std::exp(static_cast<double>(scores[k] - max)));
    total += probs[k];
  }
  const double inv = 1.0 / total;
  for (Real &p : probs) p = static_cast<Real>(p * inv);
}

template <typename Real>
std::vector<Real> softmax_probs(std::span<const Real> scores) {
  std::vector<Real> probs(scores.size());
  softmax_probs<Real>(scores, probs);
  return probs;
}

// Draws distinct negative classes uniformly from all classes except the
// positive label. A per-class stamp array gives O(1) duplicate checks.
class NegativeSampler {
 public:
  template <typename Rng>
  void sample(ClassId label, int k, std::size_t class_count, Rng &rng,
              std::vector<ClassId> &out) {
    if (k < 1 || static_cast<std::size_t>(k) >= class_count) {
      throw std::invalid_argument(
          "negative sampling needs 1 <= negatives < class count");
    }
    if (stamps_.size() != class_count) {
      stamps_.assign(class_count, 0);
      round_ = 0;
    }
    if (++round_ == 0) {
      std::fill(stamps_.begin(), stamps_.end(), 0);
      round_ = 1;
    }
    out.clear();
    std::uniform_int_distribution<std::uint64_t> pick(0, class_count - 2);
    while (out.size() < static_cast<std::size_t>(k)) {
      auto c = static_cast<ClassId>(pick(rng));
      if (c >= label) ++c;
      if (stamps_[c] == round_) continue;
      stamps_[c] = round_;
      out.push_back(c);
    }
  }

 private:
  std::vector<std::uint32_t> stamps_;
  std::uint32_t round_ = 0;
};

// Per-worker scratch buffers so that steps do not allocate.
template <typename Real>
struct Workspace {
  std::vector<Real> hidden;
  std::vector<Real> grad;
  std::vector<Real> scores;
  std::vector<ClassId> negatives;
  NegativeSampler sampler;

  void reserve(const BasicEmbeddingModel<Real> &model) {
    hidden.resize(model.dim());
    grad.resize(model.dim());
  }
};

namespace detail {

template <typename Real>
void shared_average(std::span<const TokenId> tokens,
                    const BasicEmbeddingModel<Real> &model,
                    std::span<Real> hidden) {
  std::fill(hidden.begin(), hidden.end(), Real(0));
  for (TokenId t : tokens) local_axpy<Real>(hidden, Real(1), model.input.row(t));
  const Real scale = Real(1) / static_cast<Real>(tokens.size());
  for (Real &h : hidden) h *= scale;
}

// Spreads the hidden-vector gradient equally over the contributing tokens.
template <typename Real>
void update_inputs(std::span<const TokenId> tokens,
                   BasicEmbeddingModel<Real> &model,
                   std::span<const Real> grad) {
  const Real scale = Real(1) / static_cast<Real>(tokens.size());
  for (TokenId t : tokens) shared_axpy<Real>(model.input.row(t), scale, grad);
}

}  // namespace detail

// One SGD step on -log softmax(W h)[label]. Returns the loss before the
// update. Every output row is updated.
template <typename Real>
double softmax_step(const Example &example, BasicEmbeddingModel<Real> &model,
                    double lr, Workspace<Real> &ws) {
  detail::check_example(example, model);
  if (!(lr > 0)) throw std::invalid_argument("softmax_step: lr must be > 0");
  ws.reserve(model);
  const std::size_t classes = model.output_class_count();
  ws.scores.resize(classes);
  detail::shared_average<Real>(example.input_tokens, model, ws.hidden);

  double max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes; ++k) {
    ws.scores[k] = detail::shared_dot<Real>(model.output.row(k), ws.hidden);
    max = std::max(max, static_cast<double>(ws.scores[k]));
  }
  double total = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    total += std::exp(static_cast<double>(ws.scores[k]) - max);
  }
  const double log_z = max + std::log(total);
  const double loss = log_z - static_cast<double>(ws.scores[example.label]);

  std::fill(ws.grad.begin(), ws.grad.end(), Real(0));
  for (std::size_t k = 0; k < classes; ++k) {
    const double p = std::exp(static_cast<double>(ws.scores[k]) - log_z);
    const double target = static_cast<ClassId>(k) == example.label ? 1.0 : 0.0;
    const auto alpha = static_cast<Real>(lr * (target - p));
    detail::shared_update<Real>(model.output.row(k), alpha, ws.hidden, ws.grad);
  }
  detail::update_inputs<Real>(example.input_tokens, model, ws.grad);
  return loss;
}

template <typename Real>
double softmax_step(const Example &example, BasicEmbeddingModel<Real> &model,
                    double lr) {
  Workspace<Real> ws;
  return softmax_step(example, model, lr, ws);
}

// One SGD step of the one-versus-all logistic loss
//   -log sigma(s_label) - sum_n log sigma(-s_n)
// against the given negative classes, which must be distinct and differ from
// the label. Returns the loss before the update.
template <typename Real>
double negative_sampling_step(const Example &example,
                              BasicEmbeddingModel<Real> &model, double lr,
                              std::span<const ClassId> negatives,
                              Workspace<Real> &ws) {
  detail::check_example(example, model);
  if (!(lr > 0)) {
    throw std::invalid_argument("negative_sampling_step: lr must be > 0");
  }
  for (ClassId c : negatives) {
    if (c < 0 || static_cast<std::size_t>(c) >= model.output_class_count() ||
        c == example.label) {
      throw std::invalid_argument("negative_sampling_step: bad negative class");
    }
  }
  ws.reserve(model);
  detail::shared_average<Real>(example.input_tokens, model, ws.hidden);
  std::fill(ws.grad.begin(), ws.grad.end(), Real(0));

  double loss = 0;
  auto binary = [&](ClassId c, bool positive) {
    auto row = model.output.row(c);
    const double s = detail::shared_dot<Real>(row, ws.hidden);
    // One exp serves both the loss and the sigmoid.
    const double e = std::exp(-std::abs(s));
    const double sp = std::log1p(e);  // softplus(-|s|)
    const double sig = s >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    if (positive) {
      loss += s >= 0 ? sp : sp - s;  // softplus(-s)
    } else {
      loss += s >= 0 ? sp + s : sp;  // softplus(s)
    }
    const auto alpha = static_cast<Real>(lr * ((positive ? 1.0 : 0.0) - sig));
    detail::shared_update<Real>(row, alpha, ws.hidden, ws.grad);
  };
  binary(example.label, true);
  for (ClassId c : negatives) binary(c, false);

  detail::update_inputs<Real>(example.input_tokens, model, ws.grad);
  return loss;
}

// Draws config.negatives classes with `rng`, then steps.
template <typename Real, typename Rng>
double negative_sampling_step(const Example &example,
                              BasicEmbeddingModel<Real> &model, double lr,
                              const LossConfig &config, Rng &rng,
                              Workspace<Real> &ws) {
  if (config.kind != LossKind::kNegativeSampling) {
    throw std::invalid_argument(
        "negative_sampling_step: loss config is not one-vs-all");
  }
  detail::check_example(example, model);
  ws.sampler.sample(example.label, config.negatives,
                    model.output_class_count(), rng, ws.negatives);
  return negative_sampling_step<Real>(example, model, lr, ws.negatives, ws);
}

template <typename Real, typename Rng>
double negative_sampling_step(const Example &example,
                              BasicEmbeddingModel<Real> &model, double lr,
                              const LossConfig &config, Rng &rng) {
  Workspace<Real> ws;
  return negative_sampling_step(example, model, lr, config, rng, ws);
}

template <typename Real>
bool all_finite(const BasicEmbeddingModel<Real> &model) {
  auto finite = [](Real v) { return std::isfinite(v); };
  return std::all_of(model.input.values().begin(), model.input.values().end(),
                     finite) &&
         std::all_of(model.output.values().begin(),
                     model.output.values().end(), finite);
}

}  // namespace kge

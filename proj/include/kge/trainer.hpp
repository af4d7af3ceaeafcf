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

// Lock-free multi-threaded SGD with a linearly decaying learning rate.
//
// Workers share one model and update it without locks. The only
// synchronized datum on the hot path is the progress counter, which workers
// bump in batches of kProgressBatch examples; the learning rate of every
// step is derived from it.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "kge/embedding.hpp"

namespace kge {

struct TrainConfig {
  int epochs = 5;
  double lr0 = 0.1;
  LossConfig loss;
  int threads = 1;
  std::uint64_t seed = 0;
  std::size_t dim = 100;
  // Progress lines go here when non-null.
  std::ostream *log = nullptr;
};

struct TrainStats {
  std::uint64_t examples_processed = 0;
  double final_avg_loss = 0;
  double wall_time_seconds = 0;
  std::vector<double> epoch_losses;  // mean per-example loss of each epoch
};

inline constexpr std::uint64_t kProgressBatch = 64;

// lr0 * (1 - progress).
inline double learning_rate_at(double progress, double lr0) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw std::invalid_argument("learning_rate_at: progress outside [0, 1]");
  }
  return lr0 * (1.0 - progress);
}

inline void validate(const TrainConfig &config) {
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(config.lr0 > 0)) throw std::invalid_argument("lr0 must be > 0");
  if (config.threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (config.dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (config.loss.kind == LossKind::kNegativeSampling &&
      config.loss.negatives < 1) {
    throw std::invalid_argument("negative sampling needs negatives >= 1");
  }
}

template <typename Real = float>
std::pair<BasicEmbeddingModel<Real>, TrainStats> train(
    std::span<const Example> dataset, const TrainConfig &config,
    std::size_t input_vocab_size, std::size_t output_class_count) {
  validate(config);
  auto model = init_model<Real>(input_vocab_size, output_class_count,
                                config.dim, config.seed);
  TrainStats stats;
  if (config.epochs == 0) return {std::move(model), stats};
  if (dataset.empty()) {
    throw std::invalid_argument("train: empty dataset with epochs > 0");
  }
  if (config.loss.kind == LossKind::kNegativeSampling &&
      static_cast<std::size_t>(config.loss.negatives) >= output_class_count) {
    throw std::invalid_argument("train: negatives must be < class count");
  }
  for (const Example &e : dataset) detail::check_example(e, model);

  const std::uint64_t n = dataset.size();
  const std::uint64_t total = n * static_cast<std::uint64_t>(config.epochs);
  const auto threads = static_cast<std::uint64_t>(config.threads);
  std::atomic<std::uint64_t> progress{0};
  std::vector<std::atomic<double>> epoch_loss(config.epochs);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto start = std::chrono::steady_clock::now();

  auto worker = [&](std::uint64_t id) {
    try {
      const std::uint64_t begin = n * id / threads;
      const std::uint64_t end = n * (id + 1) / threads;
      std::vector<std::uint64_t> order(end - begin);
      std::iota(order.begin(), order.end(), begin);
      std::mt19937_64 rng(config.seed + 0x9E3779B97F4A7C15ULL * (id + 1));
      Workspace<Real> ws;
      std::uint64_t pending = 0;
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        double lr = config.lr0;
        for (std::uint64_t idx : order) {
          const std::uint64_t done =
              progress.load(std::memory_order_relaxed) + pending;
          lr = learning_rate_at(
              std::min(1.0, static_cast<double>(done) / total), config.lr0);
          const Example &example = dataset[idx];
          if (config.loss.kind == LossKind::kSoftmax) {
            loss_sum += softmax_step<Real>(example, model, lr, ws);
          } else {
            loss_sum += negative_sampling_step<Real>(example, model, lr,
                                                     config.loss, rng, ws);
          }
          if (++pending == kProgressBatch) {
            progress.fetch_add(pending, std::memory_order_relaxed);
            pending = 0;
          }
        }
        epoch_loss[epoch].fetch_add(loss_sum, std::memory_order_relaxed);
        if (id == 0 && config.log != nullptr) {
          const double elapsed =
              std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
          const double done = static_cast<double>(
              progress.load(std::memory_order_relaxed) + pending);
          *config.log << "epoch " << epoch + 1 << " loss "
                      << (order.empty() ? 0.0 : loss_sum / order.size())
                      << " lr " << lr << " examples/sec "
                      << (elapsed > 0 ? done / elapsed : 0.0) << '\n';
        }
      }
      progress.fetch_add(pending, std::memory_order_relaxed);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::uint64_t id = 0; id < threads; ++id) pool.emplace_back(worker, id);
  }
  if (failure) std::rethrow_exception(failure);

  stats.examples_processed = progress.load();
  stats.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  for (auto &sum : epoch_loss) {
    stats.epoch_losses.push_back(sum.load() / static_cast<double>(n));
  }
  stats.final_avg_loss = stats.epoch_losses.back();
  return {std::move(model), stats};
}

}  // namespace kge

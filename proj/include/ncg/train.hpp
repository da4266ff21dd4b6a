// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncg/model.hpp"
#include "ncg/signals.hpp"

namespace ncg {

enum class Precision { f32, f64 };

struct TrainConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t epochs = 200;
  std::size_t batch_size = 50000;    // raw samples per batch
  std::size_t chunk_length = 1000;   // contiguous samples per chunk
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  bool grad_clip = false;            // off by default; divergence recovery aid
  double grad_clip_norm = 5.0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch;
  double train_q;
  double test_q;
  double seconds;
};

struct RunLog {
  std::vector<EpochLog> epochs;
  double wall_seconds = 0.0;
  bool diverged = false;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;
};

// Standard Adam update with bias correction; reads gradients from the
// tensors' grad buffers. Throws on non-finite gradients, naming the
// offending parameter.
void adam_step(std::vector<Tensor>& params, AdamState& moments,
               const TrainConfig& cfg);

// Shuffled minibatches of contiguous chunks; logs Q per epoch on the
// training and held-out signals. On divergence the model is rolled back
// to the last finite epoch and the log is marked.
// start_epoch supports resuming: epochs [start_epoch, cfg.epochs) run.
RunLog train(ModelState& model, const Signal& train_data, const Signal& test_data,
             const TrainConfig& cfg, std::size_t start_epoch = 0);

// Mean Q over the signal in inference mode (no parameter updates).
double evaluate_q(ModelState& model, const Signal& data, std::size_t chunk_length);

}  // namespace ncg

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ncg/autodiff.hpp"
#include "ncg/loss.hpp"
#include "ncg/signals.hpp"

namespace ncg {

struct LayerSpec {
  std::size_t width = 1;
  std::size_t channels = 1;
  bool batch_norm = false;
  double dropout = 0.0;
};

// Architecture of the shared transform (T2) and the predictor (T1).
// Both stacks are valid 1D convolutions ending in a softmax over
// num_classes channels; delta is the prediction offset in raw timesteps.
struct ModelSpec {
  std::vector<LayerSpec> transformer;
  std::vector<LayerSpec> predictor;
  std::size_t input_channels = 1;
  std::size_t num_classes = 2;
  long delta = 50;
  double alpha = 0.05;
  bool stop_target_grad = false;
  bool allow_overlap = false;

  std::size_t transformer_rf() const;
  std::size_t predictor_rf() const;

  // Smallest delta at which the predictor's raw-signal receptive field
  // and the target's do not overlap.
  long min_nonoverlap_delta() const;

  void validate() const;
};

// noise-default (filters 15-7-1, K=2, delta=50) or har-ucinet
// (Conv5-100/Conv3-100/Conv1-20 over 516 channels, K=20, delta=20).
ModelSpec preset(const std::string& name);

struct LayerState {
  Tensor kernel;  // [Co, Ci, W]
  Tensor bias;    // [Co]
  Tensor gamma, beta;  // only when batch_norm
  BatchNormStats bn;
};

struct ModelState {
  ModelSpec spec;
  std::vector<LayerState> transformer;
  std::vector<LayerState> predictor;
};

ModelState build(const ModelSpec& spec, Rng& rng);

// All trainable tensors in a fixed order.
std::vector<Tensor> parameters(ModelState& state);

// window [B, input_channels, T] -> per-timestep class distributions.
// rng is required when any layer has dropout and mode is train.
ClassDistributionSeries transform(Tape& tape, ModelState& state,
                                  const Tensor& window, Mode mode,
                                  Rng* rng = nullptr);

// s -> shat; shat at index j targets s at raw anchor + delta.
ClassDistributionSeries predict(Tape& tape, ModelState& state,
                                const ClassDistributionSeries& s, Mode mode,
                                Rng* rng = nullptr);

struct ForwardResult {
  ClassDistributionSeries s;
  ClassDistributionSeries shat;
  Tensor q;
};

// transform -> predict -> ncg_loss. Gradients flow through both the
// prediction branch and the time-shifted target branch unless
// spec.stop_target_grad is set.
ForwardResult ncg_forward(Tape& tape, ModelState& state, const Tensor& window,
                          Mode mode, Rng* rng = nullptr);

// Inference-mode transform of a whole single-channel signal.
ClassDistributionSeries transform_signal(ModelState& state,
                                         const std::vector<double>& samples);

// Versioned JSON-of-arrays container; round-trips bit-exactly.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& json_text);

}  // namespace ncg

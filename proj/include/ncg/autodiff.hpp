// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ncg/rng.hpp"
#include "ncg/tensor.hpp"

namespace ncg {

enum class Mode { train, infer };

// Reverse-mode tape. Ops push backward closures in execution order;
// backward() replays them in reverse. A tape is single-use: a second
// backward() without a fresh forward pass is an error.
class Tape {
 public:
  void record(std::function<void()> back) { steps_.push_back(std::move(back)); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every tracked tensor.
  void backward(const Tensor& loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
};

// Per-layer batch-norm state; persists across forward passes.
struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::int64_t updates = 0;
};

// input [B, Ci, T], kernel [Co, Ci, W], bias [Co] -> [B, Co, T-W+1].
// Valid (no-pad) convolution.
Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias);

Tensor leaky_relu(Tape& tape, const Tensor& x, double alpha);

// x [B, C, T]; normalizes each channel over batch and time in train mode,
// uses running statistics (EMA, momentum 0.1) in infer mode.
Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, BatchNormStats& stats, Mode mode,
                  double eps = 1e-5, double momentum = 0.1);

// Inverted dropout: zeroes with probability `rate` and scales survivors
// by 1/(1-rate) in train mode; identity in infer mode.
Tensor dropout(Tape& tape, const Tensor& x, double rate, Mode mode, Rng& rng);

// Numerically stable softmax along `axis`.
Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis);

// Scalar sum of all elements.
Tensor sum(Tape& tape, const Tensor& x);

namespace detail {
// Test fixture: flips the sign of conv1d's kernel gradient so mutation
// tests can confirm the finite-difference suite catches backward bugs.
extern bool conv_backward_sign_flip;

void check_finite(const Tensor& t, const char* op);
}  // namespace detail

}  // namespace ncg

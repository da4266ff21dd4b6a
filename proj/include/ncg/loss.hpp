// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "ncg/autodiff.hpp"
#include "ncg/tensor.hpp"

namespace ncg {

// Floor applied inside logarithms of predicted probabilities to keep
// gradients finite. Targets are never clamped.
inline constexpr double kProbFloor = 1e-12;

// Per-timestep probability distributions over num_classes abstract
// classes. values is [batch, K, time]; index i along time corresponds to
// raw-signal timestep i + time_offset (receptive-field bookkeeping).
struct ClassDistributionSeries {
  Tensor values;
  std::size_t num_classes = 0;
  long time_offset = 0;

  std::size_t batch() const { return values.dim(0); }
  std::size_t length() const { return values.dim(2); }

  // Throws unless every (batch, time) slice is a distribution.
  void validate(double tol = 1e-9) const;
};

// Real-valued prediction residuals for the continuous-variable loss.
struct ResidualSeries {
  Tensor values;  // [batch, D, time]
};

// Shannon entropy in nats, convention 0 ln 0 = 0.
double entropy(std::span<const double> p);

// -sum s_i ln shat_i in nats; shat clamped below by kProbFloor.
double cross_entropy(std::span<const double> s, std::span<const double> shat);

// Kullback-Leibler divergence in nats.
double kl(std::span<const double> s, std::span<const double> shat);

// The NCG objective Q = -H(<s>) + <CE(s_{t+delta}, shat_t)>.
// shat at index j predicts s at raw time (j + shat.time_offset + delta),
// resolved to an s index through the offset metadata. Gradients flow
// through both the prediction and the target branch.
// stop_target_grad (ablation) blocks the cross-entropy gradient into the
// target branch; the entropy-of-average gradient always flows.
Tensor ncg_loss(Tape& tape, const ClassDistributionSeries& s,
                const ClassDistributionSeries& shat, long delta,
                bool stop_target_grad = false);

// Continuous-variable objective
//   Q_reg = ln det(cov(y) + lambda I) - ln det(cov(eps) + lambda I)
// with covariances taken over batch and time.
Tensor ncg_loss_continuous(Tape& tape, const Tensor& y, const ResidualSeries& eps,
                           double lambda = 1e-6);

// Signed determinant by LU factorization with partial pivoting
// (row-major D x D). Exposed for cross-checking against direct expansion.
double determinant(const double* a, std::size_t d);

}  // namespace ncg

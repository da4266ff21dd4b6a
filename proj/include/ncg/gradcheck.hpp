// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncg/autodiff.hpp"

namespace ncg {

// Central finite differences, h = 1e-5. The reported error for each
// element is |analytic - fd| / max(|analytic|, |fd|, 1e-3), which makes
// the 1e-4 relative threshold act as a 1e-7 absolute floor for tiny
// gradients.
double max_grad_error(const std::function<Tensor(Tape&)>& forward,
                      std::vector<Tensor> params, double h = 1e-5);

struct GradCheckResult {
  std::string op;
  double max_rel_err;
  bool pass;
};

// Runs `instances` random finite-difference checks per op (every
// autodiff op plus the composed NCG objectives) at the 1e-4 threshold.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed,
                                                 std::size_t instances = 100);

inline constexpr double kGradCheckThreshold = 1e-4;

}  // namespace ncg

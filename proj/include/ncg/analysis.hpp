// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "ncg/loss.hpp"

namespace ncg {

// Exact joint description of a small finite-alphabet Markov chain with a
// deterministic readout map, for information-measure oracles.
struct DiscreteProcess {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> kernel;  // nx x nx row-stochastic, P(x'|x)
  std::vector<double> pi;      // stationary distribution
  std::vector<std::size_t> map;  // f: X -> Y, length nx

  // Validates the kernel, computes pi (power iteration, linear-solve
  // fallback) and checks the fixed-point residual.
  static DiscreteProcess make(std::size_t nx, std::vector<double> kernel,
                              std::vector<std::size_t> map, std::size_t ny);
};

struct TransitionGraph {
  std::size_t num_classes = 0;
  std::vector<double> matrix;          // K x K row-stochastic where visited
  std::vector<std::size_t> row_counts; // occurrences of each source class
  double threshold = 0.2;

  // (from, to) pairs with P(to|from) > threshold.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

// Standard sample Pearson correlation; throws on zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// max over classes of |pearson(s(class), truth)| on aligned indices.
// truth is indexed in raw-signal time; s.time_offset resolves alignment.
double envelope_correlation(const ClassDistributionSeries& s,
                            const std::vector<double>& truth);

// Argmax-class sequence -> empirical first-order transition matrix.
TransitionGraph transition_graph(const ClassDistributionSeries& s,
                                 double threshold = 0.2);
TransitionGraph transition_graph(const std::vector<std::size_t>& classes,
                                 std::size_t num_classes, double threshold = 0.2);

std::vector<std::size_t> argmax_classes(const ClassDistributionSeries& s);

// I_pred = H(X_{t+1}) - H(X_{t+1}|X_t), exact, in nats.
double predictive_information(const DiscreteProcess& proc);

// I(X_t:Y_{t+1}) - I(Y_{t+1}:X_t|Y_t), exact enumeration of the joint.
double ntic(const DiscreteProcess& proc);

// H(Y_{t+1}) - H(Y_{t+1}|Y_t) of the readout process, exact enumeration.
// Independent route used to cross-check ntic for deterministic maps.
double readout_predictive_information(const DiscreteProcess& proc);

// Plug-in estimate of H(Y') - H(Y'|Y) from an observed class sequence.
double empirical_ntic(const std::vector<std::size_t>& classes);

}  // namespace ncg

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncg/rng.hpp"

namespace ncg {

enum class NoiseKind { ar1, gaussian, binary, ternary_balanced, ternary_unbalanced };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double theta = 0.0;  // AR(1) only, radians in (0, pi/2]
};

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

// Raw real-valued timeseries with optional ground-truth envelope.
struct Signal {
  std::vector<double> samples;
  std::vector<double> truth;  // empty when no ground truth
  std::string meta;           // generator description (JSON text)

  bool has_truth() const { return !truth.empty(); }
  std::size_t length() const { return samples.size(); }
};

// x_t = cos(theta) x_{t-1} + sin(theta) eta_t, eta ~ N(0,1),
// x_0 drawn from the stationary distribution N(0,1).
Signal gen_ar1(double theta, std::size_t n, Rng& rng);

// iid draws: gaussian N(0,1) or the discrete zero-mean unit-variance
// level sets (binary, balanced/unbalanced ternary).
Signal gen_discrete(NoiseKind kind, std::size_t n, Rng& rng);
Signal gen_gaussian(std::size_t n, Rng& rng);

// Dispatch on spec.kind.
Signal gen_noise(const NoiseSpec& spec, std::size_t n, Rng& rng);

// psi(t) = (1 + tanh(sin(2 pi t / tau))) / 2
double envelope(double t, double tau);

// samples = psi(t) a_t + (1 - psi(t)) b_t; truth = psi.
// force_psi_one is a test hook that pins the envelope at 1.
Signal gen_mixture(const NoiseSpec& spec_a, const NoiseSpec& spec_b, double tau,
                   std::size_t n, Rng& rng, bool force_psi_one = false);

// Single-column read; `column` is a 0-based index or a header name.
// Rows that fail to parse are reported with their 1-based line number.
Signal ingest_csv(const std::string& path, const std::string& column = "0");

// Multichannel variant: one column per channel.
std::vector<std::vector<double>> ingest_csv_multi(const std::string& path);

// One column per channel, 17-significant-digit round-trip formatting.
void write_csv(const std::string& path,
               const std::vector<const std::vector<double>*>& columns,
               const std::vector<std::string>& header = {});

std::string format_double(double v);

}  // namespace ncg

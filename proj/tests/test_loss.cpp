// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <doctest.h>

#include "ncg/gradcheck.hpp"
#include "ncg/loss.hpp"
#include "ncg/rng.hpp"

using namespace ncg;

namespace {

std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> p(k);
  double z = 0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform());
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

// Laplace cofactor expansion, the independent determinant route.
double cofactor_det(const std::vector<double>& a, std::size_t d) {
  if (d == 1) return a[0];
  double det = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> minor;
    for (std::size_t r = 1; r < d; ++r)
      for (std::size_t cc = 0; cc < d; ++cc)
        if (cc != c) minor.push_back(a[r * d + cc]);
    det += (c % 2 ? -1.0 : 1.0) * a[c] * cofactor_det(minor, d - 1);
  }
  return det;
}

ClassDistributionSeries uniform_series(std::size_t k, std::size_t t) {
  Tensor v = Tensor::zeros({1, k, t});
  for (auto& x : v.data()) x = 1.0 / static_cast<double>(k);
  return {v, k, 0};
}

}  // namespace

TEST_CASE("entropy values") {
  CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(entropy(std::vector<double>{0.25, 0.75}) == doctest::Approx(0.562335).epsilon(1e-5));
  CHECK_THROWS_AS(entropy(std::vector<double>{1.2, -0.2}), std::invalid_argument);
}

TEST_CASE("cross_entropy values and length check") {
  std::vector<double> p{0.3, 0.7};
  CHECK(cross_entropy(p, p) == doctest::Approx(entropy(p)).epsilon(1e-12));
  CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(cross_entropy(p, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("kl values and Gibbs inequality") {
  std::vector<double> p{0.2, 0.8};
  CHECK(kl(p, p) == doctest::Approx(0.0));
  CHECK(kl(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)));
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_simplex(4, rng);
    auto b = random_simplex(4, rng);
    CHECK(kl(a, b) >= 0.0);
  }
}

TEST_CASE("cross-entropy decomposition identity") {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    auto s = random_simplex(5, rng);
    auto sh = random_simplex(5, rng);
    CHECK(std::abs(cross_entropy(s, sh) - entropy(s) - kl(s, sh)) < 1e-12);
  }
}

TEST_CASE("ncg_loss is exactly 0 on the uniform trivial prediction") {
  for (std::size_t k : {2ul, 5ul, 20ul}) {
    auto s = uniform_series(k, 40);
    auto shat = uniform_series(k, 30);
    Tape tape;
    CHECK(std::abs(ncg_loss(tape, s, shat, 5).item()) < 1e-9);
  }
}

TEST_CASE("ncg_loss on perfect alternating one-hot prediction is -ln 2") {
  const std::size_t T = 40, Tp = 30;
  Tensor sv = Tensor::zeros({1, 2, T});
  for (std::size_t t = 0; t < T; ++t) sv.at3(0, t % 2, t) = 1.0;
  const long delta = 3;
  Tensor pv = Tensor::zeros({1, 2, Tp});
  for (std::size_t j = 0; j < Tp; ++j)
    pv.at3(0, (j + delta) % 2, j) = 1.0;  // predicts s at j + delta exactly
  Tape tape;
  ClassDistributionSeries s{sv, 2, 0}, shat{pv, 2, 0};
  CHECK(ncg_loss(tape, s, shat, delta).item() ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("ncg_loss at the collapsed fixed point is 0, not below") {
  Tensor sv = Tensor::zeros({1, 2, 20});
  for (std::size_t t = 0; t < 20; ++t) sv.at3(0, 0, t) = 1.0;
  Tensor pv = Tensor::zeros({1, 2, 15});
  for (std::size_t t = 0; t < 15; ++t) pv.at3(0, 0, t) = 1.0;
  Tape tape;
  CHECK(ncg_loss(tape, {sv, 2, 0}, {pv, 2, 0}, 2).item() == doctest::Approx(0.0));
}

TEST_CASE("ncg_loss errors: class mismatch and empty overlap") {
  auto s = uniform_series(2, 10);
  auto s3 = uniform_series(3, 10);
  Tape tape;
  CHECK_THROWS_AS(ncg_loss(tape, s, s3, 1), std::invalid_argument);
  CHECK_THROWS_AS(ncg_loss(tape, s, uniform_series(2, 10), 100), std::invalid_argument);
}

TEST_CASE("ncg_loss is invariant under joint class permutation") {
  Rng rng(31);
  const std::size_t K = 4, T = 24, Tp = 18;
  Tensor sv = Tensor::zeros({2, K, T}), pv = Tensor::zeros({2, K, Tp});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      auto p = random_simplex(K, rng);
      for (std::size_t k = 0; k < K; ++k) sv.at3(b, k, t) = p[k];
    }
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < Tp; ++t) {
      auto p = random_simplex(K, rng);
      for (std::size_t k = 0; k < K; ++k) pv.at3(b, k, t) = p[k];
    }
  const std::size_t perm[K] = {2, 0, 3, 1};
  Tensor sv2 = Tensor::zeros({2, K, T}), pv2 = Tensor::zeros({2, K, Tp});
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) sv2.at3(b, perm[k], t) = sv.at3(b, k, t);
    for (std::size_t t = 0; t < Tp; ++t)
      for (std::size_t k = 0; k < K; ++k) pv2.at3(b, perm[k], t) = pv.at3(b, k, t);
  }
  Tape tape;
  const double q1 = ncg_loss(tape, {sv, K, 0}, {pv, K, 0}, 2).item();
  const double q2 = ncg_loss(tape, {sv2, K, 0}, {pv2, K, 0}, 2).item();
  CHECK(q1 == doctest::Approx(q2).epsilon(1e-14));
}

TEST_CASE("ncg_loss is bounded below by -ln K") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 2 + rng.uniform_index(6);
    Tensor sv = Tensor::zeros({1, K, 16}), pv = Tensor::zeros({1, K, 12});
    for (std::size_t t = 0; t < 16; ++t) {
      auto p = random_simplex(K, rng);
      for (std::size_t k = 0; k < K; ++k) sv.at3(0, k, t) = p[k];
    }
    for (std::size_t t = 0; t < 12; ++t) {
      auto p = random_simplex(K, rng);
      for (std::size_t k = 0; k < K; ++k) pv.at3(0, k, t) = p[k];
    }
    Tape tape;
    const double q = ncg_loss(tape, {sv, K, 0}, {pv, K, 0}, 1).item();
    CHECK(q >= -std::log(static_cast<double>(K)) - 1e-12);
  }
}

TEST_CASE("ncg_loss gradient w.r.t. generating logits matches finite differences") {
  Rng rng(51);
  Tensor ls = Tensor::zeros({1, 3, 12}, true);
  Tensor lp = Tensor::zeros({1, 3, 9}, true);
  for (auto& v : ls.data()) v = rng.uniform(-2, 2);
  for (auto& v : lp.data()) v = rng.uniform(-2, 2);
  auto fwd = [&](Tape& t) {
    ClassDistributionSeries s{softmax(t, ls, 1), 3, 0};
    ClassDistributionSeries shat{softmax(t, lp, 1), 3, 0};
    return ncg_loss(t, s, shat, 2);
  };
  CHECK(max_grad_error(fwd, {ls, lp}) < 1e-4);
}

TEST_CASE("Q_reg is ~0 when residuals match the signal statistics") {
  Rng rng(61);
  Tensor y = Tensor::zeros({1, 3, 5000});
  for (auto& v : y.data()) v = rng.normal();
  Tape tape;
  // identical tensors give identical determinants exactly
  CHECK(ncg_loss_continuous(tape, y, ResidualSeries{y}).item() ==
        doctest::Approx(0.0));
}

TEST_CASE("Q_reg Gaussian Monte-Carlo check: eps = y/2 gives 6 ln 2") {
  Rng rng(71);
  const std::size_t n = 100000;
  Tensor y = Tensor::zeros({1, 3, n});
  for (auto& v : y.data()) v = rng.normal();
  Tensor e = Tensor::zeros({1, 3, n});
  for (std::size_t i = 0; i < y.numel(); ++i) e.data()[i] = y.data()[i] / 2.0;
  Tape tape;
  const double q = ncg_loss_continuous(tape, y, ResidualSeries{e}).item();
  CHECK(q == doctest::Approx(6.0 * std::log(2.0)).epsilon(0.1 / (6 * std::log(2.0))));
}

TEST_CASE("Q_reg sample-count precondition") {
  Tensor y = Tensor::zeros({1, 3, 2});
  Tape tape;
  CHECK_THROWS_AS(ncg_loss_continuous(tape, y, ResidualSeries{y}),
                  std::invalid_argument);
}

TEST_CASE("LU determinant matches cofactor expansion up to D=4") {
  Rng rng(81);
  for (std::size_t d = 1; d <= 4; ++d)
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(d * d);
      for (auto& v : a) v = rng.uniform(-2, 2);
      const double lu = determinant(a.data(), d);
      const double co = cofactor_det(a, d);
      CHECK(std::abs(lu - co) < 1e-10);
    }
}
